#include "pmm/experiments.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

int cmd_run(const std::string& config_path, const std::string& preset, const std::vector<std::uint64_t>& seed,
            const std::string& out)
{
  pmm::ExperimentConfig config =
      config_path.empty() ? pmm::preset_config(preset) : pmm::load_config(config_path);
  if (!config_path.empty() && !preset.empty() && preset != config.preset)
    pmm::fail(pmm::ErrorCode::Config, "--preset " + preset + " disagrees with config preset " + config.preset);
  if (!seed.empty()) config.seeds = seed;
  if (!out.empty()) config.output_dir = out;
  config.validate();

  std::cerr << "running " << config.preset << " (" << config.seeds.size() << " seed"
            << (config.seeds.size() == 1 ? "" : "s") << ") -> " << config.output_dir << "\n";
  const pmm::RunManifest m = pmm::run_experiment(config);
  for (const auto& s : m.seeds)
    std::printf("seed %llu  train %.6e  validation %.6e  epochs %d  %.1fs\n",
                static_cast<unsigned long long>(s.seed), s.train_loss, s.validation_loss, s.epochs, s.seconds);
  for (const auto& [k, v] : m.metrics) std::printf("%-40s %.9g\n", k.c_str(), v);
  std::printf("status %s  wall %.1fs  hash %s\n", m.status.c_str(), m.wall_clock_seconds, m.config_hash.c_str());
  if (m.status != "ok") {
    std::cerr << "failed in stage '" << m.failed_stage << "': " << m.error << "\n";
    return 1;
  }
  return 0;
}

int cmd_list()
{
  for (const auto& p : pmm::list_presets())
    std::printf("%-18s %s%s\n", p.name.c_str(), p.description.c_str(), p.long_running ? " [long-running]" : "");
  return 0;
}

int cmd_inspect(const std::string& path)
{
  const pmm::Json j = pmm::Json::parse(pmm::read_text(path));
  if (j.contains("config_hash")) {
    const pmm::RunManifest m = pmm::manifest_from_json(j);
    std::printf("preset       %s\nstatus       %s\ncode         %s\nconfig hash  %s (%s)\nbest seed    %llu\n",
                m.preset.c_str(), m.status.c_str(), m.code_version.c_str(), m.config_hash.c_str(),
                m.verify() ? "verified" : "MISMATCH", static_cast<unsigned long long>(m.best_seed));
    if (m.status != "ok") std::printf("failed stage %s: %s\n", m.failed_stage.c_str(), m.error.c_str());
    for (const auto& [k, v] : m.metrics) std::printf("  %-40s %.9g\n", k.c_str(), v);
    for (const auto& a : m.artifacts) std::printf("  artifact %s\n", a.c_str());
    return m.verify() ? 0 : 2;
  }
  if (j.contains("schema")) {
    const pmm::Checkpoint c = pmm::checkpoint_from_json(j);
    std::visit(
        [](const auto& m) {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, pmm::AffinePMM>)
            std::printf("affine PMM  dim %lld  inputs %zu  params %lld\n", static_cast<long long>(m.dim),
                        m.couplings.size(), static_cast<long long>(m.num_params()));
          else if constexpr (std::is_same_v<T, pmm::UnitaryProductPMM>)
            std::printf("unitary-product PMM  dim %lld  factors %zu  levels %lld\n", static_cast<long long>(m.dim),
                        m.factors.size(), static_cast<long long>(m.n_levels));
          else if constexpr (std::is_same_v<T, pmm::TensorNetworkPMM>)
            std::printf("tensor-network PMM  %lldx%lld pixels  dim %lld  params %lld  full %lld\n",
                        static_cast<long long>(m.rows), static_cast<long long>(m.cols),
                        static_cast<long long>(m.dim), static_cast<long long>(m.num_params()),
                        static_cast<long long>(m.full_representation_count()));
          else
            std::printf("observable  dim %lld\n", static_cast<long long>(m.O.dim));
        },
        c);
    return 0;
  }
  const pmm::ExperimentConfig config = pmm::config_from_json(j);
  std::printf("config for %s, hash %s\n%s\n", config.preset.c_str(), pmm::config_hash(config).c_str(),
              pmm::config_to_json(config).dump(1).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Parametric matrix models: train, list and inspect experiments"};
  app.require_subcommand(1);

  std::string config_path, preset, out, inspect_path;
  std::vector<std::uint64_t> seed;
  auto* run = app.add_subcommand("run", "run an experiment preset or config file");
  run->add_option("--config", config_path, "JSON experiment config")->check(CLI::ExistingFile);
  run->add_option("--preset", preset, "preset name (see `list`)");
  run->add_option("--seed", seed, "seed(s) replacing the configured list")->expected(1, -1);
  run->add_option("--out", out, "output directory");
  auto* list = app.add_subcommand("list", "list presets");
  auto* inspect = app.add_subcommand("inspect", "print a manifest, checkpoint or config");
  inspect->add_option("path", inspect_path, "manifest.json, checkpoint or config")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) {
      if (config_path.empty() && preset.empty()) throw CLI::RequiredError("--config or --preset");
      return cmd_run(config_path, preset, seed, out);
    }
    if (*list) return cmd_list();
    if (*inspect) return cmd_inspect(inspect_path);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
