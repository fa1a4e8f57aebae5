#pragma once

#include "pmm/io.hpp"
#include "pmm/oracles.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace pmm {

inline constexpr int kConfigFormatVersion = 1;
inline constexpr const char* kCodeVersion = "pmm 1.0.0";

struct OracleConfig {
  Index sites = 0;        ///< spin chain / LMG / non-interacting spins
  Index n_max = 100;      ///< anharmonic oscillator truncation
  std::string variant;    ///< chain: "nnn" or "dm"
  double B = 1.0, J1 = 1.0, J2 = 0.5, D_dm = 0.5;
  std::string data_dir;   ///< image presets: directory holding the IDX files
  std::string images_file, labels_file;
  std::uint64_t images_checksum = 0;  ///< FNV-1a of the decompressed payload, 0 to skip
  Index train_limit = 0, validation_limit = 0, test_limit = 0;
};

struct ModelConfig {
  std::string family;  ///< affine, unitary_product, tensor_network
  Index dim = 0;
  std::string mode = "real-symmetric";  ///< coupling / entry mode
  std::string selector = "lowest_k";
  Index k = 1;
  Index factors = 0;
  Index rows = 0, cols = 0, pixel_bond = 0, bond = 0;
  double init_scale = 0.1;
  Index observable_dim = 0;  ///< LMG observables: dimension of the learned O
};

struct ExperimentConfig {
  int format_version = kConfigFormatVersion;
  std::string preset;
  OracleConfig oracle;
  ModelConfig model;
  LossSpec loss;
  OptimizerConfig optimizer;
  std::vector<std::uint64_t> seeds;
  std::string output_dir;

  /// Throws Config/UnknownPreset on invariant violations.
  void validate() const;
};

/// Strict JSON: unknown keys and wrong types are rejected.
Json config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const Json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Canonical serialization hashed into the manifest.
std::string serialize_config(const ExperimentConfig& config);
std::string config_hash(const ExperimentConfig& config);

struct PresetInfo {
  std::string name;
  std::string description;
  bool long_running = false;
};
std::vector<PresetInfo> list_presets();
ExperimentConfig preset_config(std::string_view name);

struct SeedResult {
  std::uint64_t seed = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
  int epochs = 0;
  double seconds = 0.0;
};

struct RunManifest {
  std::string preset;
  std::string config_hash;
  std::string config;  ///< serialized config the hash was taken over
  std::string code_version = kCodeVersion;
  std::vector<SeedResult> seeds;
  std::uint64_t best_seed = 0;
  double wall_clock_seconds = 0.0;
  std::map<std::string, double> metrics;
  std::vector<std::string> artifacts;
  std::string status = "ok";
  std::string failed_stage;
  std::string error;

  /// True when `config` still hashes to `config_hash`.
  bool verify() const;
};

Json manifest_to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const Json& j);

/// Generates data, trains every seed, evaluates baselines and writes curves,
/// reports, checkpoints and manifest.json under config.output_dir. A module
/// error is recorded as status "failed" with the stage that raised it.
RunManifest run_experiment(const ExperimentConfig& config);

/// IDX images (scaled to [0, 1], flattened row-major) and labels; `limit` rows
/// sampled without replacement from the "data-subsample" substream of `seed`
/// (limit 0 keeps every image in file order).
Dataset ingest_images(const std::filesystem::path& images, const std::filesystem::path& labels, Index limit,
                      std::uint64_t seed, std::uint64_t expected_checksum = 0);

/// One x column followed by one column per series.
void emit_curves(const std::filesystem::path& path, const std::string& x_name, const RVector& x,
                 const std::vector<std::pair<std::string, RVector>>& series);

}  // namespace pmm
