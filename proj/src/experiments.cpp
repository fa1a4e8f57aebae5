#include "pmm/experiments.hpp"

#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <set>

namespace fs = std::filesystem;

namespace pmm {

// ---------------------------------------------------------------------------
// Config serialization

namespace {

/// Reads optional keys from one JSON object and rejects any key it was not asked about.
class StrictObject {
 public:
  StrictObject(const Json& j, std::string where) : j_(j), where_(std::move(where))
  {
    require(j_.is_object(), ErrorCode::Config, where_ + " must be a JSON object");
  }

  template <typename T>
  void get(const char* key, T& out)
  {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const Json::exception&) {
      fail(ErrorCode::Config, "field '" + where_ + "." + key + "' has the wrong type");
    }
  }

  const Json* child(const char* key)
  {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const
  {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key())) fail(ErrorCode::Config, "unknown field '" + where_ + "." + item.key() + "'");
  }

 private:
  const Json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

Json oracle_json(const OracleConfig& o)
{
  return {{"sites", o.sites},
          {"n_max", o.n_max},
          {"variant", o.variant},
          {"B", o.B},
          {"J1", o.J1},
          {"J2", o.J2},
          {"D_dm", o.D_dm},
          {"data_dir", o.data_dir},
          {"images_file", o.images_file},
          {"labels_file", o.labels_file},
          {"images_checksum", o.images_checksum},
          {"train_limit", o.train_limit},
          {"validation_limit", o.validation_limit},
          {"test_limit", o.test_limit}};
}

void read_oracle(const Json& j, OracleConfig& o)
{
  StrictObject s(j, "oracle");
  s.get("sites", o.sites);
  s.get("n_max", o.n_max);
  s.get("variant", o.variant);
  s.get("B", o.B);
  s.get("J1", o.J1);
  s.get("J2", o.J2);
  s.get("D_dm", o.D_dm);
  s.get("data_dir", o.data_dir);
  s.get("images_file", o.images_file);
  s.get("labels_file", o.labels_file);
  s.get("images_checksum", o.images_checksum);
  s.get("train_limit", o.train_limit);
  s.get("validation_limit", o.validation_limit);
  s.get("test_limit", o.test_limit);
  s.finish();
}

Json model_json(const ModelConfig& m)
{
  return {{"family", m.family},   {"dim", m.dim},       {"mode", m.mode},
          {"selector", m.selector}, {"k", m.k},         {"factors", m.factors},
          {"rows", m.rows},       {"cols", m.cols},     {"pixel_bond", m.pixel_bond},
          {"bond", m.bond},       {"init_scale", m.init_scale}, {"observable_dim", m.observable_dim}};
}

void read_model(const Json& j, ModelConfig& m)
{
  StrictObject s(j, "model");
  s.get("family", m.family);
  s.get("dim", m.dim);
  s.get("mode", m.mode);
  s.get("selector", m.selector);
  s.get("k", m.k);
  s.get("factors", m.factors);
  s.get("rows", m.rows);
  s.get("cols", m.cols);
  s.get("pixel_bond", m.pixel_bond);
  s.get("bond", m.bond);
  s.get("init_scale", m.init_scale);
  s.get("observable_dim", m.observable_dim);
  s.finish();
}

Json loss_json(const LossSpec& l)
{
  return {{"kind", std::string(to_string(l.kind))},
          {"level_weights", std::vector<double>(l.level_weights.data(), l.level_weights.data() + l.level_weights.size())},
          {"perplexity", l.perplexity}};
}

void read_loss(const Json& j, LossSpec& l)
{
  StrictObject s(j, "loss");
  std::string kind(to_string(l.kind));
  std::vector<double> weights(l.level_weights.data(), l.level_weights.data() + l.level_weights.size());
  s.get("kind", kind);
  s.get("level_weights", weights);
  s.get("perplexity", l.perplexity);
  s.finish();
  l.kind = loss_kind_from_string(kind);
  l.level_weights = Eigen::Map<const RVector>(weights.data(), Index(weights.size()));
}

Json optimizer_json(const OptimizerConfig& o)
{
  return {{"step_size", o.step_size},   {"beta1", o.beta1},           {"beta2", o.beta2},
          {"epsilon", o.epsilon},       {"max_epochs", o.max_epochs}, {"batch_size", o.batch_size},
          {"patience", o.patience},     {"refine_iterations", o.refine_iterations}};
}

void read_optimizer(const Json& j, OptimizerConfig& o)
{
  StrictObject s(j, "optimizer");
  s.get("step_size", o.step_size);
  s.get("beta1", o.beta1);
  s.get("beta2", o.beta2);
  s.get("epsilon", o.epsilon);
  s.get("max_epochs", o.max_epochs);
  s.get("batch_size", o.batch_size);
  s.get("patience", o.patience);
  s.get("refine_iterations", o.refine_iterations);
  s.finish();
}

bool known_preset(std::string_view name)
{
  for (const auto& p : list_presets())
    if (p.name == name) return true;
  return false;
}

}  // namespace

void ExperimentConfig::validate() const
{
  require(format_version == kConfigFormatVersion, ErrorCode::Config,
          "unsupported config format version " + std::to_string(format_version));
  if (!known_preset(preset)) fail(ErrorCode::UnknownPreset, "unknown preset '" + preset + "'");
  require(!seeds.empty(), ErrorCode::Config, "seeds must be nonempty");
  require(model.init_scale >= 0.0, ErrorCode::Config, "init scale must be nonnegative");
  optimizer.validate();
  if (preset == "s_tn_counts") return;
  require(model.dim >= 1, ErrorCode::Config, "model dim must be positive");
}

Json config_to_json(const ExperimentConfig& c)
{
  return {{"format_version", c.format_version}, {"preset", c.preset},
          {"oracle", oracle_json(c.oracle)},    {"model", model_json(c.model)},
          {"loss", loss_json(c.loss)},          {"optimizer", optimizer_json(c.optimizer)},
          {"seeds", c.seeds},                   {"output_dir", c.output_dir}};
}

ExperimentConfig config_from_json(const Json& j)
{
  StrictObject top(j, "config");
  std::string preset;
  top.get("preset", preset);
  if (!known_preset(preset)) fail(ErrorCode::UnknownPreset, "unknown preset '" + preset + "'");
  // Absent fields keep the preset's defaults.
  ExperimentConfig c = preset_config(preset);
  top.get("format_version", c.format_version);
  top.get("seeds", c.seeds);
  top.get("output_dir", c.output_dir);
  if (const Json* o = top.child("oracle")) read_oracle(*o, c.oracle);
  if (const Json* m = top.child("model")) read_model(*m, c.model);
  if (const Json* l = top.child("loss")) read_loss(*l, c.loss);
  if (const Json* o = top.child("optimizer")) read_optimizer(*o, c.optimizer);
  top.finish();
  c.validate();
  return c;
}

ExperimentConfig load_config(const fs::path& path)
{
  Json j;
  try {
    j = Json::parse(read_text(path));
  } catch (const Json::parse_error& e) {
    fail(ErrorCode::Config, path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

std::string serialize_config(const ExperimentConfig& config) { return config_to_json(config).dump(); }

std::string config_hash(const ExperimentConfig& config)
{
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(serialize_config(config))));
  return buf;
}

bool RunManifest::verify() const
{
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(config)));
  return config_hash == buf;
}

Json manifest_to_json(const RunManifest& m)
{
  Json seeds = Json::array();
  for (const auto& s : m.seeds)
    seeds.push_back({{"seed", s.seed},
                     {"train_loss", s.train_loss},
                     {"validation_loss", s.validation_loss},
                     {"epochs", s.epochs},
                     {"seconds", s.seconds}});
  Json metrics = Json::object();
  for (const auto& [k, v] : m.metrics) metrics[k] = std::isfinite(v) ? Json(v) : Json(nullptr);
  return {{"preset", m.preset},
          {"config_hash", m.config_hash},
          {"config", m.config},
          {"code_version", m.code_version},
          {"seeds", seeds},
          {"best_seed", m.best_seed},
          {"wall_clock_seconds", m.wall_clock_seconds},
          {"metrics", metrics},
          {"artifacts", m.artifacts},
          {"status", m.status},
          {"failed_stage", m.failed_stage},
          {"error", m.error}};
}

RunManifest manifest_from_json(const Json& j)
{
  try {
    RunManifest m;
    m.preset = j.at("preset").get<std::string>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.config = j.at("config").get<std::string>();
    m.code_version = j.at("code_version").get<std::string>();
    for (const auto& s : j.at("seeds"))
      m.seeds.push_back({s.at("seed").get<std::uint64_t>(), s.at("train_loss").get<double>(),
                         s.at("validation_loss").get<double>(), s.at("epochs").get<int>(),
                         s.at("seconds").get<double>()});
    m.best_seed = j.at("best_seed").get<std::uint64_t>();
    m.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
    for (const auto& item : j.at("metrics").items())
      m.metrics[item.key()] = item.value().is_null() ? std::nan("") : item.value().get<double>();
    m.artifacts = j.at("artifacts").get<std::vector<std::string>>();
    m.status = j.at("status").get<std::string>();
    m.failed_stage = j.at("failed_stage").get<std::string>();
    m.error = j.at("error").get<std::string>();
    return m;
  } catch (const Json::exception& e) {
    fail(ErrorCode::Io, std::string("malformed manifest: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Presets

std::vector<PresetInfo> list_presets()
{
  return {
      {"fig1_spin", "2x2 affine PMM vs eigenvector continuation on non-interacting spins", false},
      {"fig2_aho", "5x5 affine PMM vs natural cubic spline on the anharmonic oscillator", false},
      {"fig3_trotter", "10x10 unitary-product PMM extrapolating Trotter energies to dt = 0 (NN/NNN chain)", false},
      {"fig4_mnist", "tensor-network PMM embedding of MNIST digits vs 2D PCA", true},
      {"s_lmg_energies", "15x15 affine PMM on the five lowest LMG energies", false},
      {"s_lmg_observables", "learned observables on the frozen LMG energy PMM vs spline", false},
      {"s_lmg_complex", "LMG energy PMM continued to complex coupling", false},
      {"s_trotter_dm", "5x5 unitary-product PMM on the Trotterized DM chain", false},
      {"s_tn_counts", "tensor-network parameter counts", false},
  };
}

ExperimentConfig preset_config(std::string_view name)
{
  if (!known_preset(name)) fail(ErrorCode::UnknownPreset, "unknown preset '" + std::string(name) + "'");
  ExperimentConfig c;
  c.preset = std::string(name);
  c.output_dir = "runs/" + c.preset;
  c.seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  OptimizerConfig& opt = c.optimizer;
  opt.step_size = 1e-2;
  opt.max_epochs = 2000;
  opt.patience = 2000;
  opt.refine_iterations = 1000;
  ModelConfig& m = c.model;

  if (name == "fig1_spin") {
    c.oracle.sites = 10;
    m = {"affine", 2, "real-symmetric", "lowest_k", 1};
    m.init_scale = 0.5;
    c.loss = LossSpec::eigen_mse(1);
    opt.refine_iterations = 3000;
  } else if (name == "fig2_aho") {
    c.oracle.n_max = 100;
    m = {"affine", 5, "real-symmetric", "lowest_k", 2};
    m.init_scale = 0.5;
    c.loss = LossSpec::eigen_mse(2);
  } else if (name == "fig3_trotter" || name == "s_trotter_dm") {
    const bool dm = name == "s_trotter_dm";
    c.oracle.sites = 8;
    c.oracle.variant = dm ? "dm" : "nnn";
    m.family = "unitary_product";
    m.dim = dm ? 5 : 10;
    m.mode = "complex-hermitian";
    m.k = 3;
    m.factors = 5;
    // Keeps every initial |E dt| well inside the eigenphase window.
    m.init_scale = 0.1;
    c.loss = LossSpec::eigen_mse(3);
    opt.refine_iterations = 300;
  } else if (name == "s_lmg_energies" || name == "s_lmg_observables" || name == "s_lmg_complex") {
    c.oracle.sites = 100;
    m = {"affine", 15, "real-symmetric", "lowest_k", 5};
    m.init_scale = 0.5;
    m.observable_dim = 15;
    c.loss = LossSpec::eigen_mse(5);
  } else if (name == "fig4_mnist") {
    c.oracle.data_dir = std::string(PMM_SOURCE_DIR) + "/data";
    c.oracle.images_file = "mnist5k-images-idx3-ubyte.gz";
    c.oracle.labels_file = "mnist5k-labels-idx1-ubyte.gz";
    c.oracle.train_limit = 2000;
    c.oracle.validation_limit = 500;
    c.oracle.test_limit = 1000;
    m.family = "tensor_network";
    m.dim = 8;
    m.mode = "real-symmetric";
    m.selector = "interior_pair";
    m.rows = m.cols = 28;
    m.pixel_bond = 6;
    m.bond = 12;
    m.init_scale = 1.0;
    c.loss = LossSpec::kl_embedding(30.0);
    c.seeds = {0};
    opt.step_size = 1e-3;
    opt.max_epochs = 300;
    opt.patience = 30;
    opt.batch_size = 500;
    opt.refine_iterations = 0;
  } else if (name == "s_tn_counts") {
    m.family = "tensor_network";
    m.dim = 8;
    m.mode = "real-symmetric";
    m.selector = "interior_pair";
    m.rows = m.cols = 28;
    m.pixel_bond = 6;
    m.bond = 12;
    c.loss = LossSpec::kl_embedding(30.0);
    c.seeds = {0};
    opt.refine_iterations = 0;
  }
  return c;
}

// ---------------------------------------------------------------------------
// Data ingestion and emission

Dataset ingest_images(const fs::path& images, const fs::path& labels, Index limit, std::uint64_t seed,
                      std::uint64_t expected_checksum)
{
  const IdxArray img = read_idx(images);
  const IdxArray lab = read_idx(labels);
  require(img.dims.size() == 3, ErrorCode::Io, images.string() + ": expected a 3-dimensional image array");
  require(lab.dims.size() == 1 && lab.dims[0] == img.dims[0], ErrorCode::Io,
          labels.string() + ": label count does not match image count");
  if (expected_checksum != 0) {
    const std::string_view payload(reinterpret_cast<const char*>(img.data.data()), img.data.size());
    require(fnv1a64(payload) == expected_checksum, ErrorCode::Io, images.string() + ": checksum mismatch");
  }
  const Index count = img.dims[0];
  const Index pixels = Index(img.dims[1]) * Index(img.dims[2]);
  require(limit >= 0 && limit <= count, ErrorCode::InvalidArgument, "image limit exceeds the file's image count");

  std::vector<Index> rows;
  if (limit == 0) {
    rows.resize(std::size_t(count));
    for (Index i = 0; i < count; ++i) rows[std::size_t(i)] = i;
  } else {
    Rng rng = Rng(seed).substream("data-subsample");
    rows = sample_without_replacement(count, limit, rng);
  }
  Dataset d;
  d.inputs.resize(Index(rows.size()), pixels);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::uint8_t* src = img.data.data() + std::size_t(rows[r] * pixels);
    for (Index p = 0; p < pixels; ++p) d.inputs(Index(r), p) = double(src[p]) / 255.0;
    d.labels.push_back(int(lab.data[std::size_t(rows[r])]));
  }
  return d;
}

void emit_curves(const fs::path& path, const std::string& x_name, const RVector& x,
                 const std::vector<std::pair<std::string, RVector>>& series)
{
  require(!series.empty(), ErrorCode::InvalidArgument, "emit_curves needs at least one series");
  std::vector<CsvColumn> cols{{x_name, x}};
  for (const auto& [name, values] : series) cols.push_back({name, values});
  write_csv(path, cols);
}

// ---------------------------------------------------------------------------
// Orchestration

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Context {
  const ExperimentConfig& cfg;
  fs::path out;
  RunManifest& manifest;
  std::string stage = "setup";

  void set(const std::string& key, double value) { manifest.metrics[key] = value; }
  fs::path artifact(const std::string& name)
  {
    manifest.artifacts.push_back(name);
    return out / name;
  }
  std::uint64_t run_seed() const { return cfg.seeds.front(); }
};

template <typename Model>
struct Trained {
  Model model;
  TrainState state;
};

/// Trains one model per seed and returns them in seed order with the index of
/// the lowest validation loss (first wins on ties).
template <typename Model, typename Init>
std::pair<std::vector<Trained<Model>>, std::size_t> train_seeds(Context& ctx, Init&& init, const Dataset& train_set,
                                                                const Dataset& val_set, const LossSpec& spec,
                                                                const std::string& tag = "")
{
  std::vector<Trained<Model>> runs;
  std::size_t best = 0;
  for (std::size_t i = 0; i < ctx.cfg.seeds.size(); ++i) {
    const std::uint64_t seed = ctx.cfg.seeds[i];
    OptimizerConfig opt = ctx.cfg.optimizer;
    opt.seed = seed;
    const auto t0 = Clock::now();
    auto result = train(init(seed), train_set, val_set, spec, opt);
    SeedResult sr;
    sr.seed = seed;
    sr.validation_loss = result.state.best_validation;
    sr.epochs = result.state.epoch;
    sr.seconds = seconds_since(t0);
    for (const auto& row : result.state.history)
      if (row.validation_loss == result.state.best_validation) {
        sr.train_loss = row.train_loss;
        break;
      }
    if (tag.empty()) ctx.manifest.seeds.push_back(sr);
    runs.push_back({std::move(result.model), std::move(result.state)});
    if (runs.back().state.best_validation < runs[best].state.best_validation) best = i;
  }
  if (tag.empty()) ctx.manifest.best_seed = ctx.cfg.seeds[best];
  write_history_csv(ctx.artifact("history" + tag + "_seed" + std::to_string(ctx.cfg.seeds[best]) + ".csv"),
                    runs[best].state.history);
  return {std::move(runs), best};
}

PackMode model_mode(const ModelConfig& m) { return pack_mode_from_string(m.mode); }

OutputSelector model_selector(const ModelConfig& m)
{
  if (m.selector == "interior_pair") return OutputSelector::interior_pair();
  if (m.selector == "lowest_k") return OutputSelector::lowest(m.k);
  fail(ErrorCode::Config, "unknown selector '" + m.selector + "'");
}

void require_family(const ExperimentConfig& cfg, const char* family)
{
  require(cfg.model.family == family, ErrorCode::Config,
          "preset " + cfg.preset + " needs model family " + family + ", got '" + cfg.model.family + "'");
}

// Feature/target scaling folded back into the model after training.

struct Scaling {
  RVector input;
  double output = 1.0;
};

Scaling fit_scaling(const Dataset& train_set)
{
  Scaling s;
  s.input = train_set.inputs.cwiseAbs().colwise().maxCoeff().transpose();
  for (Index i = 0; i < s.input.size(); ++i)
    if (s.input(i) == 0.0) s.input(i) = 1.0;
  s.output = train_set.has_targets() ? train_set.targets.cwiseAbs().maxCoeff() : 1.0;
  if (s.output == 0.0) s.output = 1.0;
  return s;
}

Dataset apply_scaling(Dataset d, const Scaling& s)
{
  d.inputs = (d.inputs.array().rowwise() / s.input.transpose().array()).matrix();
  d.targets /= s.output;
  return d;
}

/// Energies scaled by s and times (dt) multiplied by s leave E·dt unchanged.
Dataset apply_time_scaling(Dataset d, double s)
{
  d.inputs *= s;
  d.targets /= s;
  return d;
}

struct AffineFit {
  AffinePMM model;  ///< physical units
  std::size_t best = 0;
};

AffineFit fit_affine(Context& ctx, const DatasetSplits& splits, const std::string& tag = "")
{
  const ExperimentConfig& cfg = ctx.cfg;
  require_family(cfg, "affine");
  const Scaling scale = fit_scaling(splits.train);
  const Dataset train_set = apply_scaling(splits.train, scale);
  const Dataset val_set = apply_scaling(splits.validation, scale);
  const PackMode mode = model_mode(cfg.model);
  const OutputSelector selector = model_selector(cfg.model);
  auto init = [&](std::uint64_t seed) {
    return init_affine(cfg.model.dim, train_set.num_features(), mode, selector, seed, cfg.model.init_scale);
  };
  ctx.stage = "train";
  auto [runs, best] = train_seeds<AffinePMM>(ctx, init, train_set, val_set, cfg.loss, tag);
  AffineFit out{rescale(runs[best].model, scale.input, scale.output), best};
  write_checkpoint(ctx.artifact("model" + tag + ".json"), out.model);
  return out;
}

RMatrix affine_table(const AffinePMM& model, const RVector& x)
{
  RMatrix out(x.size(), model.selector.count());
  for (Index i = 0; i < x.size(); ++i) out.row(i) = affine_outputs(model, RVector::Constant(1, x(i))).transpose();
  return out;
}

std::string level(Index k) { return "E" + std::to_string(k); }

// ---------------------------------------------------------------------------

void run_fig1(Context& ctx)
{
  ctx.stage = "data";
  const DatasetSplits splits = make_dataset("fig1_spin", ctx.run_seed());
  const AffineFit fit = fit_affine(ctx, splits);

  ctx.stage = "baselines";
  const Index sites = ctx.cfg.oracle.sites;
  const auto [h0, h1] = noninteracting_spin_components(sites);
  const ECReducedModel ec = ec_build(h0, h1, splits.train.inputs.col(0));

  ctx.stage = "evaluate";
  const RVector c = splits.test.inputs.col(0);
  const RVector exact = splits.test.targets.col(0);
  const RVector pmm = affine_table(fit.model, c).col(0);
  RVector ec_curve(c.size());
  for (Index i = 0; i < c.size(); ++i) ec_curve(i) = ec_energy(ec, c(i));
  const ErrorReport pmm_err = error_report(pmm, exact), ec_err = error_report(ec_curve, exact);
  double pmm_pos = 0.0, ec_pos = 0.0;
  for (Index i = 0; i < c.size(); ++i)
    if (c(i) >= 0.0) {
      pmm_pos = std::max(pmm_pos, pmm_err.abs_err(i));
      ec_pos = std::max(ec_pos, ec_err.abs_err(i));
    }
  ctx.set("pmm_max_abs_err", pmm_err.max_abs);
  ctx.set("pmm_max_abs_err_c_pos", pmm_pos);
  ctx.set("ec_max_abs_err", ec_err.max_abs);
  ctx.set("ec_max_abs_err_c_pos", ec_pos);
  ctx.set("ec_sites", double(sites));

  ctx.stage = "emit";
  emit_curves(ctx.artifact("fig1_curves.csv"), "c", c, {{"exact", exact}, {"pmm", pmm}, {"ec", ec_curve}});
  write_error_csv(ctx.artifact("fig1_pmm_errors.csv"), c, pmm_err);
  write_error_csv(ctx.artifact("fig1_ec_errors.csv"), c, ec_err);
}

void run_fig2(Context& ctx)
{
  ctx.stage = "data";
  const DatasetSplits splits = make_dataset("fig2_aho", ctx.run_seed());
  const AffineFit fit = fit_affine(ctx, splits);

  ctx.stage = "baselines";
  const RVector xt = splits.train.inputs.col(0);
  std::vector<SplineModel> splines;
  for (Index k = 0; k < 2; ++k) splines.push_back(spline_fit(xt, splits.train.targets.col(k)));

  ctx.stage = "evaluate";
  double pmm_max = 0.0, spline_max = 0.0;
  Index violations = 0;
  for (const Dataset* d : {&splits.validation, &splits.test}) {
    const RVector g = d->inputs.col(0);
    const RMatrix pmm = affine_table(fit.model, g);
    for (Index i = 0; i < g.size(); ++i)
      if (pmm(i, 0) > pmm(i, 1)) ++violations;
    if (d != &splits.validation) continue;
    for (Index k = 0; k < 2; ++k) {
      const ErrorReport pe = error_report(pmm.col(k), d->targets.col(k));
      const ErrorReport se = error_report(spline_eval(splines[std::size_t(k)], g), d->targets.col(k));
      ctx.set("pmm_max_abs_err_" + level(k), pe.max_abs);
      ctx.set("spline_max_abs_err_" + level(k), se.max_abs);
      pmm_max = std::max(pmm_max, pe.max_abs);
      spline_max = std::max(spline_max, se.max_abs);
      write_error_csv(ctx.artifact("fig2_pmm_errors_" + level(k) + ".csv"), g, pe);
      write_error_csv(ctx.artifact("fig2_spline_errors_" + level(k) + ".csv"), g, se);
    }
  }
  ctx.set("pmm_max_abs_err", pmm_max);
  ctx.set("spline_max_abs_err", spline_max);
  ctx.set("level_order_violations", double(violations));

  ctx.stage = "emit";
  const RVector g = splits.test.inputs.col(0);
  const RMatrix pmm = affine_table(fit.model, g);
  emit_curves(ctx.artifact("fig2_curves.csv"), "g", g,
              {{"exact_E0", splits.test.targets.col(0)},
               {"exact_E1", splits.test.targets.col(1)},
               {"pmm_E0", pmm.col(0)},
               {"pmm_E1", pmm.col(1)},
               {"spline_E0", spline_eval(splines[0], g)},
               {"spline_E1", spline_eval(splines[1], g)}});
}

/// First dt on `grid` where levels a and b of `curves` swap order, NaN if none.
double first_crossing(const RVector& grid, const RMatrix& curves, Index a, Index b)
{
  for (Index i = 1; i < grid.size(); ++i) {
    const double d0 = curves(i - 1, b) - curves(i - 1, a), d1 = curves(i, b) - curves(i, a);
    if ((d0 > 0.0) != (d1 > 0.0)) return grid(i);
  }
  return std::nan("");
}

void run_trotter(Context& ctx)
{
  const ExperimentConfig& cfg = ctx.cfg;
  require_family(cfg, "unitary_product");
  ctx.stage = "data";
  const DatasetSplits splits = make_dataset(cfg.preset, ctx.run_seed());
  const Index levels = cfg.model.k;
  require(levels == splits.train.targets.cols(), ErrorCode::Config, "trotter presets track 3 levels");

  const double s = splits.train.targets.cwiseAbs().maxCoeff();
  const Dataset train_set = apply_time_scaling(splits.train, s);
  const Dataset val_set = apply_time_scaling(splits.validation, s);
  auto init = [&](std::uint64_t seed) {
    return init_unitary_product(cfg.model.dim, cfg.model.factors, levels, seed, cfg.model.init_scale);
  };
  ctx.stage = "train";
  auto [runs, best] = train_seeds<UnitaryProductPMM>(ctx, init, train_set, val_set, cfg.loss);
  const UnitaryProductPMM model = rescale(runs[best].model, s);
  write_checkpoint(ctx.artifact("model.json"), model);

  ctx.stage = "baselines";
  const RVector dt_train = splits.train.inputs.col(0);
  const BranchPolynomials sorted = fit_branch_polynomials(dt_train, splits.train.targets, LevelOrder::Sorted);
  const BranchPolynomials diabatic = fit_branch_polynomials(dt_train, splits.train.targets, LevelOrder::Diabatic);

  ctx.stage = "evaluate";
  const RVector dt = splits.test.inputs.col(0);
  Index zero = -1;
  for (Index i = 0; i < dt.size(); ++i)
    if (dt(i) == 0.0) zero = i;
  require(zero >= 0, ErrorCode::InvalidArgument, "test grid must contain dt = 0");
  const RVector exact0 = splits.test.targets.row(zero).transpose();
  const RVector pmm0 = unitary_product_energies(model, 0.0);
  const RVector sorted0 = sorted.predict(0.0), diabatic0 = diabatic.predict(0.0);
  double pmm_mean = 0.0, sorted_mean = 0.0, diabatic_mean = 0.0;
  for (Index k = 0; k < levels; ++k) {
    const double denom = std::max(std::abs(exact0(k)), 1e-12);
    const double pe = std::abs(pmm0(k) - exact0(k)) / denom;
    const double se = std::abs(sorted0(k) - exact0(k)) / denom;
    const double de = std::abs(diabatic0(k) - exact0(k)) / denom;
    ctx.set("pmm_rel_err_dt0_" + level(k), pe);
    ctx.set("poly_sorted_rel_err_dt0_" + level(k), se);
    ctx.set("poly_diabatic_rel_err_dt0_" + level(k), de);
    pmm_mean += pe / double(levels);
    sorted_mean += se / double(levels);
    diabatic_mean += de / double(levels);
  }
  ctx.set("pmm_mean_rel_err_dt0", pmm_mean);
  ctx.set("poly_sorted_mean_rel_err_dt0", sorted_mean);
  ctx.set("poly_diabatic_mean_rel_err_dt0", diabatic_mean);

  // Level structure on a fine grid: PMM gaps vs polynomial crossings of E1 and E2.
  const RVector fine = linspace(-0.2, 0.2, 401);
  RMatrix pmm_fine(fine.size(), levels), sorted_fine(fine.size(), levels), diabatic_fine(fine.size(), levels);
  for (Index i = 0; i < fine.size(); ++i) {
    pmm_fine.row(i) = unitary_product_energies(model, fine(i)).transpose();
    sorted_fine.row(i) = sorted.predict(fine(i)).transpose();
    diabatic_fine.row(i) = diabatic.predict(fine(i)).transpose();
  }
  ctx.set("pmm_min_gap_E1_E2", (pmm_fine.col(2) - pmm_fine.col(1)).minCoeff());
  ctx.set("pmm_min_gap_E0_E1", (pmm_fine.col(1) - pmm_fine.col(0)).minCoeff());
  for (const auto& [name, curves] : {std::pair<std::string, const RMatrix*>{"sorted", &sorted_fine},
                                     std::pair<std::string, const RMatrix*>{"diabatic", &diabatic_fine}}) {
    const double cross = first_crossing(fine, *curves, 1, 2);
    ctx.set("poly_" + name + "_crossing_dt_E1_E2", cross);
    double gap = std::nan("");
    if (std::isfinite(cross))
      for (Index i = 0; i < fine.size(); ++i)
        if (std::abs(fine(i) - cross) <= 0.02) {
          const double g = pmm_fine(i, 2) - pmm_fine(i, 1);
          gap = std::isnan(gap) ? g : std::min(gap, g);
        }
    ctx.set("pmm_gap_near_poly_" + name + "_crossing", gap);
  }

  ctx.stage = "emit";
  std::vector<std::pair<std::string, RVector>> series;
  RMatrix pmm_test(dt.size(), levels);
  for (Index i = 0; i < dt.size(); ++i) pmm_test.row(i) = unitary_product_energies(model, dt(i)).transpose();
  for (Index k = 0; k < levels; ++k) series.push_back({"trotter_" + level(k), splits.test.targets.col(k)});
  for (Index k = 0; k < levels; ++k) series.push_back({"pmm_" + level(k), pmm_test.col(k)});
  emit_curves(ctx.artifact(cfg.preset + "_curves.csv"), "dt", dt, series);
  series.clear();
  for (Index k = 0; k < levels; ++k) series.push_back({"pmm_" + level(k), pmm_fine.col(k)});
  for (Index k = 0; k < levels; ++k) series.push_back({"poly_sorted_" + level(k), sorted_fine.col(k)});
  for (Index k = 0; k < levels; ++k) series.push_back({"poly_diabatic_" + level(k), diabatic_fine.col(k)});
  emit_curves(ctx.artifact(cfg.preset + "_fine.csv"), "dt", fine, series);
  write_csv(ctx.artifact(cfg.preset + "_dt0.csv"),
            {{"level", linspace(0.0, double(levels - 1), levels)},
             {"exact", exact0},
             {"pmm", pmm0},
             {"poly_sorted", sorted0},
             {"poly_diabatic", diabatic0}});
  write_dataset_csv(ctx.artifact(cfg.preset + ".train.csv"), splits.train);
  write_dataset_csv(ctx.artifact(cfg.preset + ".val.csv"), splits.validation);
  write_dataset_csv(ctx.artifact(cfg.preset + ".test.csv"), splits.test);
}

void run_tn_counts(Context& ctx)
{
  const ModelConfig& m = ctx.cfg.model;
  require_family(ctx.cfg, "tensor_network");
  const TensorNetworkPMM tn = TensorNetworkPMM::zeros(m.rows, m.cols, m.dim, m.pixel_bond, m.bond, model_mode(m));
  ctx.set("stored_params", double(tn.num_params()));
  ctx.set("full_representation", double(tn.full_representation_count()));
  ctx.set("expanded_coupling_values", double(tn.rows * tn.cols * tn.entries_per_matrix()));
}

AffineFit lmg_host(Context& ctx, const DatasetSplits& splits)
{
  const AffineFit fit = fit_affine(ctx, splits);
  ctx.stage = "evaluate";
  for (const auto& [name, d] : {std::pair<std::string, const Dataset*>{"validation", &splits.validation},
                                std::pair<std::string, const Dataset*>{"test", &splits.test}}) {
    const RMatrix pmm = affine_table(fit.model, d->inputs.col(0));
    double worst = 0.0;
    for (Index k = 0; k < pmm.cols(); ++k)
      worst = std::max(worst, error_report(pmm.col(k), d->targets.col(k)).max_rel);
    ctx.set("energy_max_rel_err_" + name, worst);
  }
  return fit;
}

void run_lmg_energies(Context& ctx)
{
  ctx.stage = "data";
  const DatasetSplits splits = make_dataset("s_lmg_energies", ctx.run_seed());
  const AffineFit fit = lmg_host(ctx, splits);
  ctx.stage = "emit";
  const RVector c = splits.test.inputs.col(0);
  const RMatrix pmm = affine_table(fit.model, c);
  std::vector<std::pair<std::string, RVector>> series;
  for (Index k = 0; k < pmm.cols(); ++k) series.push_back({"exact_" + level(k), splits.test.targets.col(k)});
  for (Index k = 0; k < pmm.cols(); ++k) series.push_back({"pmm_" + level(k), pmm.col(k)});
  emit_curves(ctx.artifact("lmg_energies_curves.csv"), "c", c, series);
}

void run_lmg_observables(Context& ctx)
{
  ctx.stage = "data";
  const DatasetSplits energy = make_dataset("s_lmg_energies", ctx.run_seed());
  const AffineFit host = lmg_host(ctx, energy);
  const Index sites = ctx.cfg.oracle.sites;
  const double obs_init_scale = 0.1;

  for (const auto& [which, name, window_lo, window_hi] :
       {std::tuple{LmgObservable::Sx2, std::string("sx2"), 0.4, 0.6},
        std::tuple{LmgObservable::Sz, std::string("sz"), 0.4, 0.55}}) {
    ctx.stage = "data";
    const DatasetSplits splits = lmg_observable_splits(which, sites);
    ctx.stage = "train";
    const Index odim = ctx.cfg.model.observable_dim > 0 ? ctx.cfg.model.observable_dim : host.model.dim;
    require(odim == host.model.dim, ErrorCode::Config, "observable dimension must match the host");
    const double s = std::max(splits.train.targets.cwiseAbs().maxCoeff(), 1e-300);
    Dataset train_set = splits.train, val_set = splits.validation;
    train_set.targets /= s;
    val_set.targets /= s;
    auto init = [&](std::uint64_t seed) {
      return ObservableFit{host.model, init_observable(odim, seed, obs_init_scale)};
    };
    auto [runs, best] =
        train_seeds<ObservableFit>(ctx, init, train_set, val_set, LossSpec::observable_mse(), "_" + name);
    ObservableFit fit = runs[best].model;
    fit.obs.O.values *= s;
    write_checkpoint(ctx.artifact("observable_" + name + ".json"), fit.obs);

    ctx.stage = "baselines";
    const SplineModel spline = spline_fit(splits.train.inputs.col(0), splits.train.targets.col(0));

    ctx.stage = "evaluate";
    const RVector c = splits.test.inputs.col(0);
    const RVector exact = splits.test.targets.col(0);
    RVector pmm(c.size());
    for (Index i = 0; i < c.size(); ++i) pmm(i) = observable_expectation(fit.host, fit.obs, RVector::Constant(1, c(i)));
    const RVector spl = spline_eval(spline, c);
    double pmm_window = 0.0, spline_window = 0.0;
    for (Index i = 0; i < c.size(); ++i)
      if (c(i) > window_lo && c(i) < window_hi) {
        pmm_window = std::max(pmm_window, std::abs(pmm(i) - exact(i)));
        spline_window = std::max(spline_window, std::abs(spl(i) - exact(i)));
      }
    ctx.set("pmm_window_max_abs_err_" + name, pmm_window);
    ctx.set("spline_window_max_abs_err_" + name, spline_window);
    ctx.set("pmm_train_loss_" + name, observable_mse_loss(fit, splits.train, false).value);

    ctx.stage = "emit";
    emit_curves(ctx.artifact("lmg_observable_" + name + ".csv"), "c", c,
                {{"exact", exact}, {"pmm", pmm}, {"spline", spl}});
  }
}

void run_lmg_complex(Context& ctx)
{
  ctx.stage = "data";
  const DatasetSplits splits = make_dataset("s_lmg_complex", ctx.run_seed());
  const AffineFit host = lmg_host(ctx, splits);
  const Index sites = ctx.cfg.oracle.sites;

  ctx.stage = "evaluate";
  const RVector re = linspace(-0.25, 1.25, 61), im = linspace(-0.5, 0.5, 41);
  RMatrix rel(re.size(), im.size());
  std::vector<double> col_re, col_im, col_abs, col_arg, col_rel, col_exact_abs, col_exact_arg;
  for (Index a = 0; a < re.size(); ++a)
    for (Index b = 0; b < im.size(); ++b) {
      const Complex c(re(a), im(b));
      const Complex e_pmm = affine_eval_complex(host.model, CVector::Constant(1, c))(0);
      const Complex e_exact = lmg_complex_ground(sites, c);
      rel(a, b) = std::abs(e_pmm - e_exact) / std::max(std::abs(e_exact), 1e-12);
      col_re.push_back(re(a));
      col_im.push_back(im(b));
      col_abs.push_back(std::abs(e_pmm));
      col_arg.push_back(std::arg(e_pmm));
      col_rel.push_back(rel(a, b));
      col_exact_abs.push_back(std::abs(e_exact));
      col_exact_arg.push_back(std::arg(e_exact));
    }

  // Region below 1e-3 connected (4-neighbour) to the real training interval.
  const double level_set = 1e-3;
  std::vector<char> in(std::size_t(re.size() * im.size()), 0);
  std::deque<std::pair<Index, Index>> queue;
  Index axis = -1;
  for (Index b = 0; b < im.size(); ++b)
    if (im(b) == 0.0) axis = b;
  Index seeds_on_axis = 0;
  for (Index a = 0; a < re.size(); ++a)
    if (re(a) >= 0.0 && re(a) <= 1.0 && rel(a, axis) < level_set) {
      in[std::size_t(a * im.size() + axis)] = 1;
      queue.push_back({a, axis});
      ++seeds_on_axis;
    }
  while (!queue.empty()) {
    const auto [a, b] = queue.front();
    queue.pop_front();
    const std::pair<Index, Index> nbrs[] = {{a + 1, b}, {a - 1, b}, {a, b + 1}, {a, b - 1}};
    for (const auto& [x, y] : nbrs) {
      if (x < 0 || y < 0 || x >= re.size() || y >= im.size()) continue;
      char& flag = in[std::size_t(x * im.size() + y)];
      if (flag || rel(x, y) >= level_set) continue;
      flag = 1;
      queue.push_back({x, y});
    }
  }
  Index region = 0, offaxis = 0;
  double max_im = 0.0;
  for (Index a = 0; a < re.size(); ++a)
    for (Index b = 0; b < im.size(); ++b)
      if (in[std::size_t(a * im.size() + b)]) {
        ++region;
        if (b != axis) {
          ++offaxis;
          max_im = std::max(max_im, std::abs(im(b)));
        }
      }
  ctx.set("region_axis_seeds", double(seeds_on_axis));
  ctx.set("region_cells", double(region));
  ctx.set("region_offaxis_cells", double(offaxis));
  ctx.set("region_max_abs_im", max_im);
  ctx.set("grid_cells", double(re.size() * im.size()));

  ctx.stage = "emit";
  auto vec = [](const std::vector<double>& v) { return RVector(Eigen::Map<const RVector>(v.data(), Index(v.size()))); };
  write_csv(ctx.artifact("lmg_complex_surface.csv"), {{"re_c", vec(col_re)},
                                                       {"im_c", vec(col_im)},
                                                       {"abs_E0", vec(col_abs)},
                                                       {"arg_E0", vec(col_arg)},
                                                       {"rel_err", vec(col_rel)},
                                                       {"exact_abs_E0", vec(col_exact_abs)},
                                                       {"exact_arg_E0", vec(col_exact_arg)}});
}

void run_mnist(Context& ctx)
{
  const ExperimentConfig& cfg = ctx.cfg;
  const OracleConfig& o = cfg.oracle;
  const ModelConfig& m = cfg.model;
  require_family(cfg, "tensor_network");

  ctx.stage = "data";
  const fs::path dir = o.data_dir;
  const Dataset pool = ingest_images(dir / o.images_file, dir / o.labels_file, 0, ctx.run_seed(), o.images_checksum);
  const Index need = o.train_limit + o.validation_limit + o.test_limit;
  require(need <= pool.size(), ErrorCode::Config, "requested subset exceeds the available images");
  Rng rng = Rng(ctx.run_seed()).substream("data-subsample");
  const std::vector<Index> order = sample_without_replacement(pool.size(), need, rng);
  auto take = [&](Index from, Index count, Split split) {
    Dataset d = pool.subset(std::vector<Index>(order.begin() + from, order.begin() + from + count));
    d.split = split;
    return d;
  };
  const Dataset train_set = take(0, o.train_limit, Split::Train);
  const Dataset val_set = take(o.train_limit, o.validation_limit, Split::Validation);
  const Dataset test_set = take(o.train_limit + o.validation_limit, o.test_limit, Split::Test);

  const PackMode mode = model_mode(m);
  auto init = [&](std::uint64_t seed) {
    return init_tensor_network(m.rows, m.cols, m.dim, m.pixel_bond, m.bond, mode, seed, m.init_scale);
  };
  const RMatrix p_train = joint_probabilities(train_set.inputs, cfg.loss.perplexity);
  const double kl_init = kl_embedding_loss(init(cfg.seeds.front()), train_set.inputs, p_train, false).value;

  // The training objective itself: mean KL over consecutive batches of the training set.
  const Index batch = std::min(cfg.optimizer.batch_size, train_set.size());
  std::vector<std::pair<RMatrix, RMatrix>> batches;
  for (Index start = 0; start + batch <= train_set.size(); start += batch) {
    RMatrix images = train_set.inputs.middleRows(start, batch);
    RMatrix p = joint_probabilities(images, cfg.loss.perplexity);
    batches.emplace_back(std::move(images), std::move(p));
  }
  auto batch_kl = [&](const TensorNetworkPMM& model) {
    double sum = 0.0;
    for (const auto& [images, p] : batches) sum += kl_embedding_loss(model, images, p, false).value;
    return sum / double(batches.size());
  };

  ctx.stage = "train";
  auto [runs, best] = train_seeds<TensorNetworkPMM>(ctx, init, train_set, val_set, cfg.loss);
  const TensorNetworkPMM& model = runs[best].model;
  write_checkpoint(ctx.artifact("model.json"), model);

  ctx.stage = "evaluate";
  const double kl_init_best = kl_embedding_loss(init(cfg.seeds[best]), train_set.inputs, p_train, false).value;
  const double kl_final = kl_embedding_loss(model, train_set.inputs, p_train, false).value;
  const RMatrix emb_train = tn_embed(model, train_set.inputs), emb_test = tn_embed(model, test_set.inputs);
  const double pmm_err = knn_error(emb_test, test_set.labels, emb_train, train_set.labels);

  ctx.stage = "baselines";
  const PcaModel pca = pca_fit(train_set.inputs, 2);
  const RMatrix pca_train = pca_transform(pca, train_set.inputs), pca_test = pca_transform(pca, test_set.inputs);
  const double pca_err = knn_error(pca_test, test_set.labels, pca_train, train_set.labels);

  ctx.set("kl_train_init", kl_init_best);
  ctx.set("kl_train_init_first_seed", kl_init);
  ctx.set("kl_train_final", kl_final);
  ctx.set("kl_decrease_fraction", 1.0 - kl_final / kl_init_best);
  const double batch_init = batch_kl(init(cfg.seeds[best])), batch_final = batch_kl(model);
  ctx.set("kl_batch_init", batch_init);
  ctx.set("kl_batch_final", batch_final);
  ctx.set("kl_batch_decrease_fraction", 1.0 - batch_final / batch_init);
  ctx.set("knn_test_error_pmm", pmm_err);
  ctx.set("knn_test_error_pca", pca_err);
  ctx.set("knn_train_error_pmm", knn_error(emb_train, train_set.labels));
  ctx.set("train_images", double(train_set.size()));
  ctx.set("test_images", double(test_set.size()));
  ctx.set("stored_params", double(model.num_params()));

  ctx.stage = "emit";
  RVector labels(test_set.size());
  for (Index i = 0; i < test_set.size(); ++i) labels(i) = test_set.labels[std::size_t(i)];
  write_csv(ctx.artifact("mnist_test_embedding.csv"),
            {{"pmm_x", emb_test.col(0)}, {"pmm_y", emb_test.col(1)},
             {"pca_x", pca_test.col(0)}, {"pca_y", pca_test.col(1)}, {"label", labels}});
}

}  // namespace

RunManifest run_experiment(const ExperimentConfig& config)
{
  RunManifest manifest;
  manifest.preset = config.preset;
  manifest.config = serialize_config(config);
  manifest.config_hash = config_hash(config);
  const auto t0 = Clock::now();
  Context ctx{config, fs::path(config.output_dir), manifest};
  try {
    config.validate();
    fs::create_directories(ctx.out);
    write_text(ctx.artifact("config.json"), config_to_json(config).dump(1) + "\n");
    const std::string& p = config.preset;
    if (p == "fig1_spin") run_fig1(ctx);
    else if (p == "fig2_aho") run_fig2(ctx);
    else if (p == "fig3_trotter" || p == "s_trotter_dm") run_trotter(ctx);
    else if (p == "fig4_mnist") run_mnist(ctx);
    else if (p == "s_lmg_energies") run_lmg_energies(ctx);
    else if (p == "s_lmg_observables") run_lmg_observables(ctx);
    else if (p == "s_lmg_complex") run_lmg_complex(ctx);
    else if (p == "s_tn_counts") run_tn_counts(ctx);
    ctx.stage = "done";
  } catch (const std::exception& e) {
    manifest.status = "failed";
    manifest.failed_stage = ctx.stage;
    manifest.error = e.what();
  }
  manifest.wall_clock_seconds = seconds_since(t0);
  try {
    manifest.artifacts.push_back("manifest.json");
    write_text(ctx.out / "manifest.json", manifest_to_json(manifest).dump(1) + "\n");
  } catch (const std::exception& e) {
    if (manifest.status == "ok") {
      manifest.status = "failed";
      manifest.failed_stage = "manifest";
      manifest.error = e.what();
    }
  }
  return manifest;
}

}  // namespace pmm
