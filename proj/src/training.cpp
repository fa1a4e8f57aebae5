#include "pmm/training.hpp"

#include <algorithm>
#include <cstring>
#include <unordered_set>

namespace pmm {

std::string_view to_string(Split split)
{
  switch (split) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "train";
}

Dataset Dataset::subset(const std::vector<Index>& rows) const
{
  Dataset out;
  out.split = split;
  out.feature_names = feature_names;
  out.target_names = target_names;
  out.inputs.resize(Index(rows.size()), inputs.cols());
  out.targets.resize(Index(rows.size()), targets.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require(rows[r] >= 0 && rows[r] < size(), ErrorCode::InvalidArgument, "subset row out of range");
    out.inputs.row(Index(r)) = inputs.row(rows[r]);
    if (has_targets()) out.targets.row(Index(r)) = targets.row(rows[r]);
    if (!labels.empty()) out.labels.push_back(labels[std::size_t(rows[r])]);
  }
  return out;
}

void Dataset::validate() const
{
  if (has_targets())
    require(targets.rows() == inputs.rows(), ErrorCode::LengthMismatch, "targets and inputs have different row counts");
  require(labels.empty() || Index(labels.size()) == inputs.rows(), ErrorCode::LengthMismatch,
          "labels and inputs have different row counts");
  require(feature_names.empty() || Index(feature_names.size()) == inputs.cols(), ErrorCode::LengthMismatch,
          "feature name count differs from feature dimension");
  require(target_names.empty() || Index(target_names.size()) == targets.cols(), ErrorCode::LengthMismatch,
          "target name count differs from target width");
  require(inputs.allFinite() && targets.allFinite(), ErrorCode::InvalidArgument, "dataset contains non-finite values");
}

void require_disjoint(const Dataset& a, const Dataset& b)
{
  require(a.num_features() == b.num_features() || a.size() == 0 || b.size() == 0, ErrorCode::DimensionMismatch,
          "splits have different feature dimensions");
  auto key = [](const Dataset& d, Index r) {
    const RVector row = d.inputs.row(r).transpose();
    return std::string(reinterpret_cast<const char*>(row.data()), std::size_t(row.size()) * sizeof(double));
  };
  std::unordered_set<std::string> seen;
  for (Index r = 0; r < a.size(); ++r) seen.insert(key(a, r));
  for (Index r = 0; r < b.size(); ++r)
    require(!seen.count(key(b, r)), ErrorCode::InvalidArgument, "training and validation sets share an input row");
}

std::string_view to_string(LossKind kind)
{
  switch (kind) {
    case LossKind::EigenMse: return "eigen_mse";
    case LossKind::ObservableMse: return "observable_mse";
    case LossKind::KlEmbedding: return "kl_embedding";
  }
  return "eigen_mse";
}

LossKind loss_kind_from_string(std::string_view name)
{
  if (name == "eigen_mse") return LossKind::EigenMse;
  if (name == "observable_mse") return LossKind::ObservableMse;
  if (name == "kl_embedding") return LossKind::KlEmbedding;
  fail(ErrorCode::Config, "unknown loss kind '" + std::string(name) + "'");
}

void OptimizerConfig::validate() const
{
  require(step_size > 0.0, ErrorCode::Config, "step size must be positive");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, ErrorCode::Config,
          "moment decay rates must lie in [0, 1)");
  require(epsilon > 0.0, ErrorCode::Config, "epsilon must be positive");
  require(max_epochs >= 0, ErrorCode::Config, "max epochs must be nonnegative");
  require(patience >= 1, ErrorCode::Config, "patience must be at least 1");
  require(batch_size >= 8, ErrorCode::Config, "batch size must be at least 8");
  require(refine_iterations >= 0, ErrorCode::Config, "refine iterations must be nonnegative");
}

namespace detail {

void abort_non_finite(const char* what, int epoch, double step_size)
{
  std::ostringstream os;
  os << "non-finite " << what << " at epoch " << epoch << " (step size " << step_size << ")";
  fail(ErrorCode::NumericalFailure, os.str());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Eigenvalue losses

namespace {

RVector resolve_weights(const RVector& weights, Index width)
{
  if (weights.size() == 0) return RVector::Ones(width);
  require(weights.size() == width, ErrorCode::LengthMismatch, "level weight count differs from target width");
  require((weights.array() >= 0.0).all(), ErrorCode::InvalidArgument, "level weights must be nonnegative");
  return weights;
}

/// Per-example outputs and optional per-level gradients. Degenerate levels are
/// differentiated numerically over the model's flat parameters.
template <typename Model, typename Exact, typename Values>
Residuals residual_core(const Model& model, const Dataset& data, const RVector& weights, Index width,
                        bool with_jacobian, Exact&& exact, Values&& values)
{
  require(data.has_targets(), ErrorCode::InvalidArgument, "eigenvalue loss needs targets");
  require(data.targets.cols() == width, ErrorCode::LengthMismatch, "target width differs from model output count");
  const RVector w = resolve_weights(weights, width);
  const RVector root_w = w.cwiseSqrt();
  const Index m = data.size();

  Residuals out;
  out.r.resize(m * width);
  if (with_jacobian) out.jacobian.resize(m * width, model.num_params());
  for (Index e = 0; e < m; ++e) {
    const RVector x = data.inputs.row(e).transpose();
    RVector outputs;
    if (!with_jacobian) {
      outputs = values(model, x);
    } else {
      try {
        auto lg = exact(model, x);
        outputs = lg.values;
        for (Index k = 0; k < width; ++k) out.jacobian.row(e * width + k) = root_w(k) * lg.grads[std::size_t(k)].transpose();
      } catch (const DegenerateLevelError& err) {
        warn(std::string("finite-difference fallback: ") + err.what());
        outputs = values(model, x);
        const RVector params = flatten(model);
        for (Index k = 0; k < width; ++k) {
          const RVector g = finite_difference_gradient(
              [&](const RVector& p) { return values(unflatten(model, p), x)(k); }, params, 1e-6);
          out.jacobian.row(e * width + k) = root_w(k) * g.transpose();
        }
      }
    }
    out.r.segment(e * width, width) =
        root_w.cwiseProduct(outputs - data.targets.row(e).transpose());
  }
  return out;
}

LossValue from_residuals(const Residuals& res, Index examples, bool with_gradient)
{
  const double m = double(std::max<Index>(examples, 1));
  LossValue out;
  out.value = res.r.squaredNorm() / m;
  if (with_gradient) out.gradient = (2.0 / m) * (res.jacobian.transpose() * res.r);
  return out;
}

Residuals affine_residuals(const AffinePMM& model, const Dataset& data, const RVector& weights, bool jac)
{
  const std::vector<Index> levels = model.selector.indices(model.dim);
  return residual_core(
      model, data, weights, Index(levels.size()), jac,
      [&](const AffinePMM& mdl, const RVector& c) { return affine_level_gradients(mdl, c, levels); },
      [](const AffinePMM& mdl, const RVector& c) { return affine_outputs(mdl, c); });
}

Residuals unitary_residuals(const UnitaryProductPMM& model, const Dataset& data, const RVector& weights, bool jac)
{
  require(data.num_features() == 1, ErrorCode::DimensionMismatch, "unitary product inputs are a single dt column");
  std::vector<Index> levels(std::size_t(model.n_levels));
  for (Index k = 0; k < model.n_levels; ++k) levels[std::size_t(k)] = k;
  return residual_core(
      model, data, weights, model.n_levels, jac,
      [&](const UnitaryProductPMM& mdl, const RVector& x) { return unitary_level_gradients(mdl, x(0), levels); },
      [](const UnitaryProductPMM& mdl, const RVector& x) { return unitary_product_energies(mdl, x(0)); });
}

}  // namespace

LossValue eigen_mse_loss(const AffinePMM& model, const Dataset& data, const RVector& weights, bool with_gradient)
{
  return from_residuals(affine_residuals(model, data, weights, with_gradient), data.size(), with_gradient);
}

LossValue eigen_mse_loss(const UnitaryProductPMM& model, const Dataset& data, const RVector& weights,
                         bool with_gradient)
{
  return from_residuals(unitary_residuals(model, data, weights, with_gradient), data.size(), with_gradient);
}

Residuals eigen_residuals(const AffinePMM& model, const Dataset& data, const RVector& weights)
{
  return affine_residuals(model, data, weights, true);
}

Residuals eigen_residuals(const UnitaryProductPMM& model, const Dataset& data, const RVector& weights)
{
  return unitary_residuals(model, data, weights, true);
}

// ---------------------------------------------------------------------------
// Observable loss

RVector flatten(const ObservableFit& fit) { return flatten(fit.obs); }

ObservableFit unflatten(const ObservableFit& shape, const RVector& params)
{
  return {shape.host, unflatten(shape.obs, params)};
}

Residuals observable_residuals(const ObservableFit& fit, const Dataset& data)
{
  require(data.has_targets() && data.targets.cols() == 1, ErrorCode::LengthMismatch,
          "observable loss needs a single target column");
  Residuals out;
  out.r.resize(data.size());
  out.jacobian.resize(data.size(), fit.obs.O.size());
  for (Index e = 0; e < data.size(); ++e) {
    const ExpectationGradient eg = groundstate_expectation_grad(fit.host, fit.obs, data.inputs.row(e).transpose());
    out.r(e) = eg.value - data.targets(e, 0);
    out.jacobian.row(e) = eg.obs.transpose();
  }
  return out;
}

LossValue observable_mse_loss(const ObservableFit& fit, const Dataset& data, bool with_gradient)
{
  if (!with_gradient) {
    require(data.has_targets() && data.targets.cols() == 1, ErrorCode::LengthMismatch,
            "observable loss needs a single target column");
    double total = 0.0;
    for (Index e = 0; e < data.size(); ++e) {
      const double d = observable_expectation(fit.host, fit.obs, data.inputs.row(e).transpose()) - data.targets(e, 0);
      total += d * d;
    }
    return {total / double(std::max<Index>(data.size(), 1)), {}};
  }
  return from_residuals(observable_residuals(fit, data), data.size(), true);
}

// ---------------------------------------------------------------------------
// Dispatch

PreparedData prepare(const Dataset& data, const LossSpec& spec)
{
  PreparedData out;
  out.data = &data;
  if (spec.kind == LossKind::KlEmbedding) {
    require(spec.perplexity > 1.0 && spec.perplexity < double(data.size()), ErrorCode::InvalidArgument,
            "perplexity must lie in (1, dataset size)");
    out.affinities = std::make_shared<const RMatrix>(joint_probabilities(data.inputs, spec.perplexity));
  }
  return out;
}

namespace {

[[noreturn]] void unsupported(std::string_view family, const LossSpec& spec)
{
  fail(ErrorCode::InvalidArgument,
       "loss " + std::string(to_string(spec.kind)) + " is not defined for " + std::string(family) + " models");
}

}  // namespace

LossValue evaluate_loss(const AffinePMM& model, const PreparedData& data, const LossSpec& spec, bool with_gradient)
{
  if (spec.kind == LossKind::EigenMse) return eigen_mse_loss(model, *data.data, spec.level_weights, with_gradient);
  if (spec.kind == LossKind::KlEmbedding)
    return kl_embedding_loss(model, data.data->inputs, *data.affinities, with_gradient);
  unsupported("affine", spec);
}

LossValue evaluate_loss(const UnitaryProductPMM& model, const PreparedData& data, const LossSpec& spec,
                        bool with_gradient)
{
  if (spec.kind != LossKind::EigenMse) unsupported("unitary product", spec);
  return eigen_mse_loss(model, *data.data, spec.level_weights, with_gradient);
}

LossValue evaluate_loss(const ObservableFit& model, const PreparedData& data, const LossSpec& spec,
                        bool with_gradient)
{
  if (spec.kind != LossKind::ObservableMse) unsupported("observable", spec);
  return observable_mse_loss(model, *data.data, with_gradient);
}

LossValue evaluate_loss(const TensorNetworkPMM& model, const PreparedData& data, const LossSpec& spec,
                        bool with_gradient)
{
  if (spec.kind != LossKind::KlEmbedding) unsupported("tensor network", spec);
  return kl_embedding_loss(model, data.data->inputs, *data.affinities, with_gradient);
}

std::optional<Residuals> evaluate_residuals(const AffinePMM& model, const PreparedData& data, const LossSpec& spec)
{
  if (spec.kind != LossKind::EigenMse) return std::nullopt;
  return eigen_residuals(model, *data.data, spec.level_weights);
}

std::optional<Residuals> evaluate_residuals(const UnitaryProductPMM& model, const PreparedData& data,
                                            const LossSpec& spec)
{
  if (spec.kind != LossKind::EigenMse) return std::nullopt;
  return eigen_residuals(model, *data.data, spec.level_weights);
}

std::optional<Residuals> evaluate_residuals(const ObservableFit& model, const PreparedData& data,
                                            const LossSpec& spec)
{
  if (spec.kind != LossKind::ObservableMse) return std::nullopt;
  return observable_residuals(model, *data.data);
}

std::optional<Residuals> evaluate_residuals(const TensorNetworkPMM&, const PreparedData&, const LossSpec&)
{
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Initialization

namespace {

PackedParams sorted_diagonal(Index dim, Rng& rng, double scale)
{
  PackedParams d = PackedParams::zeros(dim, PackMode::RealDiagonal);
  for (Index a = 0; a < dim; ++a) d.values(a) = rng.uniform(-1.0, 1.0) * scale;
  std::sort(d.values.data(), d.values.data() + dim);
  return d;
}

PackedParams normal_slots(Index dim, PackMode mode, Rng& rng, double sd)
{
  PackedParams p = PackedParams::zeros(dim, mode);
  for (Index s = 0; s < p.size(); ++s) p.values(s) = rng.normal(0.0, sd);
  return p;
}

void fill_normal(Tensor3& t, Rng& rng, double sd)
{
  for (Index s = 0; s < t.size(); ++s) t.data()[s] = rng.normal(0.0, sd);
}

void check_scale(double scale)
{
  require(scale >= 0.0 && std::isfinite(scale), ErrorCode::InvalidArgument, "init scale must be finite and >= 0");
}

}  // namespace

AffinePMM init_affine(Index dim, Index features, PackMode coupling_mode, OutputSelector selector,
                      std::uint64_t seed, double scale)
{
  require(dim >= 1 && features >= 0, ErrorCode::InvalidArgument, "bad affine dimensions");
  check_scale(scale);
  selector.indices(dim);
  Rng rng = Rng(seed).substream("init");
  AffinePMM out;
  out.dim = dim;
  out.selector = selector;
  out.diag = sorted_diagonal(dim, rng, scale);
  const double sd = scale / std::sqrt(double(dim));
  for (Index i = 0; i < features; ++i) out.couplings.push_back(normal_slots(dim, coupling_mode, rng, sd));
  return out;
}

UnitaryProductPMM init_unitary_product(Index dim, Index factors, Index n_levels, std::uint64_t seed, double scale)
{
  require(dim >= 1 && factors >= 1 && n_levels >= 1 && n_levels <= dim, ErrorCode::InvalidArgument,
          "bad unitary product dimensions");
  check_scale(scale);
  Rng rng = Rng(seed).substream("init");
  UnitaryProductPMM out;
  out.dim = dim;
  out.n_levels = n_levels;
  const double sd = scale / std::sqrt(double(dim));
  for (Index j = 0; j < factors; ++j) out.factors.push_back(normal_slots(dim, PackMode::ComplexHermitian, rng, sd));
  return out;
}

TensorNetworkPMM init_tensor_network(Index rows, Index cols, Index dim, Index pixel_bond, Index bond,
                                     PackMode entry_mode, std::uint64_t seed, double scale)
{
  check_scale(scale);
  TensorNetworkPMM out = TensorNetworkPMM::zeros(rows, cols, dim, pixel_bond, bond, entry_mode);
  Rng rng = Rng(seed).substream("init");
  out.diag = sorted_diagonal(dim, rng, scale);
  // S_ijk sums d·D² products of three factors
  const double entry_sd = scale / (std::sqrt(double(dim)) * std::sqrt(double(rows * cols)));
  const double sd = std::cbrt(entry_sd / std::sqrt(double(pixel_bond * bond * bond)));
  fill_normal(out.P, rng, sd);
  fill_normal(out.N, rng, sd);
  fill_normal(out.Q, rng, sd);
  return out;
}

ObservableModel init_observable(Index dim, std::uint64_t seed, double scale)
{
  require(dim >= 1, ErrorCode::InvalidArgument, "bad observable dimension");
  check_scale(scale);
  Rng rng = Rng(seed).substream("init");
  return {normal_slots(dim, PackMode::ComplexHermitian, rng, scale / std::sqrt(double(dim)))};
}

}  // namespace pmm
