#pragma once

#include "pmm/embedding.hpp"
#include "pmm/gradients.hpp"
#include "pmm/random.hpp"

#include <cmath>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace pmm {

enum class Split { Train, Validation, Test };
std::string_view to_string(Split split);

/// Examples as rows. Targets are optional (unsupervised); labels are carried for
/// evaluation only and never reach a loss.
struct Dataset {
  RMatrix inputs;
  RMatrix targets;  ///< rows × width, or 0 columns
  std::vector<int> labels;
  Split split = Split::Train;
  std::vector<std::string> feature_names;
  std::vector<std::string> target_names;

  Index size() const { return inputs.rows(); }
  Index num_features() const { return inputs.cols(); }
  bool has_targets() const { return targets.cols() > 0; }
  Dataset subset(const std::vector<Index>& rows) const;
  /// Throws if rows/columns/labels/names are inconsistent.
  void validate() const;
};

/// Throws InvalidArgument if any input row appears in both sets.
void require_disjoint(const Dataset& a, const Dataset& b);

enum class LossKind { EigenMse, ObservableMse, KlEmbedding };
std::string_view to_string(LossKind kind);
LossKind loss_kind_from_string(std::string_view name);

struct LossSpec {
  LossKind kind = LossKind::EigenMse;
  RVector level_weights;     ///< eigen_mse; empty means all ones
  double perplexity = 30.0;  ///< kl_embedding

  static LossSpec eigen_mse(Index levels) { return {LossKind::EigenMse, RVector::Ones(levels), 30.0}; }
  static LossSpec observable_mse() { return {LossKind::ObservableMse, {}, 30.0}; }
  static LossSpec kl_embedding(double perplexity = 30.0) { return {LossKind::KlEmbedding, {}, perplexity}; }
};

struct OptimizerConfig {
  double step_size = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int max_epochs = 1000;
  Index batch_size = 500;  ///< kl_embedding only; physics losses use the full set
  int patience = 100;
  std::uint64_t seed = 0;
  /// Levenberg–Marquardt iterations run from the best Adam snapshot (least-squares losses only).
  int refine_iterations = 0;

  void validate() const;
};

struct HistoryRow {
  int epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
  std::string phase;  ///< "init", "adam" or "refine"
};

struct TrainState {
  RVector params;
  RVector first_moment;
  RVector second_moment;
  int epoch = 0;
  long step = 0;
  double best_validation = 0.0;
  RVector best_params;
  std::vector<HistoryRow> history;
};

// ---------------------------------------------------------------------------
// Losses

/// Frozen host with a trainable observable.
struct ObservableFit {
  AffinePMM host;
  ObservableModel obs;
};

/// Residual vector r (loss = ‖r‖²/examples) and its Jacobian over flattened params.
struct Residuals {
  RVector r;
  RMatrix jacobian;
};

/// Mean over examples of Σ_k w_k (output_k − target_k)².
LossValue eigen_mse_loss(const AffinePMM& model, const Dataset& data, const RVector& weights,
                         bool with_gradient = true);
/// Inputs: one column dt; outputs: lowest n_levels eigenphase energies.
LossValue eigen_mse_loss(const UnitaryProductPMM& model, const Dataset& data, const RVector& weights,
                         bool with_gradient = true);
Residuals eigen_residuals(const AffinePMM& model, const Dataset& data, const RVector& weights);
Residuals eigen_residuals(const UnitaryProductPMM& model, const Dataset& data, const RVector& weights);

/// Mean squared error of ⟨ψ₀|O|ψ₀⟩ against a single target column; host frozen.
LossValue observable_mse_loss(const ObservableFit& fit, const Dataset& data, bool with_gradient = true);
Residuals observable_residuals(const ObservableFit& fit, const Dataset& data);

RVector flatten(const ObservableFit& fit);
ObservableFit unflatten(const ObservableFit& shape, const RVector& params);

/// A dataset ready for repeated loss evaluation (KL batches carry their P matrix).
struct PreparedData {
  const Dataset* data = nullptr;
  std::shared_ptr<const RMatrix> affinities;
};
PreparedData prepare(const Dataset& data, const LossSpec& spec);

LossValue evaluate_loss(const AffinePMM& model, const PreparedData& data, const LossSpec& spec, bool with_gradient);
LossValue evaluate_loss(const UnitaryProductPMM& model, const PreparedData& data, const LossSpec& spec,
                        bool with_gradient);
LossValue evaluate_loss(const ObservableFit& model, const PreparedData& data, const LossSpec& spec,
                        bool with_gradient);
LossValue evaluate_loss(const TensorNetworkPMM& model, const PreparedData& data, const LossSpec& spec,
                        bool with_gradient);

std::optional<Residuals> evaluate_residuals(const AffinePMM& model, const PreparedData& data, const LossSpec& spec);
std::optional<Residuals> evaluate_residuals(const UnitaryProductPMM& model, const PreparedData& data,
                                            const LossSpec& spec);
std::optional<Residuals> evaluate_residuals(const ObservableFit& model, const PreparedData& data,
                                            const LossSpec& spec);
std::optional<Residuals> evaluate_residuals(const TensorNetworkPMM& model, const PreparedData& data,
                                            const LossSpec& spec);

// ---------------------------------------------------------------------------
// Initialization

/// D: sorted uniform(−1, 1)·scale; coupling slots: normal(0, scale/√n).
AffinePMM init_affine(Index dim, Index features, PackMode coupling_mode, OutputSelector selector,
                      std::uint64_t seed, double scale = 0.1);
/// Every factor slot: normal(0, scale/√n).
UnitaryProductPMM init_unitary_product(Index dim, Index factors, Index n_levels, std::uint64_t seed,
                                       double scale = 0.1);
/// D as for init_affine; P, N, Q normal with a common width chosen so each
/// expanded entry S_ijk has standard deviation ≈ scale/(√n·√(p·q)).
TensorNetworkPMM init_tensor_network(Index rows, Index cols, Index dim, Index pixel_bond, Index bond,
                                     PackMode entry_mode, std::uint64_t seed, double scale = 0.1);
/// O slots: normal(0, scale/√n).
ObservableModel init_observable(Index dim, std::uint64_t seed, double scale = 0.1);

// ---------------------------------------------------------------------------
// Training loop

template <typename Model>
struct TrainResult {
  Model model;
  TrainState state;
};

namespace detail {

struct AdamStep {
  const OptimizerConfig& opt;
  void operator()(TrainState& s, const RVector& grad) const
  {
    ++s.step;
    s.first_moment = opt.beta1 * s.first_moment + (1.0 - opt.beta1) * grad;
    s.second_moment = opt.beta2 * s.second_moment + (1.0 - opt.beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(opt.beta1, double(s.step));
    const double c2 = 1.0 - std::pow(opt.beta2, double(s.step));
    s.params.array() -=
        opt.step_size * (s.first_moment.array() / c1) / ((s.second_moment.array() / c2).sqrt() + opt.epsilon);
  }
};

[[noreturn]] void abort_non_finite(const char* what, int epoch, double step_size);

/// Levenberg–Marquardt on ‖r(θ)‖². Calls `accept(θ, cost)` after every accepted step.
template <typename ResidualFn, typename AcceptFn>
void levenberg_marquardt(RVector params, int iterations, ResidualFn&& residuals, AcceptFn&& accept)
{
  Residuals cur = residuals(params);
  double cost = cur.r.squaredNorm();
  double mu = 1e-3;
  for (int it = 0; it < iterations && cost > 0.0; ++it) {
    const RMatrix a = cur.jacobian.transpose() * cur.jacobian;
    const RVector g = cur.jacobian.transpose() * cur.r;
    const double floor = std::max(1e-12 * a.diagonal().maxCoeff(), 1e-300);
    RMatrix damped = a;
    damped.diagonal().array() += mu * (a.diagonal().array() + floor);
    const RVector delta = damped.ldlt().solve(-g);
    if (!delta.allFinite()) break;
    const RVector trial = params + delta;
    Residuals next = residuals(trial);
    const double trial_cost = next.r.squaredNorm();
    if (std::isfinite(trial_cost) && trial_cost < cost) {
      params = trial;
      cur = std::move(next);
      cost = trial_cost;
      mu = std::max(mu / 3.0, 1e-15);
      accept(params, cost);
      if (delta.norm() <= 1e-15 * (params.norm() + 1e-15)) break;
    } else {
      mu *= 3.0;
      if (mu > 1e16) break;
    }
  }
}

}  // namespace detail

/// Adam on the flattened parameters with best-validation snapshotting and
/// patience-based early stopping, optionally followed by Levenberg–Marquardt
/// refinement. Returns the best-validation model; its validation loss never
/// exceeds the initial model's.
template <typename Model>
TrainResult<Model> train(const Model& initial, const Dataset& train_set, const Dataset& val_set,
                         const LossSpec& spec, const OptimizerConfig& opt)
{
  opt.validate();
  train_set.validate();
  val_set.validate();
  require_disjoint(train_set, val_set);

  TrainState s;
  s.params = flatten(initial);
  s.first_moment = RVector::Zero(s.params.size());
  s.second_moment = RVector::Zero(s.params.size());

  const PreparedData val = prepare(val_set, spec);
  const bool minibatch = spec.kind == LossKind::KlEmbedding && opt.batch_size < train_set.size();
  std::optional<PreparedData> full_train;
  if (!minibatch) full_train = prepare(train_set, spec);

  auto model_at = [&](const RVector& p) { return unflatten(initial, p); };
  auto val_loss = [&](const RVector& p) { return evaluate_loss(model_at(p), val, spec, false).value; };

  s.best_validation = val_loss(s.params);
  s.best_params = s.params;
  const double init_train =
      full_train ? evaluate_loss(initial, *full_train, spec, false).value : std::nan("");
  s.history.push_back({0, init_train, s.best_validation, "init"});

  Rng batch_rng = Rng(opt.seed).substream("batch");
  const detail::AdamStep adam{opt};
  int stall = 0;
  for (int epoch = 1; epoch <= opt.max_epochs; ++epoch) {
    s.epoch = epoch;
    double train_loss = 0.0;
    if (minibatch) {
      std::vector<Index> order = sample_without_replacement(train_set.size(), train_set.size(), batch_rng);
      Index batches = 0;
      for (Index start = 0; start + opt.batch_size <= train_set.size(); start += opt.batch_size, ++batches) {
        std::vector<Index> rows(order.begin() + start, order.begin() + start + opt.batch_size);
        const Dataset batch = train_set.subset(rows);
        const LossValue lv = evaluate_loss(model_at(s.params), prepare(batch, spec), spec, true);
        if (!std::isfinite(lv.value) || !lv.gradient.allFinite())
          detail::abort_non_finite("training loss", epoch, opt.step_size);
        train_loss += lv.value;
        adam(s, lv.gradient);
      }
      train_loss /= double(std::max<Index>(batches, 1));
    } else {
      const LossValue lv = evaluate_loss(model_at(s.params), *full_train, spec, true);
      if (!std::isfinite(lv.value) || !lv.gradient.allFinite())
        detail::abort_non_finite("training loss", epoch, opt.step_size);
      train_loss = lv.value;
      adam(s, lv.gradient);
    }
    const double v = val_loss(s.params);
    if (!std::isfinite(v)) detail::abort_non_finite("validation loss", epoch, opt.step_size);
    s.history.push_back({epoch, train_loss, v, "adam"});
    if (v < s.best_validation) {
      s.best_validation = v;
      s.best_params = s.params;
      stall = 0;
    } else if (++stall >= opt.patience) {
      break;
    }
  }

  if (opt.refine_iterations > 0 && full_train && evaluate_residuals(initial, *full_train, spec)) {
    int refine_step = 0;
    const double examples = double(std::max<Index>(train_set.size(), 1));
    detail::levenberg_marquardt(
        s.best_params, opt.refine_iterations,
        [&](const RVector& p) { return *evaluate_residuals(model_at(p), *full_train, spec); },
        [&](const RVector& p, double cost) {
          const double v = val_loss(p);
          s.history.push_back({s.epoch + (++refine_step), cost / examples, v, "refine"});
          if (std::isfinite(v) && v <= s.best_validation) {
            s.best_validation = v;
            s.best_params = p;
          }
        });
  }

  s.params = s.best_params;
  return {model_at(s.best_params), std::move(s)};
}

}  // namespace pmm
