#pragma once

#include "pmm/models.hpp"

#include <functional>
#include <span>

namespace pmm {

/// Derivative with respect to a model's flattened parameters (see flatten()).
using GradientVector = RVector;

/// Selected eigenvalues of an affine model and their parameter gradients.
struct LevelGradients {
  RVector values;
  std::vector<GradientVector> grads;
};

/// Hellmann–Feynman: ∂λ_k/∂θ = v_k†(∂M/∂θ)v_k. Throws DegenerateLevelError if a
/// requested level is closer than degeneracy_threshold(‖M‖_F) to a neighbour.
LevelGradients affine_level_gradients(const AffinePMM& model, const RVector& c, std::span<const Index> levels);
std::vector<GradientVector> eigenvalue_grad(const AffinePMM& model, const RVector& c, std::span<const Index> levels);

/// Gradient of Σ_k weight_k·λ_k with respect to the coupling cotangent Σ_k w_k v_k v_k†.
/// Building block shared by the affine and tensor-network losses.
GradientVector affine_cotangent_to_params(const AffinePMM& model, const RVector& c, const CMatrix& cotangent);

struct ExpectationGradient {
  double value = 0.0;
  GradientVector host;  ///< over flatten(host)
  GradientVector obs;   ///< over flatten(obs)
};

/// ⟨ψ₀|O|ψ₀⟩ and its gradients. The host term uses first-order eigenvector
/// perturbation dψ₀ = Σ_{j≠0} ψ_j (ψ_j† dM ψ₀)/(λ₀ − λ_j).
ExpectationGradient groundstate_expectation_grad(const AffinePMM& host, const ObservableModel& obs, const RVector& c);

/// Divided-difference table f[λ_a, λ_b] for f(λ) = exp(−iλt).
CMatrix exp_divided_differences(const RVector& eigenvalues, double t);

/// Directional derivative of exp(−iMt) along `direction`.
CMatrix expm_frechet(const HermitianMatrix& m, double t, const HermitianMatrix& direction);

/// Energies E_k = −arg(μ_k)/dt of the model's unitary and their gradients.
struct PhaseGradients {
  RVector values;
  std::vector<GradientVector> grads;
};

/// dE = Re[i·e^{iE·dt}·(w† dU w)]/dt with dU chained through the ordered product.
/// Throws DegenerateLevelError when a tracked eigenphase has angular gap ≤ 1e-8.
PhaseGradients unitary_level_gradients(const UnitaryProductPMM& model, double dt, std::span<const Index> levels);
std::vector<GradientVector> unitary_phase_grad(const UnitaryProductPMM& model, double dt,
                                               std::span<const Index> levels);

/// Loss value with its analytic gradient.
struct LossValue {
  double value = 0.0;
  GradientVector gradient;
};

using ScalarFunction = std::function<double(const RVector&)>;
using LossFunction = std::function<LossValue(const RVector&)>;

/// Central differences, one coordinate at a time.
RVector finite_difference_gradient(const ScalarFunction& f, const RVector& x, double h = 1e-5);

/// max_a |g_a − g_fd,a| / max(1e-12, |g_fd,a|) between the analytic gradient of
/// loss_fn at params and central differences with step h.
double fd_check(const LossFunction& loss_fn, const RVector& params, double h = 1e-5);

}  // namespace pmm
