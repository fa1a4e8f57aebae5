#include "pmm/gradients.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace pmm {

namespace {

double neighbour_gap(const RVector& spectrum, Index k)
{
  double gap = std::numeric_limits<double>::infinity();
  if (k > 0) gap = std::min(gap, spectrum(k) - spectrum(k - 1));
  if (k + 1 < spectrum.size()) gap = std::min(gap, spectrum(k + 1) - spectrum(k));
  return gap;
}

void check_levels(std::span<const Index> levels, Index dim)
{
  for (Index k : levels)
    require(k >= 0 && k < dim, ErrorCode::InvalidArgument, "requested level outside the spectrum");
}

}  // namespace

GradientVector affine_cotangent_to_params(const AffinePMM& model, const RVector& c, const CMatrix& cotangent)
{
  GradientVector g(model.num_params());
  Index pos = 0;
  g.segment(pos, model.diag.size()) = slot_contraction(cotangent, model.dim, model.diag.mode);
  pos += model.diag.size();
  for (std::size_t i = 0; i < model.couplings.size(); ++i) {
    const auto& m = model.couplings[i];
    const double ci = c(static_cast<Index>(i));
    if (ci == 0.0) {
      g.segment(pos, m.size()).setZero();
    } else {
      g.segment(pos, m.size()) = ci * slot_contraction(cotangent, model.dim, m.mode);
    }
    pos += m.size();
  }
  return g;
}

LevelGradients affine_level_gradients(const AffinePMM& model, const RVector& c, std::span<const Index> levels)
{
  const HermitianMatrix m = affine_eval(model, c);
  check_levels(levels, m.dim());
  const EigenDecomposition eig = eigh(m);
  const double threshold = degeneracy_threshold(m.norm());

  LevelGradients out;
  out.values.resize(static_cast<Index>(levels.size()));
  out.grads.reserve(levels.size());
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const Index k = levels[i];
    const double gap = neighbour_gap(eig.eigenvalues, k);
    if (gap < threshold) throw DegenerateLevelError(k, gap, threshold);
    const CVector v = eig.eigenvectors.col(k);
    out.values(static_cast<Index>(i)) = eig.eigenvalues(k);
    out.grads.push_back(affine_cotangent_to_params(model, c, v * v.adjoint()));
  }
  return out;
}

std::vector<GradientVector> eigenvalue_grad(const AffinePMM& model, const RVector& c, std::span<const Index> levels)
{
  return affine_level_gradients(model, c, levels).grads;
}

ExpectationGradient groundstate_expectation_grad(const AffinePMM& host, const ObservableModel& obs, const RVector& c)
{
  require(obs.O.dim == host.dim, ErrorCode::DimensionMismatch, "observable and host dimensions differ");
  const HermitianMatrix m = affine_eval(host, c);
  const EigenDecomposition eig = eigh(m);
  const Index n = m.dim();
  const double threshold = degeneracy_threshold(m.norm());
  const double gap = n > 1 ? eig.eigenvalues(1) - eig.eigenvalues(0) : std::numeric_limits<double>::infinity();
  if (gap < threshold) throw DegenerateLevelError(0, gap, threshold);

  const CMatrix o = unpack(obs.O).matrix();
  const CVector v0 = eig.eigenvectors.col(0);
  const CVector ov0 = o * v0;

  ExpectationGradient out;
  out.value = v0.dot(ov0).real();
  out.obs = slot_contraction(CMatrix(v0 * v0.adjoint()), n, obs.O.mode);

  // d⟨O⟩ = 2 Re Σ_j (v0†O v_j)(v_j† dM v0)/(λ0 − λj) = Re tr(G dM),
  // G = 2 Σ_j [(v0†O v_j)/(λ0 − λj)] v0 v_j†.
  CVector weights = CVector::Zero(n);
  for (Index j = 1; j < n; ++j) {
    const Complex amp = eig.eigenvectors.col(j).dot(ov0);  // v_j† O v0
    weights(j) = 2.0 * std::conj(amp) / (eig.eigenvalues(0) - eig.eigenvalues(j));
  }
  const CMatrix cotangent = v0 * (eig.eigenvectors * weights.conjugate()).adjoint();
  out.host = affine_cotangent_to_params(host, c, cotangent);
  return out;
}

CMatrix exp_divided_differences(const RVector& lambda, double t)
{
  const Index n = lambda.size();
  CMatrix f(n, n);
  for (Index a = 0; a < n; ++a) {
    for (Index b = 0; b < n; ++b) {
      const double diff = lambda(a) - lambda(b);
      const Complex mid = std::polar(1.0, -0.5 * (lambda(a) + lambda(b)) * t);
      if (std::abs(diff) < 1e-10) {
        // f'(λ_a) = −it·e^{−iλ_a t}
        f(a, b) = Complex(0.0, -t) * std::polar(1.0, -lambda(a) * t);
      } else {
        // (e^{−iλ_a t} − e^{−iλ_b t})/(λ_a − λ_b) written without cancellation
        const double x = 0.5 * diff * t;
        const double sinc = std::abs(x) < 1e-8 ? 1.0 - x * x / 6.0 : std::sin(x) / x;
        f(a, b) = Complex(0.0, -t) * mid * sinc;
      }
    }
  }
  return f;
}

CMatrix expm_frechet(const HermitianMatrix& m, double t, const HermitianMatrix& direction)
{
  require(m.dim() == direction.dim(), ErrorCode::DimensionMismatch, "Frechet direction dimension mismatch");
  const EigenDecomposition eig = eigh(m);
  const CMatrix& v = eig.eigenvectors;
  const CMatrix projected = v.adjoint() * direction.matrix() * v;
  const CMatrix f = exp_divided_differences(eig.eigenvalues, t);
  return v * f.cwiseProduct(projected) * v.adjoint();
}

PhaseGradients unitary_level_gradients(const UnitaryProductPMM& model, double dt, std::span<const Index> levels)
{
  require(dt != 0.0, ErrorCode::InvalidArgument, "phase gradients need dt != 0");
  const Index n = model.dim;
  const std::size_t num_factors = model.factors.size();
  require(num_factors >= 1, ErrorCode::InvalidArgument, "unitary product needs at least one factor");
  check_levels(levels, n);

  std::vector<EigenDecomposition> eigs;
  std::vector<CMatrix> factors;
  eigs.reserve(num_factors);
  factors.reserve(num_factors);
  for (const auto& f : model.factors) {
    eigs.push_back(eigh(unpack(f)));
    factors.push_back(expm_hermitian(eigs.back(), dt).matrix());
  }
  // prefix[j] = U_1···U_j (prefix[0] = I); suffix[j] = U_{j+1}···U_L (suffix[L] = I)
  std::vector<CMatrix> prefix(num_factors + 1), suffix(num_factors + 1);
  prefix[0] = CMatrix::Identity(n, n);
  for (std::size_t j = 0; j < num_factors; ++j) prefix[j + 1] = prefix[j] * factors[j];
  suffix[num_factors] = CMatrix::Identity(n, n);
  for (std::size_t j = num_factors; j-- > 0;) suffix[j] = factors[j] * suffix[j + 1];

  const EigenphaseDecomposition phases = eigenphase_decomposition(UnitaryMatrix::from_dense(prefix[num_factors]), dt);

  std::vector<CMatrix> divided;
  divided.reserve(num_factors);
  for (const auto& e : eigs) divided.push_back(exp_divided_differences(e.eigenvalues, dt));

  PhaseGradients out;
  out.values.resize(static_cast<Index>(levels.size()));
  for (std::size_t li = 0; li < levels.size(); ++li) {
    const Index k = levels[li];
    double angular_gap = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < n; ++j) {
      if (j == k) continue;
      angular_gap = std::min(angular_gap, std::abs(std::arg(phases.phases(k) * std::conj(phases.phases(j)))));
    }
    if (angular_gap <= 1e-8) throw DegenerateLevelError(k, angular_gap, 1e-8);

    const CVector w = phases.vectors.col(k);
    const Complex scale = Complex(0.0, 1.0) * std::conj(phases.phases(k)) / dt;
    out.values(static_cast<Index>(li)) = phases.energies(k);

    GradientVector g(model.num_params());
    Index pos = 0;
    for (std::size_t j = 0; j < num_factors; ++j) {
      const CMatrix& v = eigs[j].eigenvectors;
      // w† dU w = a† dU_j b with a = L_j† w, b = R_j w
      const CVector a_t = v.adjoint() * (prefix[j].adjoint() * w);
      const CVector b_t = v.adjoint() * (suffix[j + 1] * w);
      // X_ab = conj(ã_a)·F_ab·b̃_b;  a†dU_j b = tr(G·E) with G = V·Xᵀ·V†
      const CMatrix x = a_t.conjugate().asDiagonal() * divided[j] * b_t.asDiagonal();
      const CMatrix gmat = scale * (v * x.transpose() * v.adjoint());
      const auto& fp = model.factors[j];
      g.segment(pos, fp.size()) = slot_contraction(gmat, n, fp.mode);
      pos += fp.size();
    }
    out.grads.push_back(std::move(g));
  }
  return out;
}

std::vector<GradientVector> unitary_phase_grad(const UnitaryProductPMM& model, double dt,
                                               std::span<const Index> levels)
{
  return unitary_level_gradients(model, dt, levels).grads;
}

RVector finite_difference_gradient(const ScalarFunction& f, const RVector& x, double h)
{
  RVector g(x.size());
  RVector probe = x;
  for (Index a = 0; a < x.size(); ++a) {
    probe(a) = x(a) + h;
    const double up = f(probe);
    probe(a) = x(a) - h;
    const double down = f(probe);
    probe(a) = x(a);
    g(a) = (up - down) / (2.0 * h);
  }
  return g;
}

double fd_check(const LossFunction& loss_fn, const RVector& params, double h)
{
  const GradientVector analytic = loss_fn(params).gradient;
  const RVector numeric = finite_difference_gradient([&](const RVector& p) { return loss_fn(p).value; }, params, h);
  require(analytic.size() == numeric.size(), ErrorCode::LengthMismatch, "gradient length mismatch");
  double worst = 0.0;
  for (Index a = 0; a < numeric.size(); ++a) {
    worst = std::max(worst, std::abs(analytic(a) - numeric(a)) / std::max(1e-12, std::abs(numeric(a))));
  }
  return worst;
}

}  // namespace pmm
