#include "support.hpp"

#include "pmm/gradients.hpp"
#include "pmm/training.hpp"

#include <cmath>

using namespace pmm;
using namespace pmm::test;

namespace {

/// Largest slot error relative to the largest finite-difference slot.
double max_rel_dev(const RVector& analytic, const RVector& numeric)
{
  return (analytic - numeric).cwiseAbs().maxCoeff() / std::max(1e-300, numeric.cwiseAbs().maxCoeff());
}

}  // namespace

TEST_CASE("fd_check on a quadratic")
{
  const LossFunction quad = [](const RVector& x) { return LossValue{x.squaredNorm(), 2.0 * x}; };
  CHECK(fd_check(quad, (RVector(2) << 1, 2).finished()) < 1e-9);
}

TEST_CASE("eigenvalue_grad examples")
{
  AffinePMM d;
  d.dim = 2;
  d.diag = PackedParams{2, PackMode::RealDiagonal, (RVector(2) << 1, 2).finished()};
  d.couplings = {PackedParams::zeros(2, PackMode::RealSymmetric)};
  const std::vector<Index> lvl0{0};
  const auto g = eigenvalue_grad(d, RVector::Constant(1, 0.0), lvl0);
  CHECK(g[0](0) == doctest::Approx(1.0));
  CHECK(g[0](1) == doctest::Approx(0.0));

  // (σᶻ + cσˣ)/2: λ₁ = √(1+c²)/2, dλ₁/dc = c/(2√(1+c²)); the σˣ slot carries c·(slot value)
  AffinePMM s;
  s.dim = 2;
  s.diag = PackedParams{2, PackMode::RealDiagonal, (RVector(2) << 0.5, -0.5).finished()};
  s.couplings = {PackedParams{2, PackMode::RealSymmetric, (RVector(3) << 0, 0.5, 0).finished()}};
  const double c = 0.75;
  const std::vector<Index> lvl1{1};
  const auto gs = eigenvalue_grad(s, RVector::Constant(1, c), lvl1);
  // d/d(slot) at slot = 1/2 gives c·dλ/d(coupling strength); chain back to dλ/dc via slot·d/dslot / c.
  const double dlambda_dc = gs[0](2 + 1) * 0.5 / c;
  CHECK(dlambda_dc == doctest::Approx(c / (2.0 * std::sqrt(1.0 + c * c))).epsilon(1e-12));
}

TEST_CASE("eigenvalue_grad matches finite differences on random 6x6 models")
{
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    for (PackMode mode : {PackMode::ComplexHermitian, PackMode::RealSymmetric}) {
      const AffinePMM m = init_affine(6, 2, mode, OutputSelector::lowest(6), seed, 1.0);
      const RVector c = random_vector(2, rng);
      for (Index level = 0; level < 6; ++level) {
        const std::vector<Index> lv{level};
        const RVector g = eigenvalue_grad(m, c, lv)[0];
        const RVector fd = finite_difference_gradient(
            [&](const RVector& p) { return affine_outputs(unflatten(m, p), c)(level); }, flatten(m), 1e-5);
        CHECK(max_rel_dev(g, fd) < 1e-6);
      }
    }
  }
}

TEST_CASE("trace identity: Σλ_k has unit gradient on every diagonal slot")
{
  const AffinePMM m = init_affine(5, 1, PackMode::ComplexHermitian, OutputSelector::lowest(5), 3, 1.0);
  const std::vector<Index> all{0, 1, 2, 3, 4};
  const auto g = eigenvalue_grad(m, RVector::Constant(1, 0.3), all);
  for (Index a = 0; a < 5; ++a) {
    double sum = 0.0;
    for (const auto& gk : g) sum += gk(a);
    CHECK(std::abs(sum - 1.0) <= 1e-10);
  }
}

TEST_CASE("eigenvalue_grad reports degeneracy")
{
  AffinePMM d;
  d.dim = 2;
  d.diag = PackedParams{2, PackMode::RealDiagonal, RVector::Ones(2)};
  d.couplings = {PackedParams::zeros(2, PackMode::RealSymmetric)};
  const std::vector<Index> lv{0};
  CHECK_THROWS_AS(eigenvalue_grad(d, RVector::Zero(1), lv), DegenerateLevelError);
}

TEST_CASE("groundstate_expectation_grad")
{
  SUBCASE("identity observable has zero host gradient")
  {
    const AffinePMM host = init_affine(5, 1, PackMode::RealSymmetric, OutputSelector::lowest(1), 4, 1.0);
    const ObservableModel id{pack(HermitianMatrix::identity(5), PackMode::ComplexHermitian)};
    const auto g = groundstate_expectation_grad(host, id, RVector::Constant(1, 0.2));
    CHECK(g.value == doctest::Approx(1.0));
    CHECK(g.host.cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("diagonal host: diagonal slots move eigenvalues only")
  {
    AffinePMM host;
    host.dim = 4;
    host.diag = PackedParams{4, PackMode::RealDiagonal, RVector::LinSpaced(4, 0, 3)};
    host.couplings = {PackedParams::zeros(4, PackMode::RealSymmetric)};
    Rng rng(2);
    const ObservableModel o{random_packed(4, PackMode::ComplexHermitian, rng)};
    const auto g = groundstate_expectation_grad(host, o, RVector::Zero(1));
    CHECK(g.host.head(4).cwiseAbs().maxCoeff() <= 1e-14);
  }
  SUBCASE("random 5x5 instances agree with finite differences")
  {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(100 + seed);
      const AffinePMM host = init_affine(5, 1, PackMode::ComplexHermitian, OutputSelector::lowest(1), seed, 1.0);
      const ObservableModel o{random_packed(5, PackMode::ComplexHermitian, rng)};
      const RVector c = RVector::Constant(1, rng.uniform(-1, 1));
      const auto g = groundstate_expectation_grad(host, o, c);
      const RVector fd_host = finite_difference_gradient(
          [&](const RVector& p) { return observable_expectation(unflatten(host, p), o, c); }, flatten(host), 1e-5);
      const RVector fd_obs = finite_difference_gradient(
          [&](const RVector& p) { return observable_expectation(host, unflatten(o, p), c); }, flatten(o), 1e-5);
      CHECK(max_rel_dev(g.host, fd_host) < 1e-5);
      CHECK(max_rel_dev(g.obs, fd_obs) < 1e-5);
    }
  }
}

TEST_CASE("expm_frechet")
{
  Rng rng(12);
  const HermitianMatrix m = random_hermitian(4, rng), p = random_hermitian(4, rng);
  CHECK(expm_frechet(m, 0.0, p).cwiseAbs().maxCoeff() == 0.0);

  const RVector lam = (RVector(3) << -1.0, 0.5, 2.0).finished();
  const RVector dir = (RVector(3) << 0.3, -1.0, 0.7).finished();
  const double t = 0.8;
  const CMatrix commuting = expm_frechet(HermitianMatrix::diagonal(lam), t, HermitianMatrix::diagonal(dir));
  for (Index a = 0; a < 3; ++a)
    CHECK(std::abs(commuting(a, a) - Complex(0, -t) * std::exp(Complex(0, -lam(a) * t)) * dir(a)) < 1e-14);

  for (int trial = 0; trial < 20; ++trial) {
    const HermitianMatrix a = random_hermitian(4, rng), d = random_hermitian(4, rng);
    const double tt = rng.uniform(-1.5, 1.5), h = 1e-6;
    const CMatrix fd = (expm_hermitian(a + h * d, tt).matrix() - expm_hermitian(a - h * d, tt).matrix()) / (2 * h);
    CHECK((expm_frechet(a, tt, d) - fd).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("unitary_phase_grad examples")
{
  UnitaryProductPMM z;
  z.dim = 2;
  z.n_levels = 2;
  z.factors = {pack(herm(pauli_z()), PackMode::ComplexHermitian)};
  const std::vector<Index> top{1};
  const RVector g = unitary_phase_grad(z, 0.1, top)[0];
  CHECK(g(0) == doctest::Approx(1.0).epsilon(1e-10));  // E = +1 lives on the first diagonal slot
  CHECK(g(1) == doctest::Approx(0.0));
  const RVector gm = unitary_phase_grad(z, -0.1, top)[0];
  CHECK((g - gm).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("unitary_phase_grad matches finite differences (L = 3, 4x4)")
{
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const UnitaryProductPMM m = init_unitary_product(4, 3, 4, seed, 1.0);
    const double dt = 0.3;
    for (Index level = 0; level < 4; ++level) {
      const std::vector<Index> lv{level};
      const RVector g = unitary_phase_grad(m, dt, lv)[0];
      const RVector fd = finite_difference_gradient(
          [&](const RVector& p) { return unitary_product_energies(unflatten(m, p), dt)(level); }, flatten(m), 1e-5);
      CHECK(max_rel_dev(g, fd) < 1e-5);
    }
  }
}

TEST_CASE("unitary_phase_grad at small dt approaches the summed-generator gradient")
{
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const UnitaryProductPMM m = init_unitary_product(4, 3, 4, seed, 1.0);
    const std::vector<Index> lv{0};
    const RVector g = unitary_phase_grad(m, 1e-4, lv)[0];
    // Each factor enters the sum with unit weight, so the limit gradient is the
    // Hellmann–Feynman gradient of the summed matrix repeated per factor.
    AffinePMM sum;
    sum.dim = 4;
    sum.diag = PackedParams::zeros(4, PackMode::RealDiagonal);
    sum.couplings = {pack(unitary_product_generator(m), PackMode::ComplexHermitian)};
    const RVector hf = eigenvalue_grad(sum, RVector::Ones(1), lv)[0].tail(16);
    for (std::size_t f = 0; f < m.factors.size(); ++f) {
      const RVector part = g.segment(Index(f) * 16, 16);
      CHECK((part - hf).norm() <= 1e-3 * hf.norm());
    }
  }
}

TEST_CASE("eigen_mse_loss gradients pass fd_check for every family")
{
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    Dataset d;
    d.inputs = RMatrix(6, 2);
    d.targets = RMatrix(6, 2);
    for (Index r = 0; r < 6; ++r) {
      d.inputs.row(r) = random_vector(2, rng).transpose();
      d.targets(r, 0) = rng.normal();
      d.targets(r, 1) = d.targets(r, 0) + rng.uniform();
    }
    const RVector w = RVector::Ones(2);
    const AffinePMM a = init_affine(4, 2, PackMode::ComplexHermitian, OutputSelector::lowest(2), seed, 1.0);
    CHECK(fd_check([&](const RVector& p) { return eigen_mse_loss(unflatten(a, p), d, w); }, flatten(a)) < 1e-6);

    Dataset t;
    t.inputs = RMatrix(4, 1);
    t.inputs << -0.3, -0.2, 0.2, 0.3;
    t.targets = d.targets.topRows(4);
    const UnitaryProductPMM u = init_unitary_product(4, 3, 2, seed, 1.0);
    CHECK(fd_check([&](const RVector& p) { return eigen_mse_loss(unflatten(u, p), t, w); }, flatten(u)) < 1e-6);

    Dataset o;
    o.inputs = d.inputs.leftCols(1);
    o.targets = d.targets.leftCols(1);
    const ObservableFit fit{init_affine(4, 1, PackMode::RealSymmetric, OutputSelector::lowest(1), seed, 1.0),
                            init_observable(4, seed, 1.0)};
    CHECK(fd_check([&](const RVector& p) { return observable_mse_loss(unflatten(fit, p), o); }, flatten(fit)) < 1e-6);
  }
}
