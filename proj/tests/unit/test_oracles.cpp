#include "support.hpp"

#include "pmm/oracles.hpp"

#include <cmath>

using namespace pmm;
using namespace pmm::test;

namespace {

double max_abs(const CMatrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("non-interacting spins: closed form")
{
  for (Index n : {1, 3, 10}) CHECK(noninteracting_spin_energy(n, 0.0) == doctest::Approx(-0.5));
  CHECK(noninteracting_spin_energy(2, 0.75) == doctest::Approx(-5.0 / 8.0).epsilon(1e-15));
  CHECK(std::abs(eigvalsh(noninteracting_spin_hamiltonian(4, 0.3))(0) - noninteracting_spin_energy(4, 0.3)) <=
        1e-12);
  for (Index n = 1; n <= 10; ++n) {
    const double c = -1.0 + 0.2 * double(n);
    CHECK(std::abs(eigvalsh(noninteracting_spin_hamiltonian(n, c))(0) + std::sqrt(1 + c * c) / 2) <= 1e-12);
  }
  const auto [h0, h1] = noninteracting_spin_components(3);
  CHECK(max_abs((h0 + 0.4 * h1).matrix() - noninteracting_spin_hamiltonian(3, 0.4).matrix()) <= 1e-15);
}

TEST_CASE("AHO Hamiltonian")
{
  const RVector free = eigvalsh(aho_hamiltonian({10, 0.0}));
  for (Index k = 0; k < 11; ++k) CHECK(free(k) == doctest::Approx(double(k)));

  // Nmax = 2: A = [[0,1,0],[1,0,√2],[0,√2,0]], A² = [[1,0,√2],[0,3,0],[√2,0,2]],
  // A⁴ = [[3,0,3√2],[0,9,0],[3√2,0,6]]
  const double r2 = std::sqrt(2.0);
  RMatrix hand(3, 3);
  hand << 3, 0, 3 * r2, 0, 1 + 9, 0, 3 * r2, 0, 2 + 6;
  const HermitianMatrix h = aho_hamiltonian({2, 1.0});
  CHECK(max_abs(h.matrix() - hand.cast<Complex>()) <= 1e-13);
  const RVector e = eigvalsh(h);
  // even block [[3, 3√2], [3√2, 8]] and the odd level 10
  const double mean = 5.5, half = std::sqrt(2.5 * 2.5 + 18.0);
  CHECK(e(0) == doctest::Approx(mean - half));
  CHECK(e(1) == doctest::Approx(10.0));
  CHECK(e(2) == doctest::Approx(mean + half));

  const RVector e100 = eigvalsh(aho_hamiltonian({100, 0.01})).head(2);
  const RVector e120 = eigvalsh(aho_hamiltonian({120, 0.01})).head(2);
  CHECK((e100 - e120).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("Heisenberg examples")
{
  SpinChainSpec s;
  s.sites = 2;
  s.B = 1.0;
  s.J1 = 0.0;
  s.J2 = 0.0;
  s.r = (RVector(2) << 1.0, 0.0).finished();
  const HermitianMatrix hb = heisenberg_hamiltonian(s, ChainVariant::Nnn);
  RVector diag(4);
  diag << 1, 1, -1, -1;
  CHECK(max_abs(hb.matrix() - CMatrix(diag.cast<Complex>().asDiagonal())) <= 1e-15);
  // ground energy −1 survives any valid Trotter step
  for (double dt : {-0.3, 0.05, 0.7}) CHECK(trotter_energies(s, ChainVariant::Nnn, dt, 1)(0) == doctest::Approx(-1.0));

  const RVector ex = eigvalsh(HermitianMatrix::from_dense(exchange_operator(2, 0, 1)));
  CHECK(ex(0) == doctest::Approx(-3.0));
  for (Index k = 1; k < 4; ++k) CHECK(ex(k) == doctest::Approx(1.0));

  CHECK(max_abs(dm_operator(3, 0, 2) + dm_operator(3, 2, 0)) == 0.0);
  CHECK(max_abs(dm_operator(3, 0, 2)) > 0.0);
}

TEST_CASE("Heisenberg Hamiltonians are exactly Hermitian and reproducible")
{
  for (ChainVariant v : {ChainVariant::Nnn, ChainVariant::Dm}) {
    const SpinChainSpec s = SpinChainSpec::with_seed(6, 11);
    const HermitianMatrix a = heisenberg_hamiltonian(s, v);
    CHECK(max_abs(a.matrix() - a.matrix().adjoint()) == 0.0);
    CHECK(a.matrix() == heisenberg_hamiltonian(SpinChainSpec::with_seed(6, 11), v).matrix());
    HermitianMatrix sum(a.dim());
    for (const auto& t : heisenberg_terms(s, v)) sum = sum + t;
    CHECK(max_abs(sum.matrix() - a.matrix()) <= 1e-12);
  }
  const SpinChainSpec s = SpinChainSpec::with_seed(8, 3);
  CHECK(s.r.minCoeff() >= 0.0);
  CHECK(s.r.maxCoeff() < 1.0);
  CHECK(s.r != SpinChainSpec::with_seed(8, 4).r);
  CHECK_THROWS_AS(SpinChainSpec::with_seed(13, 0).validate(), Error);
}

TEST_CASE("Trotter product")
{
  const SpinChainSpec s = SpinChainSpec::with_seed(4, 0);
  CHECK(max_abs(trotter_unitary(s, ChainVariant::Nnn, 0.0).matrix() - CMatrix::Identity(16, 16)) == 0.0);

  SpinChainSpec field = s;
  field.J1 = field.J2 = 0.0;
  const HermitianMatrix hb = heisenberg_terms(field, ChainVariant::Nnn)[0];
  CHECK(max_abs(trotter_unitary(field, ChainVariant::Nnn, 0.37).matrix() - expm_hermitian(hb, 0.37).matrix()) <=
        1e-14);

  for (ChainVariant v : {ChainVariant::Nnn, ChainVariant::Dm}) {
    const TrotterOracle oracle(s, v);
    CHECK(unitarity_defect(oracle.unitary(0.1).matrix()) <= 1e-12);
    const RVector exact = oracle.exact(3);
    CHECK((oracle.energies(1e-5, 3) - exact).cwiseAbs().maxCoeff() <= 1e-3);
    CHECK(oracle.energies(0.0, 3) == exact);
    const double e1 = (oracle.energies(1e-2, 3) - exact).cwiseAbs().maxCoeff();
    const double e2 = (oracle.energies(5e-3, 3) - exact).cwiseAbs().maxCoeff();
    CHECK(e2 / e1 >= 0.4);
    CHECK(e2 / e1 <= 0.6);
  }

  // The nnn chain is real, so ⟨ψ|i[A,B]|ψ⟩ vanishes on its real eigenvectors and
  // the error turns quadratic once dt is small against the level gaps. The dm
  // chain is complex and stays first order.
  auto ratio = [&](ChainVariant v) {
    const TrotterOracle oracle(s, v);
    const RVector exact = oracle.exact(3);
    const double f1 = (oracle.energies(1e-3, 3) - exact).cwiseAbs().maxCoeff();
    const double f2 = (oracle.energies(5e-4, 3) - exact).cwiseAbs().maxCoeff();
    return f2 / f1;
  };
  CHECK(std::abs(ratio(ChainVariant::Dm) - 0.5) <= 0.125);
  CHECK(std::abs(ratio(ChainVariant::Nnn) - 0.25) <= 0.0625);
}

TEST_CASE("LMG model")
{
  const RVector e0 = lmg_energies({100, 0.0}, 101);
  CHECK(e0(0) == doctest::Approx(-50.0));
  for (Index k = 0; k < 101; ++k) CHECK(e0(k) == doctest::Approx(-50.0 + double(k)));

  const LmgObservables o = lmg_observables({100, 0.0});
  CHECK(o.sz_over_n == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(o.sx2_over_n2 == doctest::Approx(1.0 / 400.0).epsilon(1e-12));

  // N = 2, S = 1, basis m = −1, 0, 1: S_z = diag(−1, 0, 1),
  // S_x² = [[1/2,0,1/2],[0,1,0],[1/2,0,1/2]], S_y² = [[1/2,0,−1/2],[0,1,0],[−1/2,0,1/2]],
  // so H = −S_z − c(S_x² − S_y²/2) = [[1 − c/4, 0, −3c/4], [0, −c/2, 0], [−3c/4, 0, −1 − c/4]].
  for (double c : {-0.7, 0.0, 0.4, 1.3}) {
    RMatrix hand(3, 3);
    hand << 1 - c / 4, 0, -3 * c / 4, 0, -c / 2, 0, -3 * c / 4, 0, -1 - c / 4;
    const RVector e = eigvalsh(lmg_hamiltonian({2, c}));
    Eigen::SelfAdjointEigenSolver<RMatrix> ref(hand);
    CHECK((e - ref.eigenvalues()).cwiseAbs().maxCoeff() <= 1e-13);
  }

  for (double c : linspace(0, 2, 9)) {
    const HermitianMatrix h = lmg_hamiltonian({20, c});
    CHECK(max_abs(h.matrix() - h.matrix().adjoint()) == 0.0);
    CHECK(lmg_observables({20, c}).sx2_over_n2 >= 0.0);
  }
  const Complex real_axis = lmg_complex_ground(20, Complex(0.3, 0.0));
  CHECK(std::abs(real_axis - lmg_energies({20, 0.3}, 1)(0)) <= 1e-10);
}

TEST_CASE("make_dataset presets")
{
  const DatasetSplits aho = make_dataset("fig2_aho");
  CHECK(aho.train.size() == 10);
  CHECK(aho.validation.size() >= 90);
  CHECK(aho.train.targets.cols() == 2);
  CHECK(aho.train.inputs.minCoeff() == doctest::Approx(-0.01));
  CHECK(aho.train.inputs.maxCoeff() == doctest::Approx(0.01));
  require_disjoint(aho.train, aho.validation);

  const DatasetSplits spin = make_dataset("fig1_spin");
  CHECK(spin.train.size() == 5);
  CHECK(spin.train.inputs.maxCoeff() < 0.0);

  const DatasetSplits lmg = make_dataset("s_lmg_energies");
  CHECK(lmg.train.size() == 10);
  CHECK(lmg.train.targets.cols() == 5);

  const DatasetSplits trot = make_dataset("fig3_trotter", 0);
  CHECK(trot.train.size() == 10);
  CHECK(trot.train.targets.cols() == 3);
  for (Index r = 0; r < trot.train.size(); ++r) {
    const double dt = std::abs(trot.train.inputs(r, 0));
    CHECK(dt >= 0.15 - 1e-12);
    CHECK(dt <= 0.18 + 1e-12);
  }
  CHECK(make_dataset("fig3_trotter", 0).train.targets == trot.train.targets);

  const DatasetSplits dm = make_dataset("s_trotter_dm", 0);
  CHECK(dm.train.inputs.col(0).cwiseAbs().minCoeff() == doctest::Approx(0.1));

  const DatasetSplits obs = lmg_observable_splits(LmgObservable::Sx2);
  CHECK(obs.train.size() == 20);
  for (Index r = 0; r < obs.train.size(); ++r) {
    const double c = obs.train.inputs(r, 0);
    CHECK((c <= 0.4 + 1e-12 || c >= 0.6 - 1e-12));
  }
  CHECK_THROWS_AS(make_dataset("nope"), Error);
}

TEST_CASE("grid helpers")
{
  CHECK(linspace(0, 1, 3) == (RVector(3) << 0, 0.5, 1).finished());
  CHECK(grid_excluding(linspace(0, 1, 5), linspace(0, 1, 3)) == (RVector(2) << 0.25, 0.75).finished());
}
