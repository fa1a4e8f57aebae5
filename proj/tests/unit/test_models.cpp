#include "support.hpp"

#include "pmm/io.hpp"
#include "pmm/training.hpp"

#include <cmath>

using namespace pmm;
using namespace pmm::test;

namespace {

AffinePMM spin_model()
{
  AffinePMM m;
  m.dim = 2;
  m.diag = PackedParams{2, PackMode::RealDiagonal, (RVector(2) << 0.5, -0.5).finished()};
  m.couplings = {PackedParams{2, PackMode::RealSymmetric, (RVector(3) << 0, 0.5, 0).finished()}};
  m.selector = OutputSelector::lowest(2);
  return m;
}

UnitaryProductPMM single_factor(const CMatrix& m, Index levels)
{
  UnitaryProductPMM u;
  u.dim = m.rows();
  u.n_levels = levels;
  u.factors = {pack(herm(m), PackMode::ComplexHermitian)};
  return u;
}

}  // namespace

TEST_CASE("affine_eval examples")
{
  const AffinePMM m = spin_model();
  CHECK(affine_eval(m, RVector::Zero(1)).matrix() == unpack(m.diag).matrix());
  const CMatrix expect = 0.5 * (pauli_z() + 0.75 * pauli_x());
  CHECK((affine_eval(m, RVector::Constant(1, 0.75)).matrix() - expect).norm() < 1e-15);
  CHECK_THROWS_AS(affine_eval(m, RVector::Zero(2)), Error);
}

TEST_CASE("affine_outputs selectors")
{
  const RVector e = affine_outputs(spin_model(), RVector::Constant(1, 0.75));
  CHECK(e(0) == doctest::Approx(-5.0 / 8.0).epsilon(1e-14));
  CHECK(e(1) == doctest::Approx(5.0 / 8.0).epsilon(1e-14));

  AffinePMM eight;
  eight.dim = 8;
  eight.diag = PackedParams{8, PackMode::RealDiagonal, RVector::LinSpaced(8, 1, 8)};
  eight.selector = OutputSelector::interior_pair();
  const RVector mid = affine_outputs(eight, RVector());
  CHECK(mid == (RVector(2) << 4, 5).finished());
  CHECK(OutputSelector::interior_pair().indices(5) == std::vector<Index>{2, 3});

  AffinePMM too_many = spin_model();
  too_many.selector = OutputSelector::lowest(3);
  CHECK_THROWS_AS(affine_outputs(too_many, RVector::Zero(1)), Error);
}

TEST_CASE("affine outputs are ascending and scale linearly")
{
  Rng rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const AffinePMM m = init_affine(6, 3, PackMode::ComplexHermitian, OutputSelector::lowest(6), trial, 1.0);
    const RVector c = random_vector(3, rng);
    const RVector e = affine_outputs(m, c);
    for (Index k = 1; k < e.size(); ++k) CHECK(e(k - 1) <= e(k));
    const double s = rng.uniform(0.2, 3.0);
    const AffinePMM scaled = rescale(m, RVector::Ones(3), s);
    CHECK((affine_outputs(scaled, c) - s * e).cwiseAbs().maxCoeff() <= 1e-12 * e.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("rescale folds input and output scaling into the model")
{
  const AffinePMM m = init_affine(4, 2, PackMode::RealSymmetric, OutputSelector::lowest(2), 3, 1.0);
  const RVector in_scale = (RVector(2) << 2.0, 0.5).finished();
  const AffinePMM r = rescale(m, in_scale, 10.0);
  const RVector c = (RVector(2) << 0.3, -0.7).finished();
  const RVector direct = 10.0 * affine_outputs(m, c.cwiseQuotient(in_scale));
  CHECK((affine_outputs(r, c) - direct).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("affine_eval_complex")
{
  const AffinePMM m = spin_model();
  const CVector half_i = affine_eval_complex(m, CVector::Constant(1, Complex(0, 0.5)));
  CHECK(std::abs(half_i(0) - Complex(-std::sqrt(3.0) / 4, 0)) < 1e-12);
  CHECK(std::abs(half_i(1) - Complex(std::sqrt(3.0) / 4, 0)) < 1e-12);
  const CVector ep = affine_eval_complex(m, CVector::Constant(1, Complex(0, 1)));
  CHECK(std::abs(ep(0)) < 1e-7);
  CHECK(std::abs(ep(1)) < 1e-7);

  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    AffinePMM r = init_affine(5, 2, PackMode::ComplexHermitian, OutputSelector::lowest(5), trial, 1.0);
    const RVector c = random_vector(2, rng);
    const CVector z = affine_eval_complex(r, c.cast<Complex>());
    const RVector e = affine_outputs(r, c);
    for (Index k = 0; k < 5; ++k) CHECK(std::abs(z(k) - e(k)) <= 1e-10);
  }
}

TEST_CASE("unitary product examples")
{
  const UnitaryProductPMM z = single_factor(pauli_z(), 2);
  CHECK((unitary_product_eval(z, 0.1).matrix() - expm_hermitian(herm(pauli_z()), 0.1).matrix()).norm() < 1e-15);
  CHECK((unitary_product_eval(z, 0.0).matrix() - CMatrix::Identity(2, 2)).norm() == 0.0);
  const RVector e = unitary_product_energies(z, 0.1);
  CHECK(e(0) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(e(1) == doctest::Approx(1.0).epsilon(1e-12));

  UnitaryProductPMM two = z;
  two.factors.push_back(pack(herm(pauli_x()), PackMode::ComplexHermitian));
  const RVector lim = unitary_product_energies(two, 0.0);
  CHECK(lim(0) == doctest::Approx(-std::sqrt(2.0)).epsilon(1e-14));
  CHECK(lim(1) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
}

TEST_CASE("unitary product group property and O(dt) limit")
{
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const UnitaryProductPMM m = init_unitary_product(4, 3, 4, seed, 1.0);
    const double dt = 0.37;
    UnitaryProductPMM reversed = m;
    std::reverse(reversed.factors.begin(), reversed.factors.end());
    const CMatrix id = unitary_product_eval(m, dt).matrix() * unitary_product_eval(reversed, -dt).matrix();
    CHECK((id - CMatrix::Identity(4, 4)).norm() <= 1e-10);

    const RVector limit = unitary_product_energies(m, 0.0);
    const double e1 = (unitary_product_energies(m, 1e-2) - limit).cwiseAbs().maxCoeff();
    const double e2 = (unitary_product_energies(m, 5e-3) - limit).cwiseAbs().maxCoeff();
    CHECK(e2 / e1 == doctest::Approx(0.5).epsilon(0.25));
  }
}

TEST_CASE("tensor network counts")
{
  const TensorNetworkPMM tn = TensorNetworkPMM::zeros(28, 28, 8, 6, 12);
  CHECK(tn.num_params() == 9224);
  CHECK(tn.full_representation_count() == 28232);
  CHECK(tn.rows * tn.cols * tn.entries_per_matrix() == 28224);
  const TensorNetworkPMM complex_tn = TensorNetworkPMM::zeros(28, 28, 8, 6, 12, PackMode::ComplexHermitian);
  CHECK(complex_tn.entries_per_matrix() == 64);
}

TEST_CASE("tn_expand examples")
{
  const TensorNetworkPMM zero = TensorNetworkPMM::zeros(3, 4, 3, 2, 2);
  for (const auto& p : tn_expand(zero)) CHECK(p.values.cwiseAbs().maxCoeff() == 0.0);

  TensorNetworkPMM rank1 = TensorNetworkPMM::zeros(3, 4, 3, 1, 1);
  rank1.P.setConstant(1.0);
  rank1.Q.setConstant(1.0);
  Rng rng(4);
  for (Index k = 0; k < rank1.entries_per_matrix(); ++k) rank1.N(0, k, 0) = rng.normal();
  for (const auto& p : tn_expand(rank1))
    for (Index k = 0; k < p.size(); ++k) CHECK(p.values(k) == rank1.N(0, k, 0));
}

TEST_CASE("tn_expand matches a direct triple sum")
{
  const TensorNetworkPMM tn = init_tensor_network(3, 2, 3, 2, 3, PackMode::RealSymmetric, 5, 1.0);
  const Tensor3 s = tn_expand_tensor(tn);
  for (Index i = 0; i < tn.rows; ++i)
    for (Index j = 0; j < tn.cols; ++j)
      for (Index k = 0; k < tn.entries_per_matrix(); ++k) {
        double direct = 0.0;
        for (Index t = 0; t < tn.pixel_bond; ++t)
          for (Index u = 0; u < tn.bond; ++u)
            for (Index v = 0; v < tn.bond; ++v) direct += tn.P(i, t, u) * tn.N(u, k, v) * tn.Q(v, t, j);
        CHECK(s(i, j, k) == doctest::Approx(direct).epsilon(1e-12));
      }
}

TEST_CASE("tn_affine_outputs equals the expanded affine model on 100 random images")
{
  const TensorNetworkPMM tn = init_tensor_network(28, 28, 8, 6, 12, PackMode::RealSymmetric, 1, 1.0);
  const AffinePMM full = tn_to_affine(tn);
  REQUIRE(full.couplings.size() == 784);
  Rng rng(8);
  RMatrix images(100, 784);
  for (Index r = 0; r < 100; ++r)
    for (Index p = 0; p < 784; ++p) images(r, p) = rng.uniform();
  const RMatrix embedded = tn_embed(tn, images);
  for (Index r = 0; r < 100; ++r) {
    const RVector image = images.row(r).transpose();
    // oracle: explicit 784-term sum
    CMatrix m = unpack(tn.diag).matrix();
    for (Index p = 0; p < 784; ++p) accumulate_unpacked(m, full.couplings[std::size_t(p)], image(p));
    const RVector e = eigvalsh(herm(m));
    const RVector out = tn_affine_outputs(tn, image);
    const double scale = std::max(1.0, e.cwiseAbs().maxCoeff());
    CHECK(std::abs(out(0) - e(3)) <= 1e-12 * scale);
    CHECK(std::abs(out(1) - e(4)) <= 1e-12 * scale);
    CHECK((embedded.row(r).transpose() - out).cwiseAbs().maxCoeff() <= 1e-12 * scale);
  }
  const RVector blank = tn_affine_outputs(tn, RVector::Zero(784));
  CHECK(blank(0) == tn.diag.values(3));
  CHECK(blank(1) == tn.diag.values(4));
}

TEST_CASE("observable_expectation examples")
{
  const AffinePMM host = init_affine(5, 1, PackMode::RealSymmetric, OutputSelector::lowest(1), 2, 1.0);
  const RVector c = RVector::Constant(1, 0.4);
  const ObservableModel id{pack(HermitianMatrix::identity(5), PackMode::ComplexHermitian)};
  CHECK(observable_expectation(host, id, c) == doctest::Approx(1.0).epsilon(1e-13));
  const HermitianMatrix m = affine_eval(host, c);
  const ObservableModel self{pack(m, PackMode::ComplexHermitian)};
  CHECK(observable_expectation(host, self, c) == doctest::Approx(eigvalsh(m)(0)).epsilon(1e-12));

  AffinePMM degenerate;
  degenerate.dim = 2;
  degenerate.diag = PackedParams{2, PackMode::RealDiagonal, RVector::Ones(2)};
  degenerate.couplings = {PackedParams::zeros(2, PackMode::RealSymmetric)};
  const ObservableModel o2{pack(HermitianMatrix::identity(2), PackMode::ComplexHermitian)};
  CHECK_THROWS_AS(observable_expectation(degenerate, o2, RVector::Zero(1)), DegenerateLevelError);
}

TEST_CASE("flatten/unflatten roundtrip")
{
  const AffinePMM a = init_affine(4, 2, PackMode::ComplexHermitian, OutputSelector::lowest(2), 1, 1.0);
  CHECK(flatten(unflatten(a, flatten(a))) == flatten(a));
  CHECK(flatten(a).size() == a.num_params());
  const UnitaryProductPMM u = init_unitary_product(3, 4, 2, 1, 1.0);
  CHECK(flatten(unflatten(u, flatten(u))) == flatten(u));
  const TensorNetworkPMM t = init_tensor_network(4, 3, 3, 2, 2, PackMode::RealSymmetric, 1, 1.0);
  CHECK(flatten(unflatten(t, flatten(t))) == flatten(t));
  CHECK(flatten(t).size() == t.num_params());
  CHECK_THROWS_AS(unflatten(a, RVector::Zero(3)), Error);
}

TEST_CASE("checkpoints roundtrip bit exactly")
{
  const AffinePMM a = init_affine(4, 2, PackMode::ComplexHermitian, OutputSelector::lowest(2), 1, 1.0);
  const TensorNetworkPMM t = init_tensor_network(4, 3, 3, 2, 2, PackMode::RealSymmetric, 1, 1.0);
  const UnitaryProductPMM u = init_unitary_product(3, 4, 2, 1, 1.0);
  const ObservableModel o = init_observable(3, 2, 1.0);
  for (const Checkpoint& c : {Checkpoint(a), Checkpoint(t), Checkpoint(u), Checkpoint(o)}) {
    const Json j = Json::parse(checkpoint_json(c).dump());
    const Checkpoint back = checkpoint_from_json(j);
    CHECK(back.index() == c.index());
    std::visit([&](const auto& m) { CHECK(flatten(m) == std::visit([](const auto& x) { return flatten(x); }, back)); },
               c);
  }
  Json bad = checkpoint_json(a);
  bad["schema"] = 99;
  CHECK_THROWS_AS(checkpoint_from_json(bad), Error);
}
