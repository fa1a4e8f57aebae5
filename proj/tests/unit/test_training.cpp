#include "support.hpp"

#include "pmm/oracles.hpp"
#include "pmm/training.hpp"

#include <cmath>

using namespace pmm;
using namespace pmm::test;

namespace {

Dataset one_column(const RVector& x, const RVector& y, Split split = Split::Train)
{
  Dataset d;
  d.inputs = x;
  d.targets = y;
  d.split = split;
  return d;
}

AffinePMM scalar_model(double value)
{
  AffinePMM m;
  m.dim = 1;
  m.diag = PackedParams{1, PackMode::RealDiagonal, RVector::Constant(1, value)};
  m.couplings = {PackedParams::zeros(1, PackMode::RealSymmetric)};
  return m;
}

}  // namespace

TEST_CASE("eigen_mse_loss examples")
{
  const Dataset d = one_column(RVector::Constant(1, 0.3), RVector::Constant(1, 1.0));
  const RVector w = RVector::Ones(1);
  const LossValue off = eigen_mse_loss(scalar_model(3.0), d, w);
  CHECK(off.value == doctest::Approx(4.0));

  const LossValue exact = eigen_mse_loss(scalar_model(1.0), d, w);
  CHECK(exact.value == 0.0);
  CHECK(exact.gradient.cwiseAbs().maxCoeff() == 0.0);

  Dataset wide = d;
  wide.targets = RMatrix::Zero(1, 2);
  CHECK_THROWS_AS(eigen_mse_loss(scalar_model(1.0), wide, RVector::Ones(2)), Error);
}

TEST_CASE("observable_mse_loss examples")
{
  const AffinePMM host = init_affine(4, 1, PackMode::RealSymmetric, OutputSelector::lowest(1), 7, 1.0);
  Dataset d = one_column(linspace(-1, 1, 5), RVector::Ones(5));
  const ObservableFit identity{host, {pack(HermitianMatrix::identity(4), PackMode::ComplexHermitian)}};
  CHECK(observable_mse_loss(identity, d).value == doctest::Approx(0.0).epsilon(1e-14));

  const ObservableFit learned{host, init_observable(4, 3, 1.0)};
  for (Index r = 0; r < d.size(); ++r)
    d.targets(r, 0) = observable_expectation(host, learned.obs, d.inputs.row(r).transpose());
  const LossValue lv = observable_mse_loss(learned, d);
  CHECK(lv.value <= 1e-28);
}

TEST_CASE("init_affine: determinism and scale 0")
{
  const AffinePMM a = init_affine(5, 2, PackMode::ComplexHermitian, OutputSelector::lowest(2), 42, 0.1);
  const AffinePMM b = init_affine(5, 2, PackMode::ComplexHermitian, OutputSelector::lowest(2), 42, 0.1);
  CHECK(flatten(a) == flatten(b));
  CHECK(flatten(a) != flatten(init_affine(5, 2, PackMode::ComplexHermitian, OutputSelector::lowest(2), 43, 0.1)));
  for (Index i = 1; i < 5; ++i) CHECK(a.diag.values(i - 1) <= a.diag.values(i));

  const AffinePMM z = init_affine(5, 2, PackMode::RealSymmetric, OutputSelector::lowest(1), 42, 0.0);
  CHECK(flatten(z).cwiseAbs().maxCoeff() == 0.0);
  CHECK(flatten(init_unitary_product(3, 2, 1, 9, 0.1)) == flatten(init_unitary_product(3, 2, 1, 9, 0.1)));
}

TEST_CASE("train: zero epochs returns the initial model")
{
  const DatasetSplits s = make_dataset("fig2_aho");
  const AffinePMM init = init_affine(5, 1, PackMode::RealSymmetric, OutputSelector::lowest(2), 1, 0.1);
  OptimizerConfig opt;
  opt.max_epochs = 0;
  const auto r = train(init, s.train, s.validation, LossSpec::eigen_mse(2), opt);
  CHECK(flatten(r.model) == flatten(init));
  CHECK(r.state.history.size() == 1);
}

TEST_CASE("train: returned validation loss never exceeds the initial one")
{
  const DatasetSplits s = make_dataset("fig1_spin");
  const LossSpec spec = LossSpec::eigen_mse(1);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const AffinePMM init = init_affine(2, 1, PackMode::RealSymmetric, OutputSelector::lowest(1), seed, 0.5);
    OptimizerConfig opt;
    opt.step_size = 0.05;  // large enough to overshoot on some seeds
    opt.max_epochs = 200;
    opt.patience = 20;
    const auto r = train(init, s.train, s.validation, spec, opt);
    const double v0 = evaluate_loss(init, prepare(s.validation, spec), spec, false).value;
    const double v1 = evaluate_loss(r.model, prepare(s.validation, spec), spec, false).value;
    CHECK(v1 <= v0);
    CHECK(v1 == r.state.best_validation);
    for (std::size_t i = 1; i < r.state.history.size(); ++i)
      CHECK(r.state.history[i].epoch > r.state.history[i - 1].epoch);
  }
}

TEST_CASE("train: AHO loss decreases monotonically over 50 Adam steps at 1e-3")
{
  const DatasetSplits s = make_dataset("fig2_aho");
  const AffinePMM init = init_affine(5, 1, PackMode::RealSymmetric, OutputSelector::lowest(2), 0, 0.1);
  OptimizerConfig opt;
  opt.max_epochs = 51;
  opt.patience = 1000;
  const auto r = train(init, s.train, s.validation, LossSpec::eigen_mse(2), opt);
  REQUIRE(r.state.history.size() == 52);
  // rows 1..51 hold the loss seen by each Adam step, so 50 consecutive pairs
  for (std::size_t i = 2; i < r.state.history.size(); ++i)
    CHECK(r.state.history[i].train_loss < r.state.history[i - 1].train_loss);
}

TEST_CASE("train is bit-reproducible")
{
  const DatasetSplits s = make_dataset("fig2_aho");
  const AffinePMM init = init_affine(5, 1, PackMode::RealSymmetric, OutputSelector::lowest(2), 4, 0.1);
  OptimizerConfig opt;
  opt.max_epochs = 100;
  opt.refine_iterations = 20;
  const auto a = train(init, s.train, s.validation, LossSpec::eigen_mse(2), opt);
  const auto b = train(init, s.train, s.validation, LossSpec::eigen_mse(2), opt);
  CHECK(flatten(a.model) == flatten(b.model));
  REQUIRE(a.state.history.size() == b.state.history.size());
  for (std::size_t i = 0; i < a.state.history.size(); ++i)
    CHECK(a.state.history[i].validation_loss == b.state.history[i].validation_loss);
}

TEST_CASE("train rejects overlapping splits")
{
  const DatasetSplits s = make_dataset("fig1_spin");
  const AffinePMM init = init_affine(2, 1, PackMode::RealSymmetric, OutputSelector::lowest(1), 0, 0.1);
  CHECK_THROWS_AS(train(init, s.train, s.train, LossSpec::eigen_mse(1), OptimizerConfig{}), Error);
}

TEST_CASE("OptimizerConfig validation")
{
  OptimizerConfig bad;
  bad.step_size = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = {};
  bad.patience = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("Levenberg-Marquardt refinement fits the spin model to machine precision")
{
  const DatasetSplits s = make_dataset("fig1_spin");
  const AffinePMM init = init_affine(2, 1, PackMode::RealSymmetric, OutputSelector::lowest(1), 0, 0.5);
  OptimizerConfig opt;
  opt.step_size = 1e-2;
  opt.max_epochs = 2000;
  opt.patience = 2000;
  opt.refine_iterations = 3000;
  const auto r = train(init, s.train, s.validation, LossSpec::eigen_mse(1), opt);
  double worst = 0.0;
  for (double c : linspace(-1, 1, 201))
    worst = std::max(worst, std::abs(affine_outputs(r.model, RVector::Constant(1, c))(0) +
                                     std::sqrt(1 + c * c) / 2));
  CHECK(worst < 1e-6);
}
