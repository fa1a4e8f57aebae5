#include "support.hpp"

#include "pmm/baselines.hpp"
#include "pmm/embedding.hpp"
#include "pmm/training.hpp"

#include <cmath>

using namespace pmm;
using namespace pmm::test;

namespace {

double entropy_bits(const RVector& p)
{
  double h = 0.0;
  for (Index i = 0; i < p.size(); ++i)
    if (p(i) > 0) h -= p(i) * std::log2(p(i));
  return h;
}

/// Two well separated blobs of `per` points each in `dim` dimensions.
RMatrix two_clusters(Index per, Index dim, Rng& rng, double separation = 100.0)
{
  RMatrix x(2 * per, dim);
  for (Index i = 0; i < 2 * per; ++i)
    for (Index j = 0; j < dim; ++j) x(i, j) = rng.normal() + (i >= per && j == 0 ? separation : 0.0);
  return x;
}

}  // namespace

TEST_CASE("perplexity_search examples")
{
  const RVector uniform = perplexity_search(RVector::Constant(9, 2.5), 9.0);
  CHECK((uniform.array() - 1.0 / 9.0).abs().maxCoeff() < 1e-12);

  // point 0 of two far-apart clusters of five
  RVector d(9);
  d << 1, 1.2, 0.8, 1.1, 400, 401, 399, 402, 400.5;
  const RVector p = perplexity_search(d, 3.0);
  CHECK(p.head(4).sum() > 0.99);
  CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-12));

  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    RVector r(40);
    for (Index i = 0; i < 40; ++i) r(i) = std::pow(rng.normal(), 2) * 10;
    const double perp = rng.uniform(2.0, 30.0);
    CHECK(std::abs(entropy_bits(perplexity_search(r, perp)) - std::log2(perp)) <= 1e-5);
  }
}

TEST_CASE("joint and student-t affinities are normalized and symmetric")
{
  Rng rng(4);
  const RMatrix x = two_clusters(20, 5, rng, 5.0);
  const RMatrix p = joint_probabilities(x, 10.0);
  const RMatrix y = RMatrix::Random(40, 2);
  const RMatrix q = student_t_affinities(y);
  for (const RMatrix* m : {&p, &q}) {
    CHECK(std::abs(m->sum() - 1.0) <= 1e-10);
    CHECK(m->minCoeff() >= 0.0);
    CHECK(((*m) - m->transpose()).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK(m->diagonal().cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("kl_divergence: identity and Gibbs inequality")
{
  Rng rng(6);
  const RMatrix y = RMatrix::Random(30, 2);
  const RMatrix q = student_t_affinities(y);
  CHECK(std::abs(kl_divergence(q, q)) <= 1e-12);
  CHECK(std::abs(kl_embedding_objective(q, y).value) <= 1e-12);
  for (int trial = 0; trial < 20; ++trial) {
    const RMatrix x = RMatrix::Random(30, 4);
    const RMatrix p = joint_probabilities(x, 8.0);
    CHECK(kl_divergence(p, student_t_affinities(RMatrix::Random(30, 2))) >= 0.0);
  }
}

TEST_CASE("KL gradient on embedding coordinates matches finite differences")
{
  Rng rng(10);
  const RMatrix x = two_clusters(16, 6, rng, 4.0);
  const RMatrix p = joint_probabilities(x, 6.0);
  const RMatrix y = RMatrix::Random(32, 2);
  const RMatrix g = kl_embedding_objective(p, y).gradient;
  RMatrix probe = y;
  double worst = 0.0;
  const double h = 1e-6;
  for (Index i = 0; i < y.rows(); ++i)
    for (Index j = 0; j < 2; ++j) {
      probe(i, j) = y(i, j) + h;
      const double up = kl_embedding_objective(p, probe).value;
      probe(i, j) = y(i, j) - h;
      const double down = kl_embedding_objective(p, probe).value;
      probe(i, j) = y(i, j);
      worst = std::max(worst, std::abs((up - down) / (2 * h) - g(i, j)) / std::max(1e-12, g.cwiseAbs().maxCoeff()));
    }
  CHECK(worst < 1e-4);
}

TEST_CASE("kl_embedding_loss gradients pass fd_check")
{
  Rng rng(12);
  const RMatrix images = RMatrix::Random(16, 16).cwiseAbs();
  const RMatrix p = joint_probabilities(images, 5.0);
  const TensorNetworkPMM tn = init_tensor_network(4, 4, 4, 2, 3, PackMode::RealSymmetric, 1, 1.0);
  CHECK(fd_check([&](const RVector& v) { return kl_embedding_loss(unflatten(tn, v), images, p); }, flatten(tn)) <
        1e-4);
  const AffinePMM a = init_affine(4, 16, PackMode::RealSymmetric, OutputSelector::interior_pair(), 2, 1.0);
  CHECK(fd_check([&](const RVector& v) { return kl_embedding_loss(unflatten(a, v), images, p); }, flatten(a)) < 1e-4);
}

TEST_CASE("64-image toy batch: 50 steps halve the KL loss")
{
  Rng rng(3);
  RMatrix images(64, 16);
  std::vector<int> labels;
  for (Index i = 0; i < 64; ++i) {
    const int cls = int(i % 4);
    labels.push_back(cls);
    for (Index j = 0; j < 16; ++j) images(i, j) = (j / 4 == cls ? 1.0 : 0.0) + 0.1 * rng.uniform();
  }
  Dataset train_set;
  train_set.inputs = images.topRows(48);
  train_set.labels.assign(labels.begin(), labels.begin() + 48);
  Dataset val_set;
  val_set.inputs = images.bottomRows(16);
  val_set.labels.assign(labels.begin() + 48, labels.end());
  val_set.split = Split::Validation;

  const TensorNetworkPMM init = init_tensor_network(4, 4, 4, 2, 3, PackMode::RealSymmetric, 0, 1.0);
  const LossSpec spec = LossSpec::kl_embedding(10.0);
  OptimizerConfig opt;
  opt.step_size = 1e-2;
  opt.max_epochs = 50;
  opt.patience = 50;
  opt.batch_size = 48;
  const auto r = train(init, train_set, val_set, spec, opt);
  const PreparedData all = prepare(train_set, spec);
  const double before = evaluate_loss(init, all, spec, false).value;
  const double after = evaluate_loss(r.model, all, spec, false).value;
  CHECK(after <= 0.5 * before);
}

TEST_CASE("pca_fit recovers the dominant axes")
{
  Rng rng(5);
  RMatrix x(400, 3);
  for (Index i = 0; i < 400; ++i) {
    x(i, 0) = 10 * rng.normal();
    x(i, 1) = 3 * rng.normal();
    x(i, 2) = 0.1 * rng.normal();
  }
  const PcaModel m = pca_fit(x, 2);
  CHECK(std::abs(m.components(0, 0)) > 0.99);
  CHECK(std::abs(m.components(1, 1)) > 0.99);
  const RMatrix y = pca_transform(m, x);
  CHECK(y.rows() == 400);
  CHECK(y.cols() == 2);
  CHECK(std::abs(y.col(0).mean()) < 1e-10);
  CHECK(std::abs(y.col(0).dot(y.col(1))) < 1e-8 * y.col(0).norm() * y.col(1).norm());
}
