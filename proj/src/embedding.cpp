#include "pmm/embedding.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace pmm {

RVector perplexity_search(const RVector& distances_sq, double perplexity)
{
  const Index m = distances_sq.size();
  require(m >= 1, ErrorCode::InvalidArgument, "perplexity search needs at least one neighbour");
  require(perplexity > 1.0 && perplexity <= double(m), ErrorCode::InvalidArgument,
          "perplexity must lie in (1, number of neighbours]");
  require((distances_sq.array() >= 0.0).all(), ErrorCode::InvalidArgument, "squared distances must be nonnegative");

  const double target = std::log2(perplexity);
  const RVector shifted = distances_sq.array() - distances_sq.minCoeff();

  // p ∝ exp(−β·d²) with β = 1/2σ²; entropy in bits
  auto row_at = [&](double beta, double& entropy) {
    RVector p = (-beta * shifted.array()).exp();
    const double sum = p.sum();
    p /= sum;
    const double nats = std::log(sum) + beta * shifted.dot(p);
    entropy = nats / std::log(2.0);
    return p;
  };

  double beta = 1.0;
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  double entropy = 0.0;
  RVector best = row_at(beta, entropy);
  double best_miss = std::abs(entropy - target);
  for (int it = 0; it < 50 && best_miss > 1e-5; ++it) {
    // entropy decreases with β
    if (entropy > target) {
      lo = beta;
      beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
    } else {
      hi = beta;
      beta = 0.5 * (beta + lo);
    }
    RVector p = row_at(beta, entropy);
    const double miss = std::abs(entropy - target);
    if (miss < best_miss) {
      best_miss = miss;
      best = std::move(p);
    }
  }
  if (best_miss > 1e-5) {
    std::ostringstream os;
    os << "perplexity search stopped after 50 iterations with entropy off by " << best_miss << " bits";
    warn(os.str());
  }
  return best;
}

RMatrix pairwise_squared_distances(const RMatrix& points)
{
  const RVector norms = points.rowwise().squaredNorm();
  RMatrix d = -2.0 * points * points.transpose();
  d.colwise() += norms;
  d.rowwise() += norms.transpose();
  d = d.cwiseMax(0.0);
  d.diagonal().setZero();
  return d;
}

RMatrix joint_probabilities(const RMatrix& points, double perplexity)
{
  const Index m = points.rows();
  require(m >= 2, ErrorCode::InvalidArgument, "joint probabilities need at least two points");
  const RMatrix d = pairwise_squared_distances(points);
  RMatrix cond = RMatrix::Zero(m, m);
  RVector row(m - 1);
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0, c = 0; j < m; ++j)
      if (j != i) row(c++) = d(i, j);
    const RVector p = perplexity_search(row, perplexity);
    for (Index j = 0, c = 0; j < m; ++j)
      if (j != i) cond(i, j) = p(c++);
  }
  RMatrix joint = (cond + cond.transpose()) / (2.0 * double(m));
  joint /= joint.sum();
  return joint;
}

RMatrix student_t_affinities(const RMatrix& embedding)
{
  RMatrix w = (1.0 + pairwise_squared_distances(embedding).array()).inverse().matrix();
  w.diagonal().setZero();
  return w / w.sum();
}

double kl_divergence(const RMatrix& p, const RMatrix& q)
{
  require(p.rows() == q.rows() && p.cols() == q.cols(), ErrorCode::DimensionMismatch, "P and Q shapes differ");
  double total = 0.0;
  for (Index j = 0; j < p.cols(); ++j)
    for (Index i = 0; i < p.rows(); ++i) {
      if (i == j) continue;
      const double pf = std::max(p(i, j), kProbabilityFloor);
      total += pf * std::log(pf / q(i, j));
    }
  return total;
}

EmbeddingLoss kl_embedding_objective(const RMatrix& p, const RMatrix& embedding)
{
  const Index m = embedding.rows();
  require(p.rows() == m && p.cols() == m, ErrorCode::DimensionMismatch, "P must be m x m");
  RMatrix w = (1.0 + pairwise_squared_distances(embedding).array()).inverse().matrix();
  w.diagonal().setZero();
  const RMatrix q = w / w.sum();
  RMatrix pf = p.cwiseMax(kProbabilityFloor);
  pf.diagonal().setZero();
  const double mass = pf.sum();

  EmbeddingLoss out;
  out.value = kl_divergence(p, q);
  // ∂/∂y_i = 4 Σ_j (p_ij − mass·q_ij) w_ij (y_i − y_j)
  const RMatrix coeff = ((pf - mass * q).array() * w.array()).matrix();
  out.gradient = 4.0 * (coeff.rowwise().sum().asDiagonal() * embedding - coeff * embedding);
  return out;
}

namespace {

double interior_gap(const RVector& spectrum, Index a, Index b)
{
  double gap = spectrum(b) - spectrum(a);
  if (a > 0) gap = std::min(gap, spectrum(a) - spectrum(a - 1));
  if (b + 1 < spectrum.size()) gap = std::min(gap, spectrum(b + 1) - spectrum(b));
  return gap;
}

/// Matrix D + unpack(entries) for one image, real or complex.
template <typename Scalar>
DenseMatrix<Scalar> build(Index dim, const RVector& diag, PackMode mode, const RVector& entries)
{
  DenseMatrix<Scalar> m = DenseMatrix<Scalar>::Zero(dim, dim);
  accumulate_unpacked<Scalar>(m, dim, PackMode::RealDiagonal, {diag.data(), std::size_t(diag.size())});
  accumulate_unpacked<Scalar>(m, dim, mode, {entries.data(), std::size_t(entries.size())});
  return m;
}

RVector interior_values(Index dim, const RVector& diag, PackMode mode, const RVector& entries, Index a, Index b)
{
  RVector spectrum;
  if (mode == PackMode::RealSymmetric || mode == PackMode::RealDiagonal)
    spectrum = Eigen::SelfAdjointEigenSolver<RMatrix>(build<double>(dim, diag, mode, entries), Eigen::EigenvaluesOnly)
                   .eigenvalues();
  else
    spectrum = eigvalsh(HermitianMatrix::hermitize(build<Complex>(dim, diag, mode, entries)));
  return RVector{{spectrum(a), spectrum(b)}};
}

/// Interior pair of D + unpack(entries) and the cotangents ∂L/∂diag, ∂L/∂entries for
/// upstream ∂L/∂λ = (ga, gb). Degenerate pairs use central differences over the slots.
struct ImageGrad {
  RVector values;
  RVector d_diag;
  RVector d_entries;
};

ImageGrad image_pair(Index dim, const RVector& diag, PackMode mode, const RVector& entries, Index a, Index b,
                     const double* upstream)
{
  ImageGrad out;
  const bool real = mode == PackMode::RealSymmetric || mode == PackMode::RealDiagonal;
  RVector spectrum;
  CMatrix va, vb;
  double norm = 0.0;
  if (real) {
    const RMatrix m = build<double>(dim, diag, mode, entries);
    norm = m.norm();
    Eigen::SelfAdjointEigenSolver<RMatrix> solver(m, upstream ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
    spectrum = solver.eigenvalues();
    if (upstream) {
      va = solver.eigenvectors().col(a).cast<Complex>();
      vb = solver.eigenvectors().col(b).cast<Complex>();
    }
  } else {
    const HermitianMatrix m = HermitianMatrix::hermitize(build<Complex>(dim, diag, mode, entries));
    norm = m.norm();
    const EigenDecomposition eig = eigh(m);
    spectrum = eig.eigenvalues;
    va = eig.eigenvectors.col(a);
    vb = eig.eigenvectors.col(b);
  }
  out.values = RVector{{spectrum(a), spectrum(b)}};
  if (!upstream) return out;

  if (interior_gap(spectrum, a, b) >= degeneracy_threshold(norm)) {
    const CMatrix g = upstream[0] * va * va.adjoint() + upstream[1] * vb * vb.adjoint();
    out.d_diag = slot_contraction(g, dim, PackMode::RealDiagonal);
    out.d_entries = slot_contraction(g, dim, mode);
    return out;
  }

  const double h = 1e-6 * std::max(1.0, norm);
  auto directional = [&](RVector& dg, RVector& dd, RVector& de, RVector& slot) {
    for (Index s = 0; s < slot.size(); ++s) {
      const double keep = slot(s);
      slot(s) = keep + h;
      const RVector up = interior_values(dim, dd, mode, de, a, b);
      slot(s) = keep - h;
      const RVector down = interior_values(dim, dd, mode, de, a, b);
      slot(s) = keep;
      dg(s) = (upstream[0] * (up(0) - down(0)) + upstream[1] * (up(1) - down(1))) / (2.0 * h);
    }
  };
  RVector dd = diag, de = entries;
  out.d_diag.resize(diag.size());
  out.d_entries.resize(entries.size());
  directional(out.d_diag, dd, de, dd);
  directional(out.d_entries, dd, de, de);
  return out;
}

void check_batch(Index images, const RMatrix& p)
{
  require(images >= 8, ErrorCode::InvalidArgument, "embedding batches need at least 8 images");
  require(p.rows() == images && p.cols() == images, ErrorCode::DimensionMismatch, "P must be batch x batch");
}

/// Gradients of the KL loss with respect to per-image packed entries and the diagonal.
struct PackedBackprop {
  double value = 0.0;
  RMatrix d_entries;  ///< images × K
  RVector d_diag;
};

PackedBackprop kl_packed(Index dim, const RVector& diag, PackMode mode, const RMatrix& packed, const RMatrix& p,
                         bool with_gradient)
{
  const auto idx = OutputSelector::interior_pair().indices(dim);
  const Index m = packed.rows();
  RMatrix embedding(m, 2);
  for (Index e = 0; e < m; ++e) {
    const ImageGrad ig = image_pair(dim, diag, mode, packed.row(e).transpose(), idx[0], idx[1], nullptr);
    embedding.row(e) = ig.values.transpose();
  }
  const EmbeddingLoss obj = kl_embedding_objective(p, embedding);
  PackedBackprop out;
  out.value = obj.value;
  if (!with_gradient) return out;
  out.d_entries.resize(m, packed.cols());
  out.d_diag = RVector::Zero(dim);
  for (Index e = 0; e < m; ++e) {
    const double upstream[2] = {obj.gradient(e, 0), obj.gradient(e, 1)};
    const ImageGrad ig = image_pair(dim, diag, mode, packed.row(e).transpose(), idx[0], idx[1], upstream);
    out.d_entries.row(e) = ig.d_entries.transpose();
    out.d_diag += ig.d_diag;
  }
  return out;
}

}  // namespace

LossValue kl_embedding_loss(const TensorNetworkPMM& model, const RMatrix& images, const RMatrix& p,
                            bool with_gradient)
{
  check_batch(images.rows(), p);
  require(images.cols() == model.rows * model.cols, ErrorCode::DimensionMismatch, "image size mismatch");
  const RMatrix coupling = tn_coupling_matrix(model);
  const RMatrix packed = images * coupling;
  const PackedBackprop bp = kl_packed(model.dim, model.diag.values, model.entry_mode, packed, p, with_gradient);

  LossValue out;
  out.value = bp.value;
  if (!with_gradient) return out;

  const Index k = model.entries_per_matrix();
  const RMatrix ds = images.transpose() * bp.d_entries;  // (p·q) × K
  Tensor3 gs(model.rows, model.cols, k);
  for (Index i = 0; i < model.rows; ++i)
    for (Index j = 0; j < model.cols; ++j)
      for (Index kk = 0; kk < k; ++kk) gs(i, j, kk) = ds(i * model.cols + j, kk);

  using Pair = Eigen::IndexPair<int>;
  // S_ijk = Σ_{t,u,v} P_itu N_ukv Q_vtj
  const Eigen::Tensor<double, 4> nq = model.N.contract(model.Q, Eigen::array<Pair, 1>{Pair(2, 0)});  // u,k,t,j
  const Eigen::Tensor<double, 4> pn = model.P.contract(model.N, Eigen::array<Pair, 1>{Pair(2, 0)});  // i,t,k,v
  const Tensor3 dp =
      gs.contract(nq, Eigen::array<Pair, 2>{Pair(1, 3), Pair(2, 1)}).shuffle(Eigen::array<int, 3>{0, 2, 1});
  const Tensor3 dq =
      gs.contract(pn, Eigen::array<Pair, 2>{Pair(0, 0), Pair(2, 2)}).shuffle(Eigen::array<int, 3>{2, 1, 0});
  const Eigen::Tensor<double, 4> gp = gs.contract(model.P, Eigen::array<Pair, 1>{Pair(0, 0)});  // j,k,t,u
  const Tensor3 dn =
      gp.contract(model.Q, Eigen::array<Pair, 2>{Pair(0, 2), Pair(2, 1)}).shuffle(Eigen::array<int, 3>{1, 0, 2});

  out.gradient.resize(model.num_params());
  Index pos = 0;
  for (const Tensor3* t : {&dp, &dn, &dq}) {
    out.gradient.segment(pos, t->size()) = Eigen::Map<const RVector>(t->data(), t->size());
    pos += t->size();
  }
  out.gradient.segment(pos, model.dim) = bp.d_diag;
  return out;
}

LossValue kl_embedding_loss(const AffinePMM& model, const RMatrix& images, const RMatrix& p, bool with_gradient)
{
  check_batch(images.rows(), p);
  require(images.cols() == model.num_features(), ErrorCode::DimensionMismatch, "image size mismatch");
  require(model.selector.kind == OutputSelector::Kind::InteriorPair, ErrorCode::InvalidArgument,
          "embedding loss needs an interior-pair selector");
  const PackMode mode = model.couplings.empty() ? PackMode::RealSymmetric : model.couplings.front().mode;
  const Index k = packed_length(model.dim, mode);
  RMatrix coupling(model.num_features(), k);
  for (Index i = 0; i < model.num_features(); ++i) {
    require(model.couplings[std::size_t(i)].mode == mode, ErrorCode::ModeMismatch,
            "embedding loss needs one coupling mode");
    coupling.row(i) = model.couplings[std::size_t(i)].values.transpose();
  }
  const PackedBackprop bp = kl_packed(model.dim, model.diag.values, mode, images * coupling, p, with_gradient);

  LossValue out;
  out.value = bp.value;
  if (!with_gradient) return out;
  const RMatrix dc = images.transpose() * bp.d_entries;  // features × K
  out.gradient.resize(model.num_params());
  out.gradient.head(model.dim) = bp.d_diag;
  for (Index i = 0; i < model.num_features(); ++i) out.gradient.segment(model.dim + i * k, k) = dc.row(i).transpose();
  return out;
}

PcaModel pca_fit(const RMatrix& train, Index components)
{
  require(train.rows() >= 2, ErrorCode::InvalidArgument, "PCA needs at least two rows");
  require(components >= 1 && components <= train.cols(), ErrorCode::InvalidArgument, "bad PCA component count");
  PcaModel out;
  out.mean = train.colwise().mean().transpose();
  const RMatrix centered = train.rowwise() - out.mean.transpose();
  const RMatrix cov = centered.transpose() * centered / double(train.rows() - 1);
  Eigen::SelfAdjointEigenSolver<RMatrix> solver(cov);
  out.components.resize(train.cols(), components);
  for (Index c = 0; c < components; ++c) {
    RVector v = solver.eigenvectors().col(train.cols() - 1 - c);
    Index big = 0;
    v.cwiseAbs().maxCoeff(&big);
    if (v(big) < 0) v = -v;
    out.components.col(c) = v;
  }
  return out;
}

RMatrix pca_transform(const PcaModel& model, const RMatrix& points)
{
  require(points.cols() == model.mean.size(), ErrorCode::DimensionMismatch, "PCA feature count mismatch");
  return (points.rowwise() - model.mean.transpose()) * model.components;
}

}  // namespace pmm
