#include "pmm/baselines.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace pmm {

SplineModel spline_fit(const RVector& x, const RVector& y)
{
  const Index n = x.size();
  require(n >= 3, ErrorCode::InvalidArgument, "spline needs at least 3 knots");
  require(y.size() == n, ErrorCode::LengthMismatch, "spline x and y lengths differ");
  for (Index i = 1; i < n; ++i)
    require(x(i) > x(i - 1), ErrorCode::InvalidArgument, "spline knots must be strictly ascending");

  // Interior second derivatives from the tridiagonal continuity system (Thomas algorithm).
  const Index m = n - 2;
  RVector sub(m), diag(m), sup(m), rhs(m);
  for (Index i = 1; i <= m; ++i) {
    const double h0 = x(i) - x(i - 1), h1 = x(i + 1) - x(i);
    sub(i - 1) = h0;
    diag(i - 1) = 2.0 * (h0 + h1);
    sup(i - 1) = h1;
    rhs(i - 1) = 6.0 * ((y(i + 1) - y(i)) / h1 - (y(i) - y(i - 1)) / h0);
  }
  for (Index i = 1; i < m; ++i) {
    const double w = sub(i) / diag(i - 1);
    diag(i) -= w * sup(i - 1);
    rhs(i) -= w * rhs(i - 1);
  }
  RVector interior(m);
  for (Index i = m; i-- > 0;) interior(i) = (rhs(i) - (i + 1 < m ? sup(i) * interior(i + 1) : 0.0)) / diag(i);

  SplineModel out{x, y, RVector::Zero(n)};
  out.second.segment(1, m) = interior;
  return out;
}

double spline_eval(const SplineModel& s, double x)
{
  const Index n = s.knots.size();
  auto slope_at = [&](Index i, bool left_end) {
    const double h = s.knots(i + 1) - s.knots(i);
    const double base = (s.values(i + 1) - s.values(i)) / h;
    return left_end ? base - h * (2.0 * s.second(i) + s.second(i + 1)) / 6.0
                    : base + h * (s.second(i) + 2.0 * s.second(i + 1)) / 6.0;
  };
  if (x <= s.knots(0)) return s.values(0) + slope_at(0, true) * (x - s.knots(0));
  if (x >= s.knots(n - 1)) return s.values(n - 1) + slope_at(n - 2, false) * (x - s.knots(n - 1));
  const Index i = Index(std::upper_bound(s.knots.data(), s.knots.data() + n, x) - s.knots.data()) - 1;
  if (x == s.knots(i)) return s.values(i);
  const double h = s.knots(i + 1) - s.knots(i);
  const double a = (s.knots(i + 1) - x) / h, b = (x - s.knots(i)) / h;
  return a * s.values(i) + b * s.values(i + 1) +
         ((a * a * a - a) * s.second(i) + (b * b * b - b) * s.second(i + 1)) * h * h / 6.0;
}

RVector spline_eval(const SplineModel& model, const RVector& x)
{
  RVector out(x.size());
  for (Index i = 0; i < x.size(); ++i) out(i) = spline_eval(model, x(i));
  return out;
}

// ---------------------------------------------------------------------------

RVector PolyModel::monomial() const
{
  // Σ a_k ((x − s)/σ)^k expanded binomially.
  const Index n = coeffs.size();
  RVector out = RVector::Zero(n);
  for (Index k = 0; k < n; ++k) {
    double binom = 1.0;
    for (Index j = 0; j <= k; ++j) {
      out(j) += coeffs(k) * binom * std::pow(-shift, double(k - j)) / std::pow(scale, double(k));
      binom = binom * double(k - j) / double(j + 1);
    }
  }
  return out;
}

PolyModel polyfit(const RVector& x, const RVector& y, Index degree)
{
  require(x.size() == y.size(), ErrorCode::LengthMismatch, "polyfit x and y lengths differ");
  require(degree >= 0 && degree < x.size(), ErrorCode::InvalidArgument, "polyfit degree must be below point count");
  PolyModel out;
  out.shift = x.mean();
  out.scale = std::max((x.array() - out.shift).abs().maxCoeff(), std::numeric_limits<double>::min());
  if ((x.array() - out.shift).abs().maxCoeff() == 0.0) out.scale = 1.0;
  RMatrix v(x.size(), degree + 1);
  for (Index i = 0; i < x.size(); ++i) {
    const double t = (x(i) - out.shift) / out.scale;
    double p = 1.0;
    for (Index k = 0; k <= degree; ++k, p *= t) v(i, k) = p;
  }
  const Eigen::ColPivHouseholderQR<RMatrix> qr(v);
  out.coeffs = qr.solve(y);
  if (qr.rank() < degree + 1) warn("polyfit: design matrix is rank deficient");
  const double residual = (v * out.coeffs - y).norm();
  if (residual > 1e-6 * std::max(1.0, y.norm()) && degree + 1 == x.size())
    warn("polyfit: interpolating fit leaves a large residual");
  return out;
}

double polyeval(const PolyModel& model, double x)
{
  const double t = (x - model.shift) / model.scale;
  double acc = 0.0;
  for (Index k = model.coeffs.size(); k-- > 0;) acc = acc * t + model.coeffs(k);
  return acc;
}

RVector polyeval(const PolyModel& model, const RVector& x)
{
  RVector out(x.size());
  for (Index i = 0; i < x.size(); ++i) out(i) = polyeval(model, x(i));
  return out;
}

RMatrix diabatic_relabel(const RMatrix& levels)
{
  const Index n = levels.rows(), k = levels.cols();
  RMatrix out = levels;
  if (n < 2) return out;
  std::vector<Index> perm(static_cast<std::size_t>(k));
  for (Index i = 1; i < n; ++i) {
    const RVector guess = i >= 2 ? RVector(2.0 * out.row(i - 1) - out.row(i - 2)) : RVector(out.row(i - 1));
    std::iota(perm.begin(), perm.end(), Index(0));
    std::vector<Index> best = perm;
    double best_cost = std::numeric_limits<double>::infinity();
    do {
      double cost = 0.0;
      for (Index j = 0; j < k; ++j) cost += std::abs(levels(i, perm[std::size_t(j)]) - guess(j));
      if (cost < best_cost) {
        best_cost = cost;
        best = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    for (Index j = 0; j < k; ++j) out(i, j) = levels(i, best[std::size_t(j)]);
  }
  return out;
}

std::string_view to_string(LevelOrder order) { return order == LevelOrder::Sorted ? "sorted" : "diabatic"; }

RVector BranchPolynomials::predict(double dt) const
{
  const Index k = Index(negative.size());
  RVector out(k);
  for (Index j = 0; j < k; ++j) {
    const double lo = polyeval(negative[std::size_t(j)], dt), hi = polyeval(positive[std::size_t(j)], dt);
    out(j) = dt < 0.0 ? lo : dt > 0.0 ? hi : 0.5 * (lo + hi);
  }
  return out;
}

BranchPolynomials fit_branch_polynomials(const RVector& dt, const RMatrix& levels, LevelOrder order, Index degree)
{
  require(dt.size() == levels.rows(), ErrorCode::LengthMismatch, "dt and level table lengths differ");
  BranchPolynomials out;
  out.order = order;
  for (int sign : {-1, 1}) {
    // points ordered from dt = 0 outwards so relabeling follows the branch
    std::vector<Index> rows;
    for (Index i = 0; i < dt.size(); ++i)
      if ((sign < 0 && dt(i) < 0.0) || (sign > 0 && dt(i) > 0.0)) rows.push_back(i);
    require(rows.size() >= 2, ErrorCode::InvalidArgument, "each dt branch needs at least two points");
    std::sort(rows.begin(), rows.end(), [&](Index a, Index b) { return std::abs(dt(a)) < std::abs(dt(b)); });
    RVector x(Index(rows.size()));
    RMatrix y(Index(rows.size()), levels.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      x(Index(r)) = dt(rows[r]);
      y.row(Index(r)) = levels.row(rows[r]);
    }
    if (order == LevelOrder::Diabatic) y = diabatic_relabel(y);
    const Index deg = degree < 0 ? x.size() - 1 : degree;
    auto& branch = sign < 0 ? out.negative : out.positive;
    for (Index j = 0; j < levels.cols(); ++j) branch.push_back(polyfit(x, y.col(j), deg));
  }
  return out;
}

// ---------------------------------------------------------------------------

ECReducedModel ec_from_snapshots(const HermitianMatrix& h0, const HermitianMatrix& h1, const CMatrix& snapshots)
{
  require(snapshots.cols() >= 1, ErrorCode::InvalidArgument, "eigenvector continuation needs snapshots");
  require(h0.dim() == h1.dim() && snapshots.rows() == h0.dim(), ErrorCode::DimensionMismatch,
          "snapshot and Hamiltonian dimensions differ");
  ECReducedModel out;
  out.snapshots = snapshots;
  out.h0 = snapshots.adjoint() * h0.matrix() * snapshots;
  out.h1 = snapshots.adjoint() * h1.matrix() * snapshots;
  out.overlap = snapshots.adjoint() * snapshots;
  return out;
}

ECReducedModel ec_build(const HermitianMatrix& h0, const HermitianMatrix& h1, const RVector& snapshot_points)
{
  require(snapshot_points.size() >= 1, ErrorCode::InvalidArgument, "eigenvector continuation needs snapshots");
  CMatrix snaps(h0.dim(), snapshot_points.size());
  for (Index s = 0; s < snapshot_points.size(); ++s)
    snaps.col(s) = eigh(h0 + snapshot_points(s) * h1).eigenvectors.col(0);
  return ec_from_snapshots(h0, h1, snaps);
}

double ec_energy(const ECReducedModel& model, double c)
{
  const HermitianMatrix s = HermitianMatrix::hermitize(model.overlap);
  const EigenDecomposition se = eigh(s);
  const double cutoff = 1e-10 * se.eigenvalues.maxCoeff();
  std::vector<Index> keep;
  for (Index i = 0; i < se.eigenvalues.size(); ++i)
    if (se.eigenvalues(i) > cutoff) keep.push_back(i);
  require(!keep.empty(), ErrorCode::NumericalFailure, "snapshot overlap matrix is numerically zero");
  CMatrix x(s.dim(), Index(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j)
    x.col(Index(j)) = se.eigenvectors.col(keep[j]) / std::sqrt(se.eigenvalues(keep[j]));
  const CMatrix h = model.h0 + c * model.h1;
  return eigvalsh(HermitianMatrix::hermitize(x.adjoint() * h * x))(0);
}

// ---------------------------------------------------------------------------

double knn_error(const RMatrix& query, const std::vector<int>& query_labels, const RMatrix& reference,
                 const std::vector<int>& reference_labels, bool exclude_self)
{
  require(query.rows() > 0 && reference.rows() > (exclude_self ? 1 : 0), ErrorCode::InvalidArgument,
          "nearest-neighbour error needs nonempty sets");
  require(Index(query_labels.size()) == query.rows() && Index(reference_labels.size()) == reference.rows(),
          ErrorCode::LengthMismatch, "label counts differ from point counts");
  require(query.cols() == reference.cols(), ErrorCode::DimensionMismatch, "query and reference dimensions differ");
  Index wrong = 0;
  for (Index q = 0; q < query.rows(); ++q) {
    double best = std::numeric_limits<double>::infinity();
    Index arg = -1;
    for (Index r = 0; r < reference.rows(); ++r) {
      if (exclude_self && r == q) continue;
      const double d = (reference.row(r) - query.row(q)).squaredNorm();
      if (d < best) {
        best = d;
        arg = r;
      }
    }
    if (reference_labels[std::size_t(arg)] != query_labels[std::size_t(q)]) ++wrong;
  }
  return 100.0 * double(wrong) / double(query.rows());
}

double knn_error(const RMatrix& points, const std::vector<int>& labels)
{
  return knn_error(points, labels, points, labels, true);
}

ErrorReport error_report(const RVector& predictions, const RVector& truths)
{
  require(predictions.size() == truths.size(), ErrorCode::LengthMismatch, "prediction and truth lengths differ");
  ErrorReport out;
  out.truth = truths;
  out.prediction = predictions;
  out.abs_err = (predictions - truths).cwiseAbs();
  out.rel_err = out.abs_err.array() / truths.cwiseAbs().array().max(1e-12);
  if (truths.size() == 0) return out;
  auto median = [](RVector v) {
    std::sort(v.data(), v.data() + v.size());
    const Index n = v.size();
    return n % 2 ? v(n / 2) : 0.5 * (v(n / 2 - 1) + v(n / 2));
  };
  out.max_abs = out.abs_err.maxCoeff();
  out.max_rel = out.rel_err.maxCoeff();
  out.median_abs = median(out.abs_err);
  out.median_rel = median(out.rel_err);
  return out;
}

}  // namespace pmm
