#pragma once

#include "pmm/hermitian.hpp"

#include <string_view>
#include <vector>

namespace pmm {

// ---------------------------------------------------------------------------
// Natural cubic spline

struct SplineModel {
  RVector knots;
  RVector values;
  RVector second;  ///< second derivatives at the knots; zero at both ends
};

SplineModel spline_fit(const RVector& x, const RVector& y);
/// Cubic inside the knot range, linear continuation outside it.
double spline_eval(const SplineModel& model, double x);
RVector spline_eval(const SplineModel& model, const RVector& x);

// ---------------------------------------------------------------------------
// Polynomial least squares

/// p(x) = Σ_k coeffs_k·((x − shift)/scale)^k
struct PolyModel {
  double shift = 0.0;
  double scale = 1.0;
  RVector coeffs;

  Index degree() const { return coeffs.size() - 1; }
  /// Coefficients of the same polynomial in powers of x.
  RVector monomial() const;
};

/// Least-squares fit on centred, scaled abscissae; warns when the fit is rank
/// deficient or leaves a residual far above the data scale.
PolyModel polyfit(const RVector& x, const RVector& y, Index degree);
double polyeval(const PolyModel& model, double x);
RVector polyeval(const PolyModel& model, const RVector& x);

/// Relabels the levels of a one-parameter scan (rows = points in order along x)
/// so each level continues smoothly: point i's permutation minimizes the
/// distance to a linear extrapolation of the two previous points.
RMatrix diabatic_relabel(const RMatrix& levels);

enum class LevelOrder { Sorted, Diabatic };
std::string_view to_string(LevelOrder order);

/// Per-level polynomials fitted separately on the dt < 0 and dt > 0 training
/// points (degree = points per branch − 1). Predictions at dt < 0 and dt > 0 use
/// their own branch; dt = 0 averages the two branch extrapolations.
struct BranchPolynomials {
  LevelOrder order = LevelOrder::Sorted;
  std::vector<PolyModel> negative;
  std::vector<PolyModel> positive;

  RVector predict(double dt) const;
};
BranchPolynomials fit_branch_polynomials(const RVector& dt, const RMatrix& levels, LevelOrder order,
                                         Index degree = -1);

// ---------------------------------------------------------------------------
// Eigenvector continuation

struct ECReducedModel {
  CMatrix snapshots;  ///< full-space ground vectors as columns
  CMatrix h0;         ///< Ṽ†H₀Ṽ
  CMatrix h1;         ///< Ṽ†H₁Ṽ
  CMatrix overlap;    ///< Ṽ†Ṽ
};

/// Ground-state snapshots of H₀ + c·H₁ at each point, projected.
ECReducedModel ec_build(const HermitianMatrix& h0, const HermitianMatrix& h1, const RVector& snapshot_points);
/// Same, from externally supplied snapshot columns.
ECReducedModel ec_from_snapshots(const HermitianMatrix& h0, const HermitianMatrix& h1, const CMatrix& snapshots);
/// Lowest generalized eigenvalue after discarding overlap directions below
/// 1e-10 of the largest overlap eigenvalue.
double ec_energy(const ECReducedModel& model, double c);

// ---------------------------------------------------------------------------
// Metrics

/// Percentage of query points whose nearest reference point (Euclidean) carries a
/// different label. With `exclude_self` the query set is the reference set and
/// each point skips itself.
double knn_error(const RMatrix& query, const std::vector<int>& query_labels, const RMatrix& reference,
                 const std::vector<int>& reference_labels, bool exclude_self = false);
double knn_error(const RMatrix& points, const std::vector<int>& labels);

struct ErrorReport {
  RVector truth;
  RVector prediction;
  RVector abs_err;
  RVector rel_err;  ///< |p − t| / max(|t|, 1e-12)
  double max_abs = 0.0;
  double median_abs = 0.0;
  double max_rel = 0.0;
  double median_rel = 0.0;
};
ErrorReport error_report(const RVector& predictions, const RVector& truths);

}  // namespace pmm
