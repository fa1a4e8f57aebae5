#include "pmm/hermitian.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numeric>
#include <sstream>

namespace pmm {

namespace {

void make_exact(CMatrix& m)
{
  const Index n = m.rows();
  for (Index a = 0; a < n; ++a) {
    m(a, a) = Complex(m(a, a).real(), 0.0);
    for (Index b = a + 1; b < n; ++b) m(b, a) = std::conj(m(a, b));
  }
}

std::string describe(const CMatrix& m)
{
  std::ostringstream os;
  os << "dim=" << m.rows() << ", frobenius=" << m.norm() << ", max|entry|=" << m.cwiseAbs().maxCoeff()
     << ", finite=" << (m.allFinite() ? "yes" : "no");
  return os.str();
}

// Largest-magnitude component real and positive; first index wins ties.
template <typename Vec>
void fix_phase(Vec&& v)
{
  Index best = 0;
  double best_mag = -1.0;
  for (Index a = 0; a < v.size(); ++a) {
    const double mag = std::abs(v(a));
    if (mag > best_mag) {
      best_mag = mag;
      best = a;
    }
  }
  if (best_mag <= 0.0) return;
  using Scalar = typename std::decay_t<Vec>::Scalar;
  if constexpr (Eigen::NumTraits<Scalar>::IsComplex) {
    const Complex phase = std::conj(v(best)) / best_mag;
    v *= phase;
    v(best) = Complex(std::abs(v(best)), 0.0);
  } else {
    if (v(best) < 0) v = -v;
  }
}

}  // namespace

HermitianMatrix::HermitianMatrix(Index dim) : m_(CMatrix::Zero(dim, dim)) {}

HermitianMatrix HermitianMatrix::from_dense(const CMatrix& m, double tol)
{
  require(m.rows() == m.cols(), ErrorCode::DimensionMismatch, "Hermitian matrix must be square");
  const double defect = (m - m.adjoint()).cwiseAbs().maxCoeff();
  const double limit = scaled_tolerance(tol, std::max(1.0, m.norm()));
  if (m.size() > 0 && defect > limit) {
    std::ostringstream os;
    os << "matrix is not Hermitian: max|M - M^H| = " << defect << " > " << limit;
    fail(ErrorCode::InvalidArgument, os.str());
  }
  CMatrix copy = m;
  make_exact(copy);
  return HermitianMatrix(std::move(copy));
}

HermitianMatrix HermitianMatrix::from_dense(const RMatrix& m, double tol)
{
  return from_dense(CMatrix(m.cast<Complex>()), tol);
}

HermitianMatrix HermitianMatrix::hermitize(const CMatrix& m)
{
  require(m.rows() == m.cols(), ErrorCode::DimensionMismatch, "Hermitian matrix must be square");
  CMatrix h = 0.5 * (m + m.adjoint());
  make_exact(h);
  return HermitianMatrix(std::move(h));
}

HermitianMatrix HermitianMatrix::identity(Index dim) { return HermitianMatrix(CMatrix::Identity(dim, dim)); }

HermitianMatrix HermitianMatrix::diagonal(const RVector& d)
{
  return HermitianMatrix(CMatrix(d.cast<Complex>().asDiagonal()));
}

bool HermitianMatrix::is_real() const
{
  for (Index j = 0; j < m_.cols(); ++j)
    for (Index i = 0; i < m_.rows(); ++i)
      if (m_(i, j).imag() != 0.0) return false;
  return true;
}

HermitianMatrix& HermitianMatrix::operator+=(const HermitianMatrix& other)
{
  require(dim() == other.dim(), ErrorCode::DimensionMismatch, "Hermitian sum dimension mismatch");
  m_ += other.m_;
  return *this;
}

HermitianMatrix& HermitianMatrix::operator-=(const HermitianMatrix& other)
{
  require(dim() == other.dim(), ErrorCode::DimensionMismatch, "Hermitian difference dimension mismatch");
  m_ -= other.m_;
  return *this;
}

HermitianMatrix& HermitianMatrix::operator*=(double s)
{
  m_ *= s;
  return *this;
}

// ---------------------------------------------------------------------------
// Packing

std::string_view to_string(PackMode mode)
{
  switch (mode) {
    case PackMode::ComplexHermitian: return "complex-hermitian";
    case PackMode::RealSymmetric: return "real-symmetric";
    case PackMode::RealDiagonal: return "real-diagonal";
  }
  return "unknown";
}

PackMode pack_mode_from_string(std::string_view name)
{
  if (name == "complex-hermitian") return PackMode::ComplexHermitian;
  if (name == "real-symmetric") return PackMode::RealSymmetric;
  if (name == "real-diagonal") return PackMode::RealDiagonal;
  fail(ErrorCode::InvalidArgument, "unknown pack mode '" + std::string(name) + "'");
}

Index packed_length(Index dim, PackMode mode)
{
  require(dim >= 0, ErrorCode::InvalidArgument, "negative dimension");
  switch (mode) {
    case PackMode::ComplexHermitian: return dim * dim;
    case PackMode::RealSymmetric: return dim * (dim + 1) / 2;
    case PackMode::RealDiagonal: return dim;
  }
  return 0;
}

PackedParams PackedParams::zeros(Index dim, PackMode mode)
{
  return PackedParams{dim, mode, RVector::Zero(packed_length(dim, mode))};
}

PackedParams pack(const HermitianMatrix& matrix, PackMode mode)
{
  const Index n = matrix.dim();
  const CMatrix& m = matrix.matrix();
  PackedParams out = PackedParams::zeros(n, mode);
  const double tol = scaled_tolerance(1e-12, matrix.norm());

  switch (mode) {
    case PackMode::RealDiagonal:
      for (Index a = 0; a < n; ++a) {
        for (Index b = a + 1; b < n; ++b)
          require(std::abs(m(a, b)) <= tol, ErrorCode::ModeMismatch,
                  "matrix has off-diagonal entries but mode is real-diagonal");
        out.values(a) = m(a, a).real();
      }
      break;
    case PackMode::RealSymmetric: {
      Index k = 0;
      for (Index a = 0; a < n; ++a) {
        for (Index b = a; b < n; ++b, ++k) {
          require(std::abs(m(a, b).imag()) <= tol, ErrorCode::ModeMismatch,
                  "matrix has complex off-diagonals but mode is real-symmetric");
          out.values(k) = m(a, b).real();
        }
      }
      break;
    }
    case PackMode::ComplexHermitian: {
      for (Index a = 0; a < n; ++a) out.values(a) = m(a, a).real();
      Index k = n;
      for (Index a = 0; a < n; ++a) {
        for (Index b = a + 1; b < n; ++b, k += 2) {
          out.values(k) = m(a, b).real();
          out.values(k + 1) = m(a, b).imag();
        }
      }
      break;
    }
  }
  return out;
}

HermitianMatrix unpack(const PackedParams& params)
{
  const Index expected = packed_length(params.dim, params.mode);
  if (params.size() != expected) {
    std::ostringstream os;
    os << "packed length " << params.size() << " does not match " << expected << " for dim " << params.dim
       << " in mode " << to_string(params.mode);
    fail(ErrorCode::LengthMismatch, os.str());
  }
  CMatrix m = CMatrix::Zero(params.dim, params.dim);
  accumulate_unpacked(m, params);
  // accumulate_unpacked writes both triangles from the same value, so m is exact.
  return HermitianMatrix::hermitize(m);
}

template <typename Mat>
static RVector slot_contraction_impl(const Mat& g, Index n, PackMode mode)
{
  require(g.rows() == n && g.cols() == n, ErrorCode::DimensionMismatch, "slot contraction dimension mismatch");
  RVector out(packed_length(n, mode));
  auto re = [](auto z) { return std::real(z); };
  auto im = [](auto z) { return std::imag(z); };
  switch (mode) {
    case PackMode::RealDiagonal:
      for (Index a = 0; a < n; ++a) out(a) = re(g(a, a));
      break;
    case PackMode::RealSymmetric: {
      Index k = 0;
      for (Index a = 0; a < n; ++a) {
        out(k++) = re(g(a, a));
        for (Index b = a + 1; b < n; ++b) out(k++) = re(g(a, b)) + re(g(b, a));
      }
      break;
    }
    case PackMode::ComplexHermitian: {
      for (Index a = 0; a < n; ++a) out(a) = re(g(a, a));
      Index k = n;
      for (Index a = 0; a < n; ++a) {
        for (Index b = a + 1; b < n; ++b, k += 2) {
          // E_re has 1 at (a,b),(b,a); E_im has i at (a,b), −i at (b,a).
          out(k) = re(g(a, b)) + re(g(b, a));
          out(k + 1) = im(g(a, b)) - im(g(b, a));
        }
      }
      break;
    }
  }
  return out;
}

RVector slot_contraction(const CMatrix& g, Index dim, PackMode mode) { return slot_contraction_impl(g, dim, mode); }
RVector slot_contraction(const RMatrix& g, Index dim, PackMode mode) { return slot_contraction_impl(g, dim, mode); }

HermitianMatrix slot_basis(Index dim, PackMode mode, Index slot)
{
  PackedParams p = PackedParams::zeros(dim, mode);
  require(slot >= 0 && slot < p.size(), ErrorCode::InvalidArgument, "slot index out of range");
  p.values(slot) = 1.0;
  return unpack(p);
}

// ---------------------------------------------------------------------------
// Spectral factorizations

RealEigenDecomposition eigh_real(const RMatrix& symmetric)
{
  Eigen::SelfAdjointEigenSolver<RMatrix> solver(symmetric);
  if (solver.info() != Eigen::Success) {
    fail(ErrorCode::ConvergenceFailure, "eigh failed: " + describe(symmetric.cast<Complex>()));
  }
  RealEigenDecomposition out{solver.eigenvalues(), solver.eigenvectors()};
  for (Index j = 0; j < out.eigenvectors.cols(); ++j) fix_phase(out.eigenvectors.col(j));
  return out;
}

EigenDecomposition eigh(const HermitianMatrix& m)
{
  if (m.dim() == 0) return {};
  if (m.is_real()) {
    auto real = eigh_real(m.matrix().real());
    return {std::move(real.eigenvalues), real.eigenvectors.cast<Complex>()};
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(m.matrix());
  if (solver.info() != Eigen::Success) fail(ErrorCode::ConvergenceFailure, "eigh failed: " + describe(m.matrix()));
  EigenDecomposition out{solver.eigenvalues(), solver.eigenvectors()};
  for (Index j = 0; j < out.eigenvectors.cols(); ++j) fix_phase(out.eigenvectors.col(j));
  return out;
}

RVector eigvalsh(const HermitianMatrix& m)
{
  if (m.dim() == 0) return {};
  if (m.is_real()) {
    Eigen::SelfAdjointEigenSolver<RMatrix> solver(m.matrix().real(), Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) fail(ErrorCode::ConvergenceFailure, "eigh failed: " + describe(m.matrix()));
    return solver.eigenvalues();
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(m.matrix(), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) fail(ErrorCode::ConvergenceFailure, "eigh failed: " + describe(m.matrix()));
  return solver.eigenvalues();
}

void sort_complex(CVector& values)
{
  std::sort(values.begin(), values.end(), [](const Complex& a, const Complex& b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });
}

CVector eig_general(const CMatrix& m)
{
  require(m.rows() == m.cols(), ErrorCode::DimensionMismatch, "eig_general needs a square matrix");
  if (m.size() == 0) return {};
  Eigen::ComplexEigenSolver<CMatrix> solver(m, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) fail(ErrorCode::ConvergenceFailure, "eig_general failed: " + describe(m));
  CVector values = solver.eigenvalues();
  sort_complex(values);
  return values;
}

// ---------------------------------------------------------------------------
// Unitaries

double unitarity_defect(const CMatrix& u)
{
  return (u.adjoint() * u - CMatrix::Identity(u.cols(), u.cols())).norm();
}

UnitaryMatrix UnitaryMatrix::from_dense(CMatrix u, double tol)
{
  require(u.rows() == u.cols(), ErrorCode::DimensionMismatch, "unitary must be square");
  const double defect = unitarity_defect(u);
  if (!(defect <= tol)) {
    std::ostringstream os;
    os << "matrix is not unitary: |U^H U - I|_F = " << defect << " > " << tol;
    fail(ErrorCode::NonUnitary, os.str());
  }
  return UnitaryMatrix(std::move(u));
}

UnitaryMatrix UnitaryMatrix::identity(Index dim) { return UnitaryMatrix(CMatrix::Identity(dim, dim)); }

UnitaryMatrix operator*(const UnitaryMatrix& a, const UnitaryMatrix& b)
{
  require(a.dim() == b.dim(), ErrorCode::DimensionMismatch, "unitary product dimension mismatch");
  return UnitaryMatrix(a.u_ * b.u_);
}

UnitaryMatrix expm_hermitian(const EigenDecomposition& eig, double t)
{
  const CVector phases = (eig.eigenvalues * (-t)).unaryExpr([](double x) { return std::polar(1.0, x); });
  CMatrix u = eig.eigenvectors * phases.asDiagonal() * eig.eigenvectors.adjoint();
  return UnitaryMatrix::from_dense(std::move(u));
}

UnitaryMatrix expm_hermitian(const HermitianMatrix& m, double t)
{
  if (t == 0.0) return UnitaryMatrix::identity(m.dim());
  return expm_hermitian(eigh(m), t);
}

EigenphaseDecomposition eigenphase_decomposition(const UnitaryMatrix& u, double dt)
{
  require(dt != 0.0, ErrorCode::InvalidArgument, "eigenphases need dt != 0");
  const double defect = unitarity_defect(u.matrix());
  if (defect > 1e-8) {
    std::ostringstream os;
    os << "eigenphases: input is not unitary (|U^H U - I|_F = " << defect << ")";
    fail(ErrorCode::NonUnitary, os.str());
  }
  const Index n = u.dim();
  EigenphaseDecomposition out;
  if (n == 0) return out;

  // A normal matrix has a diagonal Schur form, so the Schur vectors are orthonormal eigenvectors.
  Eigen::ComplexSchur<CMatrix> schur(u.matrix());
  if (schur.info() != Eigen::Success) fail(ErrorCode::ConvergenceFailure, "Schur decomposition of unitary failed");
  const CMatrix& t = schur.matrixT();
  const CMatrix& z = schur.matrixU();

  RVector energies(n);
  for (Index a = 0; a < n; ++a) energies(a) = -std::arg(t(a, a)) / dt;
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return energies(a) < energies(b); });

  out.energies.resize(n);
  out.vectors.resize(n, n);
  out.phases.resize(n);
  for (Index j = 0; j < n; ++j) {
    const Index src = order[static_cast<std::size_t>(j)];
    out.energies(j) = energies(src);
    out.phases(j) = t(src, src) / std::abs(t(src, src));
    out.vectors.col(j) = z.col(src);
    fix_phase(out.vectors.col(j));
  }
  return out;
}

RVector eigenphases(const UnitaryMatrix& u, double dt) { return eigenphase_decomposition(u, dt).energies; }

}  // namespace pmm
