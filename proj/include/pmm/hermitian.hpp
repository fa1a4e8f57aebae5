#pragma once

#include "pmm/error.hpp"
#include "pmm/types.hpp"

#include <span>
#include <string_view>

namespace pmm {

/// Dense n×n complex matrix equal to its conjugate transpose.
///
/// Every constructor leaves the stored entries exactly Hermitian: the strict lower
/// triangle is the conjugate of the upper one and the diagonal is real.
class HermitianMatrix {
 public:
  HermitianMatrix() = default;
  /// Zero matrix.
  explicit HermitianMatrix(Index dim);

  /// Validates that m is Hermitian to within tol·max(1, ‖m‖_F), then copies the
  /// upper triangle into the lower one so the result is exact.
  static HermitianMatrix from_dense(const CMatrix& m, double tol = 1e-12);
  static HermitianMatrix from_dense(const RMatrix& m, double tol = 1e-12);
  /// Orthogonal projection (m + m†)/2 without validation.
  static HermitianMatrix hermitize(const CMatrix& m);
  static HermitianMatrix identity(Index dim);
  static HermitianMatrix diagonal(const RVector& d);

  Index dim() const { return m_.rows(); }
  const CMatrix& matrix() const { return m_; }
  Complex operator()(Index a, Index b) const { return m_(a, b); }
  double norm() const { return m_.norm(); }
  /// True when every entry has an exactly zero imaginary part.
  bool is_real() const;

  HermitianMatrix& operator+=(const HermitianMatrix& other);
  HermitianMatrix& operator-=(const HermitianMatrix& other);
  HermitianMatrix& operator*=(double s);

  friend HermitianMatrix operator+(HermitianMatrix a, const HermitianMatrix& b) { return a += b; }
  friend HermitianMatrix operator-(HermitianMatrix a, const HermitianMatrix& b) { return a -= b; }
  friend HermitianMatrix operator*(HermitianMatrix a, double s) { return a *= s; }
  friend HermitianMatrix operator*(double s, HermitianMatrix a) { return a *= s; }

 private:
  explicit HermitianMatrix(CMatrix m) : m_(std::move(m)) {}
  CMatrix m_;
};

enum class PackMode { ComplexHermitian, RealSymmetric, RealDiagonal };

std::string_view to_string(PackMode mode);
PackMode pack_mode_from_string(std::string_view name);

/// Number of real values needed to store an n×n matrix in the given mode.
Index packed_length(Index dim, PackMode mode);

/// Flat real parameterization of a Hermitian matrix.
///
/// ComplexHermitian: n diagonal reals, then the strict upper triangle row by row
/// as (re, im) pairs. RealSymmetric: the upper triangle including the diagonal,
/// row by row. RealDiagonal: the n diagonal entries.
struct PackedParams {
  Index dim = 0;
  PackMode mode = PackMode::ComplexHermitian;
  RVector values;

  static PackedParams zeros(Index dim, PackMode mode);
  Index size() const { return values.size(); }
};

PackedParams pack(const HermitianMatrix& matrix, PackMode mode);
HermitianMatrix unpack(const PackedParams& params);

/// Index of entry (a, b), a <= b, in the row-major upper triangle incl. diagonal.
inline Index upper_triangle_index(Index dim, Index a, Index b)
{
  return a * dim - a * (a - 1) / 2 + (b - a);
}

/// target += scale · unpack(dim, mode, values), touching both triangles.
///
/// Works for real targets when mode is not ComplexHermitian.
template <typename Scalar>
void accumulate_unpacked(DenseMatrix<Scalar>& target, Index dim, PackMode mode,
                         std::span<const double> values, double scale = 1.0)
{
  switch (mode) {
    case PackMode::RealDiagonal:
      for (Index a = 0; a < dim; ++a) target(a, a) += scale * values[a];
      break;
    case PackMode::RealSymmetric: {
      Index k = 0;
      for (Index a = 0; a < dim; ++a) {
        target(a, a) += scale * values[k++];
        for (Index b = a + 1; b < dim; ++b, ++k) {
          const double v = scale * values[k];
          target(a, b) += v;
          target(b, a) += v;
        }
      }
      break;
    }
    case PackMode::ComplexHermitian: {
      if constexpr (Eigen::NumTraits<Scalar>::IsComplex) {
        for (Index a = 0; a < dim; ++a) target(a, a) += scale * values[a];
        Index k = dim;
        for (Index a = 0; a < dim; ++a) {
          for (Index b = a + 1; b < dim; ++b, k += 2) {
            const Complex v(scale * values[k], scale * values[k + 1]);
            target(a, b) += v;
            target(b, a) += std::conj(v);
          }
        }
      } else {
        fail(ErrorCode::ModeMismatch, "complex-hermitian parameters need a complex target");
      }
      break;
    }
  }
}

inline void accumulate_unpacked(CMatrix& target, const PackedParams& p, double scale = 1.0)
{
  accumulate_unpacked<Complex>(target, p.dim, p.mode, {p.values.data(), static_cast<std::size_t>(p.size())},
                               scale);
}

/// Adjoint of unpack: returns Re tr(G·E_θ) for every packed slot θ, where E_θ is the
/// derivative of unpack with respect to that slot. G may be any square complex matrix.
RVector slot_contraction(const CMatrix& g, Index dim, PackMode mode);
RVector slot_contraction(const RMatrix& g, Index dim, PackMode mode);

/// E_θ: the Hermitian matrix obtained by unpacking the unit vector at `slot`.
HermitianMatrix slot_basis(Index dim, PackMode mode, Index slot);

/// Ascending spectral factorization M = V·diag(λ)·V†.
///
/// Each eigenvector column is phased so its largest-magnitude component is real
/// and positive (ties go to the lowest index). The convention is arbitrary; code
/// comparing eigenvectors should not rely on it across degenerate subspaces.
struct EigenDecomposition {
  RVector eigenvalues;
  CMatrix eigenvectors;
};

EigenDecomposition eigh(const HermitianMatrix& m);
/// Eigenvalues only.
RVector eigvalsh(const HermitianMatrix& m);

/// Real-symmetric fast path used by the embedding loss.
struct RealEigenDecomposition {
  RVector eigenvalues;
  RMatrix eigenvectors;
};
RealEigenDecomposition eigh_real(const RMatrix& symmetric);

/// Gap below which neighbouring eigenvalues count as degenerate: 1e-9·‖M‖_F.
inline double degeneracy_threshold(double frobenius_norm) { return scaled_tolerance(1e-9, frobenius_norm); }

/// Ascending real part, ties broken by ascending imaginary part.
void sort_complex(CVector& values);

/// Eigenvalues of an arbitrary square complex matrix, ordered by sort_complex.
CVector eig_general(const CMatrix& m);

/// Square complex matrix with ‖U†U − I‖_F ≤ 1e-10.
class UnitaryMatrix {
 public:
  UnitaryMatrix() = default;
  static UnitaryMatrix from_dense(CMatrix u, double tol = 1e-10);
  static UnitaryMatrix identity(Index dim);

  Index dim() const { return u_.rows(); }
  const CMatrix& matrix() const { return u_; }

  friend UnitaryMatrix operator*(const UnitaryMatrix& a, const UnitaryMatrix& b);

 private:
  explicit UnitaryMatrix(CMatrix u) : u_(std::move(u)) {}
  CMatrix u_;
};

double unitarity_defect(const CMatrix& u);

/// exp(−i·M·t) via the eigendecomposition of M.
UnitaryMatrix expm_hermitian(const HermitianMatrix& m, double t);
/// Same, reusing a precomputed decomposition of M.
UnitaryMatrix expm_hermitian(const EigenDecomposition& eig, double t);

/// Eigenpairs of a unitary read as energies: U·w = e^{−i·E·dt}·w with arg in (−π, π].
struct EigenphaseDecomposition {
  RVector energies;   ///< ascending
  CMatrix vectors;    ///< orthonormal columns aligned with energies
  CVector phases;     ///< unit-modulus eigenvalues aligned with energies
};

/// Recovers E = −arg(μ)/dt for each eigenvalue μ of U. Faithful only when every
/// |E·dt| < π; the caller owns that contract.
RVector eigenphases(const UnitaryMatrix& u, double dt);
EigenphaseDecomposition eigenphase_decomposition(const UnitaryMatrix& u, double dt);

}  // namespace pmm
