#pragma once

#include "pmm/random.hpp"
#include "pmm/hermitian.hpp"

#include <doctest.h>

namespace pmm::test {

inline CMatrix random_complex(Index n, Rng& rng)
{
  CMatrix m(n, n);
  for (Index a = 0; a < n; ++a)
    for (Index b = 0; b < n; ++b) m(a, b) = Complex(rng.normal(), rng.normal());
  return m;
}

inline HermitianMatrix random_hermitian(Index n, Rng& rng) { return HermitianMatrix::hermitize(random_complex(n, rng)); }

inline PackedParams random_packed(Index n, PackMode mode, Rng& rng, double sd = 1.0)
{
  PackedParams p = PackedParams::zeros(n, mode);
  for (Index i = 0; i < p.size(); ++i) p.values(i) = rng.normal(0.0, sd);
  return p;
}

inline RVector random_vector(Index n, Rng& rng)
{
  RVector v(n);
  for (Index i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

inline CMatrix pauli_x() { return (CMatrix(2, 2) << 0, 1, 1, 0).finished(); }
inline CMatrix pauli_y() { return (CMatrix(2, 2) << 0, Complex(0, -1), Complex(0, 1), 0).finished(); }
inline CMatrix pauli_z() { return (CMatrix(2, 2) << 1, 0, 0, -1).finished(); }

inline HermitianMatrix herm(const CMatrix& m) { return HermitianMatrix::from_dense(m); }

}  // namespace pmm::test
