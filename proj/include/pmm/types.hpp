#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <complex>

namespace pmm {

using Index = Eigen::Index;
using Complex = std::complex<double>;

using RVector = Eigen::VectorXd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using CMatrix = Eigen::MatrixXcd;

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Floor applied to every norm-relative tolerance.
inline constexpr double kAbsoluteFloor = 1e-14;

/// rel * scale, never below kAbsoluteFloor.
inline double scaled_tolerance(double rel, double scale)
{
  return std::max(rel * scale, kAbsoluteFloor);
}

}  // namespace pmm
