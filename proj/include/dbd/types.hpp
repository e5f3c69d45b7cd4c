#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace dbd {

template <typename Real>
using Complex = std::complex<Real>;

template <typename Real>
using ComplexVectorT = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, 1>;

template <typename Real>
using ComplexMatrixT = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, Eigen::Dynamic>;

using cdouble = std::complex<double>;
using ComplexVector = ComplexVectorT<double>;
using ComplexMatrix = ComplexMatrixT<double>;
using RealVector = Eigen::VectorXd;
using RealMatrix = Eigen::MatrixXd;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

/// Raised for out-of-range indices and parameters outside their domain.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised when matrix or vector dimensions disagree with the scene.
class ShapeMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A point (delay, Doppler) on the normalized torus [0,1)^2.
struct DelayDoppler {
  double tau = 0.0;
  double nu = 0.0;

  friend bool operator==(const DelayDoppler&, const DelayDoppler&) = default;
};

/// Signed distance from a to b on the unit circle, in [-0.5, 0.5).
inline double wrapped_difference(double a, double b) {
  double d = a - b;
  d -= std::floor(d + 0.5);
  return d;
}

/// Maps any real onto [0, 1).
inline double wrap_unit(double x) {
  double w = x - std::floor(x);
  return w >= 1.0 ? 0.0 : w;
}

inline double torus_distance_l2(const DelayDoppler& a, const DelayDoppler& b) {
  return std::hypot(wrapped_difference(a.tau, b.tau), wrapped_difference(a.nu, b.nu));
}

inline double torus_distance_linf(const DelayDoppler& a, const DelayDoppler& b) {
  return std::max(std::abs(wrapped_difference(a.tau, b.tau)),
                  std::abs(wrapped_difference(a.nu, b.nu)));
}

}  // namespace dbd
