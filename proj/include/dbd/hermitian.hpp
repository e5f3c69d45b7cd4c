#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <type_traits>

#include <Eigen/Dense>

namespace dbd {

class NumericalTrouble : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename T>
struct is_complex : std::false_type {};
template <typename T>
struct is_complex<std::complex<T>> : std::true_type {};

/// Real parameterization of an n x n Hermitian (or real symmetric) matrix.
/// Columns of the upper triangle are stored in order; an off-diagonal entry
/// occupies sqrt(2) Re and, for complex scalars, sqrt(2) Im. The scaling makes
/// the Euclidean inner product of parameter vectors equal the Frobenius inner
/// product of the matrices.
template <typename Scalar>
struct SvecLayout {
  static constexpr bool kComplex = is_complex<Scalar>::value;

  static constexpr int size(int n) { return kComplex ? n * n : n * (n + 1) / 2; }
  static constexpr int diag(int j) { return kComplex ? j * j + 2 * j : j * (j + 1) / 2 + j; }
  /// Real part slot of entry (i, j), i < j.
  static constexpr int re(int i, int j) { return kComplex ? j * j + 2 * i : j * (j + 1) / 2 + i; }
  /// Imaginary part slot of entry (i, j), i < j; complex scalars only.
  static constexpr int im(int i, int j) { return j * j + 2 * i + 1; }
};

inline constexpr double kSqrt2 = 1.4142135623730950488016887242097;

template <typename Derived, typename OutVec>
void pack_hermitian(const Eigen::MatrixBase<Derived>& H, OutVec&& out) {
  using Scalar = typename Derived::Scalar;
  using Layout = SvecLayout<Scalar>;
  const int n = static_cast<int>(H.rows());
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < j; ++i) {
      // average the two triangles so slightly non-Hermitian input is symmetrized
      const Scalar h = (H(i, j) + Eigen::numext::conj(H(j, i))) * 0.5;
      out[Layout::re(i, j)] = kSqrt2 * Eigen::numext::real(h);
      if constexpr (Layout::kComplex) out[Layout::im(i, j)] = kSqrt2 * Eigen::numext::imag(h);
    }
    out[Layout::diag(j)] = Eigen::numext::real(H(j, j));
  }
}

template <typename MatrixType, typename InVec>
MatrixType unpack_hermitian(const InVec& in, int n) {
  using Scalar = typename MatrixType::Scalar;
  using Layout = SvecLayout<Scalar>;
  MatrixType H(n, n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < j; ++i) {
      Scalar h;
      if constexpr (Layout::kComplex) {
        h = Scalar(in[Layout::re(i, j)], in[Layout::im(i, j)]) / kSqrt2;
      } else {
        h = in[Layout::re(i, j)] / kSqrt2;
      }
      H(i, j) = h;
      H(j, i) = Eigen::numext::conj(h);
    }
    H(j, j) = Scalar(in[Layout::diag(j)]);
  }
  return H;
}

/// Frobenius-nearest positive semidefinite matrix. The input is symmetrized
/// first; negative eigenvalues are clipped to zero.
template <typename Derived>
typename Derived::PlainObject psd_project(const Eigen::MatrixBase<Derived>& H,
                                          double* min_eigenvalue = nullptr) {
  using Matrix = typename Derived::PlainObject;
  const Matrix S = (H + H.adjoint()) * 0.5;
  Eigen::SelfAdjointEigenSolver<Matrix> es(S);
  if (es.info() != Eigen::Success) throw NumericalTrouble("eigendecomposition failed in psd_project");
  const auto& w = es.eigenvalues();
  const auto& V = es.eigenvectors();
  const Eigen::Index n = w.size();
  if (min_eigenvalue != nullptr) *min_eigenvalue = n > 0 ? w(0) : 0.0;
  // eigenvalues ascend; count negatives and rebuild from the smaller side
  Eigen::Index neg = 0;
  while (neg < n && w(neg) < 0.0) ++neg;
  if (neg == 0) return S;
  if (neg == n) return Matrix::Zero(n, n);
  if (neg <= n - neg) {
    const auto Vn = V.leftCols(neg);
    Matrix out = S;
    out.noalias() -= Vn * w.head(neg).asDiagonal() * Vn.adjoint();
    return out;
  }
  const auto Vp = V.rightCols(n - neg);
  Matrix out = Vp * w.tail(n - neg).asDiagonal() * Vp.adjoint();
  return out;
}

/// Smallest eigenvalue of the Hermitian part of H.
template <typename Derived>
double min_eigenvalue(const Eigen::MatrixBase<Derived>& H) {
  using Matrix = typename Derived::PlainObject;
  const Matrix S = (H + H.adjoint()) * 0.5;
  Eigen::SelfAdjointEigenSolver<Matrix> es(S, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalTrouble("eigendecomposition failed");
  return es.eigenvalues().size() > 0 ? es.eigenvalues()(0) : 0.0;
}

}  // namespace dbd
