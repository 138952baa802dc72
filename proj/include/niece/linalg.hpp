#pragma once

// Dense symmetric linear algebra shared by the envelope estimators: symmetric
// eigendecomposition with a fixed sign convention, subspace distances, Gram-Schmidt
// orthonormalization and 1/n covariance estimates. Everything is templated on the
// scalar type and accepts arbitrary Eigen expressions.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "niece/error.hpp"

namespace niece {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;

/// Dense real symmetric matrix. The input is symmetrized as (A + A^T) / 2 so the
/// stored entries are exactly symmetric.
template <typename Scalar>
class SymmetricMatrix {
 public:
  SymmetricMatrix() = default;

  template <typename Derived>
  explicit SymmetricMatrix(const Eigen::MatrixBase<Derived>& a) {
    if (a.rows() != a.cols()) {
      throw DimensionError("symmetric matrix must be square, got " + std::to_string(a.rows()) +
                           "x" + std::to_string(a.cols()));
    }
    if (!a.allFinite()) throw PreconditionError("symmetric matrix has non-finite entries");
    entries_ = (a + a.transpose()) / Scalar(2);
  }

  Index dim() const { return entries_.rows(); }
  const Matrix<Scalar>& matrix() const { return entries_; }
  Scalar operator()(Index i, Index j) const { return entries_(i, j); }

 private:
  Matrix<Scalar> entries_;
};

/// Leading eigenpairs of a symmetric matrix, eigenvalues in descending order.
template <typename Scalar>
struct EigenSystem {
  Vector<Scalar> values;
  Matrix<Scalar> vectors;  // p x d, orthonormal columns

  Index size() const { return values.size(); }
};

/// p x u matrix with orthonormal columns spanning a subspace.
template <typename Scalar>
class Basis {
 public:
  Basis() = default;

  /// Wraps `m`, checking orthonormality of its columns to within `tol`.
  template <typename Derived>
  static Basis from_orthonormal(const Eigen::MatrixBase<Derived>& m, Scalar tol = Scalar(1e-10)) {
    Basis b;
    b.m_ = m;
    const Matrix<Scalar> gram = b.m_.transpose() * b.m_;
    const Scalar err =
        (gram - Matrix<Scalar>::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
    if (b.m_.cols() > 0 && !(err <= tol)) {
      throw PreconditionError("basis columns are not orthonormal (max |Q^T Q - I| = " +
                              std::to_string(static_cast<double>(err)) + ")");
    }
    return b;
  }

  const Matrix<Scalar>& matrix() const { return m_; }
  Index rows() const { return m_.rows(); }
  Index cols() const { return m_.cols(); }
  Matrix<Scalar> projector() const { return m_ * m_.transpose(); }

 private:
  Matrix<Scalar> m_;
};

using SymmetricMatrixd = SymmetricMatrix<double>;
using EigenSystemd = EigenSystem<double>;
using Basisd = Basis<double>;

/// Flips column signs so that the entry of largest magnitude in each column is
/// positive; among equal magnitudes the lowest row index decides.
template <typename Derived>
void apply_sign_convention(Eigen::MatrixBase<Derived>& v) {
  for (Index j = 0; j < v.cols(); ++j) {
    Index arg = 0;
    typename Derived::Scalar best(-1);
    for (Index i = 0; i < v.rows(); ++i) {
      const auto a = std::abs(v(i, j));
      if (a > best) {
        best = a;
        arg = i;
      }
    }
    if (v.rows() > 0 && v(arg, j) < 0) v.col(j) = -v.col(j);
  }
}

/// Top-d eigenpairs of `s` (tridiagonalization + implicit symmetric QR).
template <typename Scalar>
EigenSystem<Scalar> sym_eigen(const SymmetricMatrix<Scalar>& s, Index d) {
  const Index p = s.dim();
  if (d < 1 || d > p) {
    throw PreconditionError("sym_eigen: requested " + std::to_string(d) +
                            " eigenpairs of a " + std::to_string(p) + "x" + std::to_string(p) +
                            " matrix");
  }
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> solver(s.matrix());
  if (solver.info() != Eigen::Success) {
    throw NumericalError("symmetric eigensolver did not converge on a " + std::to_string(p) +
                         "x" + std::to_string(p) + " matrix");
  }
  EigenSystem<Scalar> out;
  out.values = solver.eigenvalues().tail(d).reverse();
  out.vectors = solver.eigenvectors().rightCols(d).rowwise().reverse();
  apply_sign_convention(out.vectors);
  return out;
}

/// ||P_A - P_B||_F, computed from the residuals (I - P_B) A and (I - P_A) B so that
/// nearly equal subspaces do not lose precision to cancellation.
template <typename Scalar>
Scalar projection_distance(const Basis<Scalar>& a, const Basis<Scalar>& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError("projection_distance: row dimensions " + std::to_string(a.rows()) +
                         " and " + std::to_string(b.rows()) + " differ");
  }
  const auto& A = a.matrix();
  const auto& B = b.matrix();
  const Matrix<Scalar> ra = A - B * (B.transpose() * A);
  const Matrix<Scalar> rb = B - A * (A.transpose() * B);
  return std::sqrt(ra.squaredNorm() + rb.squaredNorm());
}

/// Sines of the principal angles between span(A) and span(B), ascending (so that the
/// matching cosines, the singular values of A^T B, are descending).
template <typename Scalar>
Vector<Scalar> principal_sines(const Basis<Scalar>& a, const Basis<Scalar>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError("principal_sines: bases must have equal shapes");
  }
  const auto& A = a.matrix();
  const auto& B = b.matrix();
  const Matrix<Scalar> r = A - B * (B.transpose() * A);
  Eigen::JacobiSVD<Matrix<Scalar>> svd(r);
  Vector<Scalar> s = svd.singularValues();
  std::sort(s.data(), s.data() + s.size());
  return s;
}

/// Modified Gram-Schmidt (with one re-orthogonalization pass) in column order,
/// followed by the sign convention. Throws when a column is numerically dependent on
/// its predecessors.
template <typename Derived>
Basis<typename Derived::Scalar> orthonormalize(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  Matrix<Scalar> q = v;
  if (!q.allFinite()) throw PreconditionError("orthonormalize: non-finite input");
  Scalar scale(0);
  for (Index j = 0; j < q.cols(); ++j) scale = std::max(scale, q.col(j).norm());
  for (Index j = 0; j < q.cols(); ++j) {
    for (int pass = 0; pass < 2; ++pass) {
      for (Index k = 0; k < j; ++k) q.col(j) -= q.col(k).dot(q.col(j)) * q.col(k);
    }
    const Scalar nrm = q.col(j).norm();
    if (!(nrm > Scalar(1e-10) * scale)) {
      throw NumericalError("orthonormalize: column " + std::to_string(j) +
                           " is linearly dependent on the preceding columns");
    }
    q.col(j) /= nrm;
  }
  apply_sign_convention(q);
  return Basis<Scalar>::from_orthonormal(q, Scalar(1e-10));
}

template <typename Derived>
Matrix<typename Derived::Scalar> center_columns(const Eigen::MatrixBase<Derived>& x) {
  return x.rowwise() - x.colwise().mean();
}

/// (1/n) Xc^T Xc with Xc the column-centered data.
template <typename Derived>
SymmetricMatrix<typename Derived::Scalar> sample_covariance(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  if (x.rows() < 2) throw PreconditionError("sample_covariance needs at least 2 rows");
  const Matrix<Scalar> xc = center_columns(x);
  return SymmetricMatrix<Scalar>((xc.transpose() * xc) / Scalar(x.rows()));
}

/// (1/n) Xc^T Yc.
template <typename DX, typename DY>
Matrix<typename DX::Scalar> cross_covariance(const Eigen::MatrixBase<DX>& x,
                                             const Eigen::MatrixBase<DY>& y) {
  using Scalar = typename DX::Scalar;
  if (x.rows() != y.rows()) {
    throw DimensionError("cross_covariance: row counts " + std::to_string(x.rows()) + " and " +
                         std::to_string(y.rows()) + " differ");
  }
  if (x.rows() < 2) throw PreconditionError("cross_covariance needs at least 2 rows");
  const Matrix<Scalar> xc = center_columns(x);
  const Matrix<Scalar> yc = center_columns(y);
  return (xc.transpose() * yc) / Scalar(x.rows());
}

/// Positive semi-definite matrix held as U = F F^T. Quadratic forms and the operator
/// norm come from the factor, so a rank-q U over p variables costs O(pq).
template <typename Scalar>
class LowRankPsd {
 public:
  LowRankPsd() = default;
  template <typename Derived>
  explicit LowRankPsd(const Eigen::MatrixBase<Derived>& factor) : f_(factor) {
    if (!f_.allFinite()) throw PreconditionError("PSD factor has non-finite entries");
  }

  /// Factorizes a dense symmetric matrix. Eigenvalues down to -tol * ||U||_op are
  /// clipped to zero; anything more negative is rejected.
  static LowRankPsd from_symmetric(const SymmetricMatrix<Scalar>& u, Scalar tol = Scalar(1e-8)) {
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> solver(u.matrix());
    if (solver.info() != Eigen::Success) {
      throw NumericalError("symmetric eigensolver did not converge on a " +
                           std::to_string(u.dim()) + "x" + std::to_string(u.dim()) + " matrix");
    }
    const Vector<Scalar>& ev = solver.eigenvalues();
    const Scalar top = ev.size() ? std::max(ev.cwiseAbs().maxCoeff(), Scalar(0)) : Scalar(0);
    if (ev.size() && ev(0) < -tol * top) {
      throw PreconditionError("matrix is not positive semi-definite (smallest eigenvalue " +
                              std::to_string(static_cast<double>(ev(0))) + ")");
    }
    // Eigenvalues at rounding level are dropped so an exact rank-q U keeps q columns.
    const Scalar floor = static_cast<Scalar>(u.dim()) * std::numeric_limits<Scalar>::epsilon() * top;
    Index keep = 0;
    for (Index i = 0; i < ev.size(); ++i) keep += ev(i) > floor ? 1 : 0;
    Matrix<Scalar> f(u.dim(), keep);
    Index k = 0;
    for (Index i = 0; i < ev.size(); ++i) {
      if (ev(i) > floor) f.col(k++) = solver.eigenvectors().col(i) * std::sqrt(ev(i));
    }
    return LowRankPsd(f);
  }

  Index dim() const { return f_.rows(); }
  const Matrix<Scalar>& factor() const { return f_; }

  template <typename Derived>
  Scalar quad_form(const Eigen::MatrixBase<Derived>& v) const {
    if (f_.cols() == 0) return Scalar(0);
    return (f_.transpose() * v).squaredNorm();
  }

  Scalar op_norm() const {
    if (f_.cols() == 0 || f_.rows() == 0) return Scalar(0);
    Eigen::JacobiSVD<Matrix<Scalar>> svd(f_);
    const Scalar s = svd.singularValues()(0);
    return s * s;
  }

  SymmetricMatrix<Scalar> dense() const {
    return SymmetricMatrix<Scalar>(f_ * f_.transpose());
  }

 private:
  Matrix<Scalar> f_;
};

using LowRankPsdd = LowRankPsd<double>;

}  // namespace niece
