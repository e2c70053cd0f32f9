#pragma once

// Dense kernels shared by every solver in the library: two-pass Gram-Schmidt,
// an incrementally maintained QR factorization of a (generalized) Hessenberg
// matrix, back substitution and a rank-revealing orthonormalization.

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "mrhs/types.hpp"

namespace mrhs {

struct Orthogonalized {
  Vector coefficients;  // h, with the second-pass correction folded in
  Vector residual;      // component of the input orthogonal to Q
  Real norm = 0;        // ||residual||
};

/// Splits v into Q*h + residual with residual orthogonal to the columns of Q.
/// Classical Gram-Schmidt with one unconditional second pass.
inline Orthogonalized orthogonalize_against(const Vector& v, const Matrix& Q) {
  require(Q.cols() == 0 || Q.rows() == v.size(),
          "orthogonalize_against: basis has " + std::to_string(Q.rows()) +
              " rows, vector has " + std::to_string(v.size()));
  Orthogonalized out;
  if (Q.cols() == 0) {
    out.coefficients = Vector::Zero(0);
    out.residual = v;
    out.norm = v.norm();
    return out;
  }
  out.coefficients = Q.adjoint() * v;
  out.residual = v - Q * out.coefficients;
  const Vector correction = Q.adjoint() * out.residual;
  out.residual -= Q * correction;
  out.coefficients += correction;
  out.norm = out.residual.norm();
  return out;
}

/// Unitary 2x2 rotation acting on rows (pivot, target) of a vector:
///   [ c        s ] [x_pivot ]
///   [ -conj(s) c ] [x_target]
/// with c real.
struct GivensRotation {
  Index pivot = 0;
  Index target = 0;
  Real c = 1;
  Scalar s{0, 0};

  /// Rotation that maps (a, b) to (r, 0).
  static GivensRotation zeroing(Index pivot, Index target, Scalar a, Scalar b) {
    GivensRotation g;
    g.pivot = pivot;
    g.target = target;
    const Real abs_a = std::abs(a);
    const Real abs_b = std::abs(b);
    if (abs_b == 0) return g;
    if (abs_a == 0) {
      g.c = 0;
      g.s = Scalar(1, 0);
      return g;
    }
    const Real r = std::hypot(abs_a, abs_b);
    g.c = abs_a / r;
    g.s = (a / abs_a) * std::conj(b) / r;
    return g;
  }

  template <class Vec>
  void apply(Vec& x) const {
    const Scalar xp = x(pivot);
    const Scalar xt = x(target);
    x(pivot) = c * xp + s * xt;
    x(target) = -std::conj(s) * xp + c * xt;
  }

  /// G <- G * J^*, i.e. the accumulated unitary absorbs this rotation.
  void apply_adjoint_right(Matrix& G) const {
    const Vector gp = G.col(pivot);
    const Vector gt = G.col(target);
    G.col(pivot) = c * gp + std::conj(s) * gt;
    G.col(target) = -s * gp + c * gt;
  }
};

struct QrAppendResult {
  std::vector<GivensRotation> rotations;  // in application order; replay on any G^*-coordinates
  bool singular_pivot = false;
};

class QrFactors;
QrAppendResult qr_append_column(QrFactors& f, const Vector& h, std::optional<Real> appended_row);

/// H = G * [R; 0] with G (t x t) unitary and R (k x k) upper triangular.
/// G is stored explicitly; H itself is owned by the caller.
class QrFactors {
public:
  QrFactors() = default;

  /// Factors of an empty H with t rows: G = I_t.
  explicit QrFactors(Index rows) : G_(Matrix::Identity(rows, rows)), R_(0, 0) {}

  Index t() const { return G_.rows(); }
  Index k() const { return R_.cols(); }
  const Matrix& G() const { return G_; }
  const Matrix& R() const { return R_; }

  /// G <- [G 0; 0 1]: the row space grew by one vector not yet touched by H.
  void extend_unit() {
    const Index t0 = t();
    Matrix grown = Matrix::Identity(t0 + 1, t0 + 1);
    grown.topLeftCorner(t0, t0) = G_;
    G_ = std::move(grown);
  }

private:
  friend QrAppendResult qr_append_column(QrFactors&, const Vector&, std::optional<Real>);
  Matrix G_ = Matrix::Identity(0, 0);
  Matrix R_ = Matrix(0, 0);
};

/// Appends the column [h; appended_row] to H and updates the factors in place.
/// When appended_row is present the row space grows by one (G is extended with a
/// unit block first). Entries of R in earlier columns are left untouched.
inline QrAppendResult qr_append_column(QrFactors& f, const Vector& h, std::optional<Real> appended_row) {
  require(h.size() == f.t(), "qr_append_column: column has " + std::to_string(h.size()) +
                                 " entries, factors have t = " + std::to_string(f.t()));
  if (appended_row) f.extend_unit();
  const Index t = f.t();
  const Index k = f.k();
  require(k < t, "qr_append_column: H would have more columns than rows");

  Vector column = Vector::Zero(t);
  column.head(h.size()) = h;
  if (appended_row) column(t - 1) = *appended_row;
  Vector z = f.G_.adjoint() * column;

  QrAppendResult result;
  for (Index i = k + 1; i < t; ++i) {
    if (z(i) == Scalar(0)) continue;
    const auto rot = GivensRotation::zeroing(k, i, z(k), z(i));
    rot.apply(z);
    z(i) = 0;
    rot.apply_adjoint_right(f.G_);
    result.rotations.push_back(rot);
  }

  Matrix grown = Matrix::Zero(k + 1, k + 1);
  grown.topLeftCorner(k, k) = f.R_;
  grown.col(k) = z.head(k + 1);
  f.R_ = std::move(grown);

  const Real scale = std::max(z.norm(), h.norm());
  result.singular_pivot = std::abs(f.R_(k, k)) <= 1e-14 * scale;
  return result;
}

/// Back substitution for an upper-triangular R.
inline Vector solve_upper_triangular(const Matrix& R, const Vector& rhs) {
  require(R.rows() == R.cols(), "solve_upper_triangular: R is not square");
  require(R.rows() == rhs.size(), "solve_upper_triangular: dimension mismatch");
  const Index n = R.rows();
  const Real threshold = 1e-14 * R.norm();
  Vector x = rhs;
  for (Index i = n - 1; i >= 0; --i) {
    if (std::abs(R(i, i)) <= threshold || R(i, i) == Scalar(0)) {
      throw singular_system_error("solve_upper_triangular: pivot " + std::to_string(i) + " is numerically zero");
    }
    if (i + 1 < n) x(i) -= (R.row(i).segment(i + 1, n - i - 1) * x.segment(i + 1, n - i - 1)).value();
    x(i) /= R(i, i);
  }
  return x;
}

/// Orthonormal basis of the column span of M. Columns whose orthogonal
/// remainder falls below rank_tol times the largest column norm are dropped.
inline Matrix orthonormal_columns(const Matrix& M, Real rank_tol = 1e-10) {
  require(M.rows() >= M.cols(), "orthonormal_columns: more columns than rows");
  Real largest = 0;
  for (Index j = 0; j < M.cols(); ++j) largest = std::max(largest, M.col(j).norm());
  Matrix basis(M.rows(), 0);
  if (largest == 0) return basis;
  for (Index j = 0; j < M.cols(); ++j) {
    auto split = orthogonalize_against(M.col(j), basis);
    if (split.norm <= rank_tol * largest) continue;
    basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
    basis.col(basis.cols() - 1) = split.residual / split.norm;
  }
  return basis;
}

/// Frobenius norm of A^* A - I; zero for an empty A.
inline Real orthonormality_defect(const Matrix& A) {
  if (A.cols() == 0) return 0;
  return (A.adjoint() * A - Matrix::Identity(A.cols(), A.cols())).norm();
}

}  // namespace mrhs
