#pragma once

// Classical single right-hand-side GMRES: Arnoldi with two-pass Gram-Schmidt,
// Givens-updated QR of the Hessenberg matrix, no restarts.

#include <optional>
#include <vector>

#include "mrhs/linalg.hpp"
#include "mrhs/operator.hpp"

namespace mrhs {

/// Arnoldi state after k steps: A * Q[:, :k] = Q * H.
struct ClassicGmresState {
  Matrix Q;            // N x t, t = k + 1 until a happy breakdown, then t = k
  Matrix H;            // t x k, zero below the first subdiagonal
  QrFactors qr;        // H = G [R; 0]
  Vector coords;       // G^* Q^* r0, kept current as G changes
  Real r0_norm = 0;
  Index k = 0;
  bool happy_breakdown = false;
};

/// Starts the Arnoldi process from a non-zero r0.
inline ClassicGmresState start_classic(const Vector& r0) {
  ClassicGmresState s;
  s.r0_norm = r0.norm();
  require(s.r0_norm > 0, "start_classic: zero initial residual");
  s.Q = r0 / s.r0_norm;
  s.H = Matrix(1, 0);
  s.qr = QrFactors(1);
  s.coords = Vector::Constant(1, Scalar(s.r0_norm));
  return s;
}

/// One Arnoldi step: expands Q with the orthogonalized image of its last column
/// and refreshes the QR factors and the residual coordinates.
inline void arnoldi_step(ClassicGmresState& s, const LinearOperator& A) {
  require(!s.happy_breakdown, "arnoldi_step: Krylov space is already invariant");
  const Vector w = A.apply(s.Q.col(s.k));
  const auto split = orthogonalize_against(w, s.Q);
  const bool grows = split.norm > 1e-12 * w.norm();

  const Index t = s.Q.cols();
  if (grows) {
    s.Q.conservativeResize(Eigen::NoChange, t + 1);
    s.Q.col(t) = split.residual / split.norm;
  }
  Matrix H = Matrix::Zero(s.Q.cols(), s.k + 1);
  H.topLeftCorner(s.H.rows(), s.H.cols()) = s.H;
  H.col(s.k).head(t) = split.coefficients;
  if (grows) H(t, s.k) = split.norm;
  s.H = std::move(H);

  const auto update = qr_append_column(s.qr, split.coefficients, grows ? std::optional<Real>(split.norm) : std::nullopt);
  if (grows) {
    s.coords.conservativeResize(t + 1);
    s.coords(t) = 0;
  }
  for (const auto& rot : update.rotations) rot.apply(s.coords);
  ++s.k;
  if (!grows) s.happy_breakdown = true;
}

/// ||r_k|| from G^* applied to r0_coords = Q^* r0: the tail of the rotated coordinates.
/// In the ordinary case this is the single entry |e_{k+1}^T G^* Q^* r0|.
inline Real residual_norm_estimate(const ClassicGmresState& s, const Vector& r0_coords) {
  require(r0_coords.size() == s.qr.t(), "residual_norm_estimate: coordinate length mismatch");
  const Vector rotated = s.qr.G().adjoint() * r0_coords;
  return rotated.tail(rotated.size() - s.k).norm();
}

inline Real residual_norm_estimate(const ClassicGmresState& s) {
  return s.coords.tail(s.coords.size() - s.k).norm();
}

/// x0 + Q[:, :k] R^{-1} [I 0] G^* r0_coords. A singular trailing pivot means the
/// exact solution was already reached one step earlier; the reduced system is used.
inline Vector finalize_classic(const ClassicGmresState& s, const Vector& r0_coords, const Vector& x0) {
  require(r0_coords.size() == s.qr.t(), "finalize_classic: coordinate length mismatch");
  if (s.k == 0) return x0;
  const Vector rotated = s.qr.G().adjoint() * r0_coords;
  Index k = s.k;
  while (k > 0) {
    try {
      const Vector y = solve_upper_triangular(s.qr.R().topLeftCorner(k, k), rotated.head(k));
      return x0 + s.Q.leftCols(k) * y;
    } catch (const singular_system_error&) {
      --k;
    }
  }
  return x0;
}

struct GmresResult {
  Vector x;
  std::vector<Real> history;  // ||r_0||, ||r_1||, ...
  bool converged = false;
  Index iterations = 0;
};

/// Solves A x = b to ||r|| <= eps ||b|| starting from x0. max_iter = 0 means N.
inline GmresResult gmres_solve(const LinearOperator& A, const Vector& b, const Vector& x0, Real eps,
                               Index max_iter = 0) {
  require(b.size() == A.size(), "gmres_solve: right-hand side dimension mismatch");
  require(x0.size() == A.size(), "gmres_solve: initial guess dimension mismatch");
  require(eps > 0, "gmres_solve: tolerance must be positive");
  if (max_iter <= 0) max_iter = A.size();

  GmresResult out;
  const Vector r0 = b - A.apply(x0);
  const Real target = eps * b.norm();
  out.history.push_back(r0.norm());
  if (r0.norm() <= target || r0.norm() == 0) {
    out.x = x0;
    out.converged = true;
    return out;
  }

  auto state = start_classic(r0);
  while (out.history.back() > target && state.k < max_iter && !state.happy_breakdown) {
    arnoldi_step(state, A);
    out.history.push_back(residual_norm_estimate(state));
  }
  out.iterations = state.k;
  out.converged = out.history.back() <= target || state.happy_breakdown;
  Vector r0_coords = Vector::Zero(state.Q.cols());
  r0_coords(0) = state.r0_norm;
  out.x = finalize_classic(state, r0_coords, x0);
  return out;
}

}  // namespace mrhs
