#pragma once

// Comparison methods for streams of right-hand sides:
//   classic  independent GMRES per system, no reuse
//   gcr      extended GCR, all systems share the directions P and images AP
//   seed     GMRES per system, started from the minimal-residual projection
//            onto the Krylov basis of the previous solve

#include <chrono>
#include <optional>
#include <vector>

#include "mrhs/gmres.hpp"
#include "mrhs/linalg.hpp"
#include "mrhs/operator.hpp"
#include "mrhs/report.hpp"

namespace mrhs {

namespace detail {

using clock = std::chrono::steady_clock;

inline double ms_since(clock::time_point start) {
  return std::chrono::duration<double, std::milli>(clock::now() - start).count();
}

inline Vector initial_guess(const RhsInput& input, Index n) {
  Vector x0 = input.x0.size() == 0 ? Vector::Zero(n) : input.x0;
  require(x0.size() == n, "initial guess dimension mismatch");
  require(input.b.size() == n, "right-hand side dimension mismatch");
  require(input.eps > 0, "tolerance must be positive");
  return x0;
}

/// Fills the a-posteriori fields of out from x (one matvec).
inline void check_solution(const LinearOperator& A, const RhsInput& input, const Vector& x, bool estimate_ok,
                           RecordReport& out) {
  out.rhs_norm = input.b.norm();
  out.eps = input.eps;
  out.true_residual = (input.b - A.apply(x)).norm();
  out.gamma = accuracy_ratio(out.true_residual, input.eps, out.rhs_norm);
  out.converged = estimate_ok;
}

}  // namespace detail

/// GMRES from scratch for every system. max_iter caps each system (0 = N).
inline SolveReport classic_stream_solve(const LinearOperator& A, const RhsProvider& provider,
                                        const SolveOptions& options = {}) {
  const auto run_start = detail::clock::now();
  MatvecCounter counter;
  const LinearOperator Ac = counted(A, counter);
  SolveReport report;
  report.method = "classic";
  std::optional<Vector> previous;
  Index index = 0;
  while (auto input = provider(previous)) {
    const auto start = detail::clock::now();
    const long long mv0 = counter.count;
    const Vector x0 = detail::initial_guess(*input, A.size());
    auto result = gmres_solve(Ac, input->b, x0, input->eps, options.max_iter);
    RecordReport out;
    out.rhs_index = index++;
    out.iterations = result.iterations;
    out.residual_history = result.history;
    detail::check_solution(Ac, *input, result.x, result.converged, out);
    out.matvecs = counter.count - mv0;
    out.wall_ms = detail::ms_since(start);
    report.records.push_back(std::move(out));
    previous = std::move(result.x);
  }
  report.wall_ms = detail::ms_since(run_start);
  report.matvec_ms = counter.elapsed_ms();
  summarize(report);
  return report;
}

/// Extended GCR for a stream of systems. Each iteration takes the current
/// residual as the new direction p, orthogonalizes A p against the stored
/// images and normalizes it, so the columns of AP stay orthonormal. A new
/// system first removes its component along AP.
///
/// Breakdown (A p already in span(AP), i.e. the previous step stagnated) ends
/// the current system as not converged with the breakdown flag; the stream
/// continues with the next system.
class GcrState {
public:
  explicit GcrState(Index n) : P_(n, 0), AP_(n, 0) {}

  Index k() const { return P_.cols(); }
  const Matrix& P() const { return P_; }
  const Matrix& AP() const { return AP_; }

  /// x += P c, r -= AP c with c = AP^* r (two passes).
  void project(Vector& x, Vector& r) const {
    if (k() == 0) return;
    for (int pass = 0; pass < 2; ++pass) {
      const Vector c = AP_.adjoint() * r;
      x += P_ * c;
      r -= AP_ * c;
    }
  }

  /// One GCR step for (x, r). Returns false on breakdown and leaves the state unchanged.
  bool step(const LinearOperator& A, Vector& x, Vector& r, Real a_norm) {
    Vector p = r;
    Vector w = A.apply(p);
    const Real p_norm = p.norm();
    if (k() > 0) {
      for (int pass = 0; pass < 2; ++pass) {
        const Vector h = AP_.adjoint() * w;
        w -= AP_ * h;
        p -= P_ * h;
      }
    }
    const Real w_norm = w.norm();
    if (!(w_norm > 1e-14 * a_norm * p_norm)) return false;
    p /= w_norm;
    w /= w_norm;
    P_.conservativeResize(Eigen::NoChange, k() + 1);
    AP_.conservativeResize(Eigen::NoChange, AP_.cols() + 1);
    P_.col(k() - 1) = p;
    AP_.col(AP_.cols() - 1) = w;
    const Scalar alpha = w.dot(r);
    x += alpha * p;
    r -= alpha * w;
    return true;
  }

private:
  Matrix P_;
  Matrix AP_;
};

inline SolveReport gcr_mrhs_solve(const LinearOperator& A, const RhsProvider& provider,
                                  const SolveOptions& options = {}) {
  const auto run_start = detail::clock::now();
  MatvecCounter counter;
  const LinearOperator Ac = counted(A, counter);
  const Index max_total = options.max_iter > 0 ? options.max_iter : 2 * A.size();
  const Real a_norm = A.norm_estimate() > 0 ? A.norm_estimate() : 1;

  SolveReport report;
  report.method = "gcr";
  GcrState state(A.size());
  std::optional<Vector> previous;
  Index index = 0;
  Index total = 0;
  while (auto input = provider(previous)) {
    const auto start = detail::clock::now();
    const long long mv0 = counter.count;
    Vector x = detail::initial_guess(*input, A.size());
    Vector r = input->b - Ac.apply(x);
    state.project(x, r);
    const Real target = input->eps * input->b.norm();

    RecordReport out;
    out.rhs_index = index++;
    out.residual_history.push_back(r.norm());
    while (out.residual_history.back() > target && total < max_total) {
      if (!state.step(Ac, x, r, a_norm)) {
        out.breakdown = true;
        break;
      }
      ++out.iterations;
      ++total;
      out.residual_history.push_back(r.norm());
    }
    detail::check_solution(Ac, *input, x, out.residual_history.back() <= target, out);
    out.matvecs = counter.count - mv0;
    out.wall_ms = detail::ms_since(start);
    report.records.push_back(std::move(out));
    previous = std::move(x);
    if (total >= max_total && !report.records.back().converged) break;
  }
  report.wall_ms = detail::ms_since(run_start);
  report.matvec_ms = counter.elapsed_ms();
  summarize(report);
  return report;
}

/// Seed GMRES. Before each solve the initial residual is projected, in the
/// minimal-residual sense, onto A K where K is the Krylov space kept from the
/// most recent solve that built one; then GMRES runs from scratch.
inline SolveReport seed_gmres_solve(const LinearOperator& A, const RhsProvider& provider,
                                    const SolveOptions& options = {}) {
  const auto run_start = detail::clock::now();
  MatvecCounter counter;
  const LinearOperator Ac = counted(A, counter);
  const Index max_iter = options.max_iter > 0 ? options.max_iter : A.size();

  SolveReport report;
  report.method = "seed";
  std::optional<ClassicGmresState> seed;
  std::optional<Vector> previous;
  Index index = 0;
  while (auto input = provider(previous)) {
    const auto start = detail::clock::now();
    const long long mv0 = counter.count;
    Vector x = detail::initial_guess(*input, A.size());
    Vector r = input->b - Ac.apply(x);
    const Real target = input->eps * input->b.norm();

    RecordReport out;
    out.rhs_index = index++;
    out.residual_history.push_back(r.norm());

    // min ||r - A Q_k y|| = min ||Q^* r - H y|| plus the part of r outside Q.
    if (seed && seed->k > 0 && out.residual_history.back() > target) {
      const Vector rotated = seed->qr.G().adjoint() * (seed->Q.adjoint() * r);
      Index k = seed->k;
      while (k > 0) {
        try {
          const Vector y = solve_upper_triangular(seed->qr.R().topLeftCorner(k, k), rotated.head(k));
          x += seed->Q.leftCols(k) * y;
          r -= seed->Q * (seed->H.leftCols(k) * y);
          break;
        } catch (const singular_system_error&) {
          --k;
        }
      }
      out.residual_history.push_back(r.norm());
    }

    if (out.residual_history.back() > target) {
      auto state = start_classic(r);
      const Real r_norm = r.norm();
      Real estimate = r_norm;
      while (estimate > target && state.k < max_iter && !state.happy_breakdown) {
        arnoldi_step(state, Ac);
        estimate = residual_norm_estimate(state);
        out.residual_history.push_back(estimate);
      }
      out.iterations = state.k;
      Vector r0_coords = Vector::Zero(state.Q.cols());
      r0_coords(0) = r_norm;
      x = finalize_classic(state, r0_coords, x);
      const bool ok = estimate <= target || state.happy_breakdown;
      seed = std::move(state);
      detail::check_solution(Ac, *input, x, ok, out);
    } else {
      detail::check_solution(Ac, *input, x, true, out);
    }
    out.matvecs = counter.count - mv0;
    out.wall_ms = detail::ms_since(start);
    report.records.push_back(std::move(out));
    previous = std::move(x);
  }
  report.wall_ms = detail::ms_since(run_start);
  report.matvec_ms = counter.elapsed_ms();
  summarize(report);
  return report;
}

}  // namespace mrhs
