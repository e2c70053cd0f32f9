#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "mrhs/generators.hpp"
#include "mrhs/gmres_mrhs.hpp"

namespace mrhs::test {

struct RandomProblem {
  Matrix A;
  std::vector<RhsInput> systems;
};

/// Complex random system of the kind used throughout the suite: A = I + 0.25 G / sqrt(N).
inline RandomProblem random_problem(Index n, Index m, std::uint64_t seed, Real eps) {
  RandomProblem p;
  p.A = gen::random_well_conditioned(n, seed);
  for (auto& b : gen::random_family(n, m, seed + 1000003)) p.systems.push_back({std::move(b), Vector(), eps});
  return p;
}

inline Real sigma_min(const Matrix& M) {
  if (M.cols() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(M);
  return svd.singularValues()(svd.singularValues().size() - 1);
}

/// Worst values of the structural quantities seen over a run.
struct InvariantLog {
  Real q_defect = 0;          // ||Q^*Q - I||
  Real p_defect = 0;          // ||P^*P - I||, P = QC
  Real arnoldi = 0;           // ||A P - Q H|| / ||A||
  Real upper_ratio = 0;       // strictly upper part of Ê^*D relative to ||D||
  Real structural_zero = 0;   // largest |H(i, j)| with i >= t_j
  Real sigma_min_p = 1;       // smallest sigma_min(P)
  Index t_excess = 0;         // max(t - k - m, 0)
  Index observations = 0;

  bool ok() const {
    return q_defect <= 1e-10 && p_defect <= 1e-10 && arnoldi <= 1e-10 && upper_ratio <= 1e-10 &&
           structural_zero == 0 && sigma_min_p > 1e-8 && t_excess == 0;
  }
  std::string describe() const;
};

inline std::string InvariantLog::describe() const {
  char buf[320];
  std::snprintf(buf, sizeof buf,
                "%lld states: ||Q*Q-I|| %.1e, ||P*P-I|| %.1e, ||AP-QH||/||A|| %.1e, upper(E*D)/||D|| %.1e, "
                "H below t_j %.1e, min sigma(P) %.3f, t-k-m excess %lld",
                static_cast<long long>(observations), q_defect, p_defect, arnoldi, upper_ratio, structural_zero,
                sigma_min_p, static_cast<long long>(t_excess));
  return buf;
}

inline void observe_invariants(const Matrix& A, const SharedSearchState& s, InvariantLog& log) {
  ++log.observations;
  log.q_defect = std::max(log.q_defect, orthonormality_defect(s.Q()));
  log.t_excess = std::max(log.t_excess, s.t() - s.k() - s.m());
  if (s.k() == 0) return;
  const Matrix P = s.directions();
  log.p_defect = std::max(log.p_defect, orthonormality_defect(P));
  log.arnoldi = std::max(log.arnoldi, (A * P - s.Q() * s.H()).norm() / A.norm());
  log.upper_ratio = std::max(log.upper_ratio, s.last_upper_ratio());
  log.sigma_min_p = std::min(log.sigma_min_p, sigma_min(P));
  const auto& th = s.t_history();
  for (Index j = 0; j < s.H().cols(); ++j)
    for (Index i = th[static_cast<std::size_t>(j)]; i < s.H().rows(); ++i)
      log.structural_zero = std::max(log.structural_zero, std::abs(s.H()(i, j)));
}

/// Checks along a run: the residual recurrence
///   r_j = r_{j-1} - <r_{j-1}, u_j> u_j   (to 1e-10 ||r0||)
/// for every iteration of every system, and a non-zero final pivot
///   |<r_{n_s - 1}, u_{n_s}>| > 1e-12 ||r0||
/// for every system that converged with a strict final decrease. Residuals are
/// taken from the solver's coordinates: r_j = Q G [0; tail of G^* Q^* r0].
struct RecurrenceLog {
  Real recurrence = 0;      // max ||r_j - (r_{j-1} - <r_{j-1}, u_j> u_j)|| / ||r0||
  Real smallest_pivot = 1;  // min |<r_{n_s - 1}, u_{n_s}>| / ||r0|| over final steps
  Index recurrence_checks = 0;
  Index pivot_checks = 0;

  bool ok() const { return recurrence <= 1e-10 && smallest_pivot > 1e-12; }
};

class RecurrenceObserver {
public:
  explicit RecurrenceObserver(RecurrenceLog& log) : log_(&log) {}

  void operator()(const SharedSearchState& s) {
    if (!s.current()) return;
    const Index record = *s.current();
    const auto& rec = s.current_record();
    const Vector r = residual(s, rec);
    auto it = last_.find(record);
    if (it != last_.end() && it->second.k + 1 == s.k()) {
      const Vector u = s.image_basis().col(s.k() - 1);
      const Vector& prev = it->second.r;
      const Scalar pivot = u.dot(prev);
      const Real r0 = rec.r0.norm();
      log_->recurrence = std::max(log_->recurrence, (r - (prev - pivot * u)).norm() / r0);
      ++log_->recurrence_checks;
      const Real target = rec.target();
      const Real now = s.current_residual_norm();
      if (now <= target && now < prev.norm()) {
        log_->smallest_pivot = std::min(log_->smallest_pivot, std::abs(pivot) / r0);
        ++log_->pivot_checks;
      }
    }
    last_[record] = {s.k(), r};
  }

private:
  static Vector residual(const SharedSearchState& s, const RhsRecord& rec) {
    Vector tail = rec.coords;
    tail.head(s.k()).setZero();
    return s.Q() * (s.G() * tail);
  }

  struct Snapshot {
    Index k;
    Vector r;
  };
  RecurrenceLog* log_;
  std::map<Index, Snapshot> last_;
};

}  // namespace mrhs::test
