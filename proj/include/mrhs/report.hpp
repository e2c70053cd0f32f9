#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mrhs/types.hpp"

namespace mrhs {

/// One system handed to a multi-RHS solver. An empty x0 means the zero vector.
struct RhsInput {
  Vector b;
  Vector x0;
  Real eps = 1e-8;
};

/// Sequential source of systems. The argument is the solution of the system
/// returned by the previous call (empty on the first call).
using RhsProvider = std::function<std::optional<RhsInput>(const std::optional<Vector>& previous_solution)>;

inline RhsProvider provider_from_list(std::vector<RhsInput> systems) {
  auto next = std::make_shared<std::size_t>(0);
  auto list = std::make_shared<std::vector<RhsInput>>(std::move(systems));
  return [next, list](const std::optional<Vector>&) -> std::optional<RhsInput> {
    if (*next >= list->size()) return std::nullopt;
    return (*list)[(*next)++];
  };
}

/// ||A x - b|| / (eps ||b||), the accuracy ratio of a finished system.
inline Real accuracy_ratio(Real true_residual, Real eps, Real rhs_norm) {
  if (true_residual == 0) return 0;
  const Real scale = eps * rhs_norm;
  if (scale == 0) return std::numeric_limits<Real>::infinity();
  return true_residual / scale;
}

/// Largest accepted accuracy ratio for a converged system; absorbs the gap
/// between the recursive residual estimate and the true residual.
inline constexpr Real kGammaSlack = 1.05;

struct RecordReport {
  Index rhs_index = 0;
  Index iterations = 0;
  long long matvecs = 0;
  std::vector<Real> residual_history;
  Real rhs_norm = 0;
  Real eps = 0;
  Real true_residual = 0;
  Real gamma = 0;
  bool converged = false;  // the method's own stopping test was met
  bool breakdown = false;
  double wall_ms = 0;

  /// Converged and confirmed by the a-posteriori residual.
  bool verified(Real slack = kGammaSlack) const { return converged && gamma <= slack; }
};

struct SolveReport {
  std::string method;
  std::vector<RecordReport> records;
  Index total_iterations = 0;
  long long total_matvecs = 0;
  Real geom_mean_gamma = 0;
  Real max_gamma = 0;
  double wall_ms = 0;
  double matvec_ms = 0;

  bool all_converged() const {
    for (const auto& r : records)
      if (!r.converged) return false;
    return true;
  }
  bool all_verified(Real slack = kGammaSlack) const {
    for (const auto& r : records)
      if (!r.verified(slack)) return false;
    return true;
  }
};

/// Recomputes the aggregate fields that derive from the per-record data.
/// The gamma statistics range over converged records only.
inline void summarize(SolveReport& report) {
  report.total_iterations = 0;
  report.total_matvecs = 0;
  report.max_gamma = 0;
  Real log_sum = 0;
  Index counted = 0;
  bool has_zero = false;
  for (const auto& r : report.records) {
    report.total_iterations += r.iterations;
    report.total_matvecs += r.matvecs;
    if (!r.converged) continue;
    report.max_gamma = std::max(report.max_gamma, r.gamma);
    if (r.gamma == 0) has_zero = true;
    else log_sum += std::log(r.gamma);
    ++counted;
  }
  if (counted == 0 || has_zero) report.geom_mean_gamma = 0;
  else report.geom_mean_gamma = std::exp(log_sum / static_cast<Real>(counted));
}

/// How the next direction is made orthogonal to L_k.
enum class DirectionMode {
  /// Project v_next against D_Q = orth(Ê^* D) only. Cheap (O(m^2 (m + t - k)) per
  /// step) but the entries of D for converged systems are of the size of their
  /// final residuals, so the direction inherits a relative error of roughly
  /// unit roundoff / eps.
  compact,
  /// Additionally orthogonalize the raw coordinates G Ê v against C (two passes,
  /// O(t k) per step). D_Q is still built and checked every iteration.
  reorthogonalized,
};

struct SolveOptions {
  /// Cap on total iterations for the stream solvers (0 = 2N) and per system for
  /// the restarting ones (0 = N).
  Index max_iter = 0;
  /// Direction construction for the multi-RHS solver; see DirectionMode.
  DirectionMode direction_mode = DirectionMode::compact;
};

}  // namespace mrhs
