#pragma once

// Restart-free GMRES for a fixed matrix and right-hand sides that arrive one at
// a time. All systems share one growing search space L_k (dim L_k = k); the
// residual of every system is minimized over L_k exactly as in GMRES, but L_k is
// no longer a Krylov space: after system m converges, its successor's projected
// residual becomes the next search direction.
//
// Representation, with t = dim(L_k + A L_k) <= k + m:
//   Q  (N x t)  orthonormal basis of L_k + A L_k
//   C  (t x k)  direction vectors P_k = Q C, orthonormal columns
//   H  (t x k)  A P_k = Q H, H(i, j) = 0 for i >= t_j
//   G, R        H = G [R; 0]; the first j columns of Q G span A L_j
// Each system keeps its residual coordinates G^* Q^* r0, so residual norms and
// solutions never need an N-length recomputation.

#include <algorithm>
#include <chrono>
#include <functional>
#include <optional>
#include <sstream>
#include <vector>

#include "mrhs/linalg.hpp"
#include "mrhs/operator.hpp"
#include "mrhs/report.hpp"

namespace mrhs {

struct RhsRecord {
  Index index = 0;
  Vector b;
  Vector x0;
  Real eps = 0;
  Real b_norm = 0;
  Vector r0;
  Vector coords;               // G^* Q^* r0 while the record is part of the search space
  Index admitted_at = 0;       // iteration count at admission
  bool in_search_space = false;
  std::optional<Index> converged_at;
  std::optional<Vector> x;
  std::vector<Real> history;   // projected residual at admission, then one entry per iteration
  Real true_residual = 0;
  bool converged = false;

  Real target() const { return eps * b_norm; }
};

/// Deflation threshold for "the orthogonal component is zero" decisions, relative to the input norm.
inline constexpr Real kDeflationTol = 1e-12;

class SharedSearchState {
public:
  explicit SharedSearchState(Index n)
      : n_(n), Q_(n, 0), H_(0, 0), C_(0, 0), Z_(n, 0), D_Q_(0, 0) {}

  Index n() const { return n_; }
  Index k() const { return k_; }
  Index m() const { return static_cast<Index>(active_.size()); }
  Index t() const { return Q_.cols(); }
  const Matrix& Q() const { return Q_; }
  const Matrix& H() const { return H_; }
  const Matrix& C() const { return C_; }
  const Matrix& G() const { return qr_.G(); }
  const Matrix& R() const { return qr_.R(); }
  const Matrix& Z() const { return Z_; }
  const Matrix& D_Q() const { return D_Q_; }
  const Vector& v_next() const { return v_next_; }
  const std::vector<Index>& t_history() const { return t_history_; }
  const std::vector<Index>& converged_rows() const { return converged_rows_; }
  const std::vector<RhsRecord>& records() const { return records_; }
  std::optional<Index> current() const { return current_; }
  const RhsRecord& current_record() const { return records_.at(static_cast<std::size_t>(current_.value())); }

  /// Largest strictly-upper entry of E^* D relative to ||D|| at the last projection update.
  Real last_upper_ratio() const { return last_upper_ratio_; }
  /// E^* D as built at the last projection update.
  const Matrix& last_projection_matrix() const { return last_ed_; }
  bool singular_pivot_seen() const { return singular_pivot_seen_; }

  /// Orthonormal basis of A L_k: the first k columns of Q G.
  Matrix image_basis() const { return Q_ * qr_.G().leftCols(k_); }
  /// Direction vectors P_k = Q C.
  Matrix directions() const { return Q_ * C_; }

  /// Ê: rows {n_1 - 1, ..., n_{m-1} - 1} and {k - 1, ..., t - 1} (zero based), ascending.
  std::vector<Index> projection_rows() const {
    std::vector<Index> rows;
    const Index first = std::max<Index>(k_ - 1, 0);
    for (Index r : converged_rows_)
      if (r < first) rows.push_back(r);
    for (Index r = first; r < t(); ++r) rows.push_back(r);
    return rows;
  }

  /// Computes r0 = b - A x0 and brings the system into the solve. Returns true if
  /// the residual projected onto the current space already meets the tolerance;
  /// such a record is finalized on the spot and the search space is left alone.
  bool admit_rhs(const LinearOperator& A, const RhsInput& input, Index index) {
    require(!current_, "admit_rhs: the current system has not converged yet");
    require(input.b.size() == n_, "admit_rhs: right-hand side dimension mismatch");
    RhsRecord rec;
    rec.index = index;
    rec.b = input.b;
    rec.x0 = input.x0.size() == 0 ? Vector::Zero(n_) : input.x0;
    require(rec.x0.size() == n_, "admit_rhs: initial guess dimension mismatch");
    require(input.eps > 0, "admit_rhs: tolerance must be positive");
    rec.eps = input.eps;
    rec.b_norm = rec.b.norm();
    rec.r0 = rec.b - A.apply(rec.x0);
    rec.admitted_at = k_;
    const Real r0_norm = rec.r0.norm();

    if (t() == 0) {
      rec.history.push_back(r0_norm);
      if (r0_norm <= rec.target() || r0_norm == 0) return finish_without_space(A, std::move(rec), Vector());
      Q_ = rec.r0 / r0_norm;
      qr_ = QrFactors(1);
      H_ = Matrix(1, 0);
      C_ = Matrix(1, 0);
      rec.coords = Vector::Constant(1, Scalar(r0_norm));
      enter_search_space(std::move(rec));
      v_next_ = Vector::Ones(1);
      return false;
    }

    const auto split = orthogonalize_against(rec.r0, Q_);
    Vector coords = qr_.G().adjoint() * split.coefficients;
    const bool grows = split.norm > kDeflationTol * r0_norm;
    const Real tail = coords.tail(t() - k_).norm();
    const Real projected = grows ? std::hypot(tail, split.norm) : tail;
    rec.history.push_back(projected);
    if (projected <= rec.target() || r0_norm == 0) return finish_without_space(A, std::move(rec), coords);

    if (grows) {
      append_basis_vector(split.residual / split.norm);
      coords.conservativeResize(t());
      coords(t() - 1) = split.norm;
    }
    rec.coords = std::move(coords);
    enter_search_space(std::move(rec));

    // The new direction is the part of r0 orthogonal to A L_k.
    const auto rows = projection_rows();
    const RhsRecord& cur = current_record();
    v_next_ = Vector::Zero(static_cast<Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (rows[i] >= k_) v_next_(static_cast<Index>(i)) = cur.coords(rows[i]);
    v_next_ /= v_next_.norm();
    return false;
  }

  /// After an iteration that did not converge: the next direction comes from u_k.
  void continue_with_image() {
    const auto rows = projection_rows();
    v_next_ = Vector::Zero(static_cast<Index>(rows.size()));
    const auto it = std::find(rows.begin(), rows.end(), k_ - 1);
    v_next_(static_cast<Index>(it - rows.begin())) = 1;
  }

  /// Rebuilds D_Q = orth(Ê^* D) from the records already in L_k and removes its
  /// span from v_next.
  void update_direction_projection() {
    const auto rows = projection_rows();
    const Index nrows = static_cast<Index>(rows.size());
    require(v_next_.size() == nrows, "update_direction_projection: v_next does not match Ê");

    std::vector<const RhsRecord*> spanning;
    for (Index idx : active_) {
      const auto& rec = records_[static_cast<std::size_t>(idx)];
      if (rec.admitted_at < k_) spanning.push_back(&rec);
    }
    Matrix ed = Matrix::Zero(nrows, static_cast<Index>(spanning.size()));
    for (std::size_t s = 0; s < spanning.size(); ++s) {
      const auto& rec = *spanning[s];
      for (Index i = 0; i < nrows; ++i)
        if (rows[static_cast<std::size_t>(i)] >= rec.admitted_at) ed(i, static_cast<Index>(s)) = rec.coords(rows[static_cast<std::size_t>(i)]);
    }
    last_ed_ = ed;
    last_upper_ratio_ = 0;
    const Real d_norm = ed.norm();
    for (Index j = 0; j < ed.cols(); ++j)
      for (Index i = 0; i < std::min(j, ed.rows()); ++i)
        last_upper_ratio_ = std::max(last_upper_ratio_, std::abs(ed(i, j)) / d_norm);

    Matrix scaled = ed;
    for (Index j = 0; j < scaled.cols(); ++j) {
      const Real norm = scaled.col(j).norm();
      if (norm > 0) scaled.col(j) /= norm;
    }
    D_Q_ = orthonormal_columns(scaled);
    if (D_Q_.cols() < ed.cols()) {
      throw breakdown_error("update_direction_projection: Ê^* D has rank " + std::to_string(D_Q_.cols()) +
                            " < " + std::to_string(ed.cols()) + diagnostics());
    }
    raw_v_next_ = v_next_;
    if (D_Q_.cols() > 0) {
      v_next_ -= D_Q_ * (D_Q_.adjoint() * v_next_);
      v_next_ -= D_Q_ * (D_Q_.adjoint() * v_next_);
    }
  }

  /// p_k = Q G Ê v_next / ||v_next||. Its coordinates in Q become the next column of C.
  Vector form_direction() {
    const auto rows = projection_rows();
    require(v_next_.size() == static_cast<Index>(rows.size()), "form_direction: v_next does not match Ê");
    const Real norm = v_next_.norm();
    if (!(norm > 1e-14)) {
      throw breakdown_error("form_direction: search space exhausted, ||v_next|| = " + std::to_string(norm) +
                            diagnostics());
    }
    Vector spread = Vector::Zero(t());
    for (std::size_t i = 0; i < rows.size(); ++i) spread(rows[i]) = v_next_(static_cast<Index>(i)) / norm;
    pending_c_ = qr_.G() * spread;
    if (mode_ == DirectionMode::reorthogonalized && k_ > 0) {
      Vector raw = Vector::Zero(t());
      for (std::size_t i = 0; i < rows.size(); ++i) raw(rows[i]) = raw_v_next_(static_cast<Index>(i));
      Vector c = qr_.G() * raw;
      for (int pass = 0; pass < 2; ++pass) c -= C_ * (C_.adjoint() * c);
      const Real c_norm = c.norm();
      if (!(c_norm > 1e-14 * raw.norm())) {
        throw breakdown_error("form_direction: new direction lies in L_k" + diagnostics());
      }
      pending_c_ = c / c_norm;
    }
    return Q_ * pending_c_;
  }

  /// One matvec: A p_k is orthogonalized against Q; Q grows if the remainder is not negligible.
  void expand_search_space(const LinearOperator& A, const Vector& p) {
    require(pending_c_.size() == t(), "expand_search_space: call form_direction first");
    require(p.size() == n_, "expand_search_space: direction dimension mismatch");
    const Vector w = A.apply(p);
    const auto split = orthogonalize_against(w, Q_);
    const bool grows = split.norm > kDeflationTol * w.norm();
    const Index t0 = t();

    Matrix C = Matrix::Zero(t0, k_ + 1);
    C.leftCols(k_) = C_;
    C.col(k_) = pending_c_;
    C_ = std::move(C);
    pending_c_.resize(0);

    if (grows) append_basis_vector(split.residual / split.norm);
    Matrix H = Matrix::Zero(t(), k_ + 1);
    H.topLeftCorner(H_.rows(), H_.cols()) = H_;
    H.col(k_).head(t0) = split.coefficients;
    if (grows) H(t0, k_) = split.norm;
    H_ = std::move(H);

    // append_basis_vector already grew G; hand the QR update a column of the grown height.
    Vector column = Vector::Zero(t());
    column.head(t0) = split.coefficients;
    if (grows) column(t0) = split.norm;
    const auto update = qr_append_column(qr_, column, std::nullopt);
    if (update.singular_pivot) singular_pivot_seen_ = true;
    for (Index idx : active_) {
      auto& coords = records_[static_cast<std::size_t>(idx)].coords;
      for (const auto& rot : update.rotations) rot.apply(coords);
    }
    ++k_;
    t_history_.push_back(t());
  }

  /// || [O I] G^* Q^* r0^{(m)} || for the system being processed.
  Real current_residual_norm() const {
    const auto& rec = current_record();
    return rec.coords.tail(t() - k_).norm();
  }

  /// x0 + Q C R^{-1} [I 0] G^* Q^* r0 for the current system; one matvec for the
  /// a-posteriori residual.
  Vector finalize_current(const LinearOperator& A) {
    auto& rec = records_.at(static_cast<std::size_t>(current_.value()));
    rec.x = solution_from_coords(rec.coords, rec.x0);
    rec.converged_at = k_;
    if (k_ > 0 && (converged_rows_.empty() || converged_rows_.back() != k_ - 1)) converged_rows_.push_back(k_ - 1);
    rec.true_residual = (rec.b - A.apply(*rec.x)).norm();
    rec.converged = current_residual_norm() <= rec.target();
    current_.reset();
    return *rec.x;
  }

  /// Ends the current system without convergence (iteration cap); x is still the minimizer over L_k.
  Vector abandon_current(const LinearOperator& A) {
    auto& rec = records_.at(static_cast<std::size_t>(current_.value()));
    rec.x = solution_from_coords(rec.coords, rec.x0);
    rec.true_residual = (rec.b - A.apply(*rec.x)).norm();
    rec.converged = false;
    current_.reset();
    return *rec.x;
  }

  void set_direction_mode(DirectionMode mode) { mode_ = mode; }
  DirectionMode direction_mode() const { return mode_; }

  /// Records the estimate of the current system for this iteration.
  void push_history(Real value) { records_.at(static_cast<std::size_t>(current_.value())).history.push_back(value); }

  std::string diagnostics() const {
    std::ostringstream os;
    os << " [k=" << k_ << " m=" << m() << " t=" << t() << " ||Q*Q-I||=" << orthonormality_defect(Q_)
       << " ||C*C-I||=" << orthonormality_defect(C_) << "]";
    return os.str();
  }

private:
  Vector solution_from_coords(const Vector& coords, const Vector& x0) const {
    Index k = k_;
    while (k > 0) {
      try {
        const Vector y = solve_upper_triangular(qr_.R().topLeftCorner(k, k), coords.head(k));
        return x0 + Q_ * (C_.leftCols(k) * y);
      } catch (const singular_system_error&) {
        --k;
      }
    }
    return x0;
  }

  bool finish_without_space(const LinearOperator& A, RhsRecord rec, const Vector& coords) {
    rec.x = coords.size() == 0 ? rec.x0 : solution_from_coords(coords, rec.x0);
    rec.converged_at = k_;
    rec.true_residual = (rec.b - A.apply(*rec.x)).norm();
    rec.converged = true;
    records_.push_back(std::move(rec));
    return true;
  }

  void enter_search_space(RhsRecord rec) {
    rec.in_search_space = true;
    Z_.conservativeResize(Eigen::NoChange, Z_.cols() + 1);
    Z_.col(Z_.cols() - 1) = rec.r0;
    records_.push_back(std::move(rec));
    const Index idx = static_cast<Index>(records_.size()) - 1;
    active_.push_back(idx);
    current_ = idx;
  }

  /// Q <- [Q q]; G gains a unit block; H, C and every stored coordinate vector gain a zero row.
  void append_basis_vector(const Vector& q) {
    const Index t0 = t();
    Q_.conservativeResize(Eigen::NoChange, t0 + 1);
    Q_.col(t0) = q;
    qr_.extend_unit();
    H_.conservativeResize(t0 + 1, Eigen::NoChange);
    H_.row(t0).setZero();
    C_.conservativeResize(t0 + 1, Eigen::NoChange);
    C_.row(t0).setZero();
    for (Index idx : active_) {
      auto& coords = records_[static_cast<std::size_t>(idx)].coords;
      coords.conservativeResize(t0 + 1);
      coords(t0) = 0;
    }
    if (pending_c_.size() == t0) {
      pending_c_.conservativeResize(t0 + 1);
      pending_c_(t0) = 0;
    }
  }

  Index n_;
  Index k_ = 0;
  Matrix Q_;
  Matrix H_;
  QrFactors qr_{0};
  Matrix C_;
  Matrix Z_;
  Matrix D_Q_;
  Vector v_next_;
  Vector pending_c_;
  std::vector<Index> t_history_;
  std::vector<Index> converged_rows_;
  std::vector<RhsRecord> records_;
  std::vector<Index> active_;
  std::optional<Index> current_;
  Matrix last_ed_;
  Real last_upper_ratio_ = 0;
  bool singular_pivot_seen_ = false;
  DirectionMode mode_ = DirectionMode::compact;
  Vector raw_v_next_;
};

/// Per-iteration data for post-hoc certification.
struct MrhsTrace {
  struct Step {
    Index k = 0;
    Index record = 0;   // position in SharedSearchState::records()
    Real estimate = 0;  // current_residual_norm after the step
    Vector u;           // u_k = (Q G)(:, k-1)
  };
  struct Admission {
    Index record = 0;
    Index k = 0;
    Vector r0;
    Real estimate = 0;
    bool entered = false;  // false when the record was finished by projection alone
  };
  std::vector<Step> steps;
  std::vector<Admission> admissions;
};

struct StreamHooks {
  MrhsTrace* trace = nullptr;
  /// Called after every admission and every iteration.
  std::function<void(const SharedSearchState&)> observer;
};

/// Runs the restart-free multi-RHS solve over the stream. The solve stops at the
/// total iteration cap or on a breakdown_error (rank loss of the direction
/// space); the system in progress is then reported as not converged, with the
/// breakdown flag in the second case, and the rest of the stream is not read.
inline SolveReport solve_stream(const LinearOperator& A, const RhsProvider& provider, const SolveOptions& options = {},
                                const StreamHooks& hooks = {}) {
  using clock = std::chrono::steady_clock;
  const auto run_start = clock::now();
  MatvecCounter counter;
  const LinearOperator Ac = counted(A, counter);
  const Index max_total = options.max_iter > 0 ? options.max_iter : 2 * A.size();

  SharedSearchState state(A.size());
  state.set_direction_mode(options.direction_mode);
  SolveReport report;
  report.method = "mrhs";
  std::optional<Vector> previous;
  Index next_index = 0;

  struct Span {
    long long matvecs_at_start = 0;
    clock::time_point start;
  };
  std::vector<Span> spans;

  auto close_record = [&](const RhsRecord& rec) {
    const auto& span = spans.at(static_cast<std::size_t>(rec.index));
    RecordReport out;
    out.rhs_index = rec.index;
    out.iterations = rec.converged_at.value_or(state.k()) - rec.admitted_at;
    out.matvecs = counter.count - span.matvecs_at_start;
    out.residual_history = rec.history;
    out.rhs_norm = rec.b_norm;
    out.eps = rec.eps;
    out.true_residual = rec.true_residual;
    out.gamma = accuracy_ratio(rec.true_residual, rec.eps, rec.b_norm);
    out.converged = rec.converged;
    out.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - span.start).count();
    report.records.push_back(std::move(out));
  };

  // Pulls systems until one needs new search directions; false when the stream is exhausted.
  auto admit_next = [&]() -> bool {
    while (auto input = provider(previous)) {
      spans.push_back({counter.count, clock::now()});
      const bool done = state.admit_rhs(Ac, *input, next_index++);
      const auto& rec = state.records().back();
      if (hooks.trace) {
        hooks.trace->admissions.push_back({static_cast<Index>(state.records().size()) - 1, state.k(), rec.r0,
                                           rec.history.front(), !done});
      }
      if (hooks.observer) hooks.observer(state);
      if (!done) return true;
      previous = *rec.x;
      close_record(rec);
    }
    return false;
  };

  auto stop_current = [&](bool breakdown) {
    const Index unfinished = *state.current();
    state.abandon_current(Ac);
    close_record(state.records()[static_cast<std::size_t>(unfinished)]);
    report.records.back().breakdown = breakdown;
  };

  bool active = admit_next();
  try {
    if (active) state.update_direction_projection();
    while (active) {
      if (state.k() >= max_total) {
        stop_current(false);
        break;
      }
      const Vector p = state.form_direction();
      state.expand_search_space(Ac, p);
      const Real estimate = state.current_residual_norm();
      state.push_history(estimate);
      if (hooks.trace) {
        hooks.trace->steps.push_back({state.k(), *state.current(), estimate, state.image_basis().col(state.k() - 1)});
      }
      if (hooks.observer) hooks.observer(state);

      if (estimate <= state.current_record().target()) {
        const Index finished = *state.current();
        previous = state.finalize_current(Ac);
        close_record(state.records()[static_cast<std::size_t>(finished)]);
        active = admit_next();
      } else {
        state.continue_with_image();
      }
      if (active) state.update_direction_projection();
    }
  } catch (const breakdown_error&) {
    if (state.current()) stop_current(true);
  }

  report.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - run_start).count();
  report.matvec_ms = counter.elapsed_ms();
  summarize(report);
  return report;
}

}  // namespace mrhs
