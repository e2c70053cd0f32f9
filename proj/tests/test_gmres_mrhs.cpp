#include <gtest/gtest.h>

#include <cmath>

#include "mrhs/gmres.hpp"
#include "mrhs/gmres_mrhs.hpp"
#include "support.hpp"

using namespace mrhs;

namespace {

Vector unit(Index n, Index i, Scalar v = 1) {
  Vector e = Vector::Zero(n);
  e(i) = v;
  return e;
}

}  // namespace

TEST(AdmitRhs, FirstSystemInitializesBasis) {
  const auto A = dense_operator(Matrix::Identity(3, 3));
  SharedSearchState s(3);
  EXPECT_FALSE(s.admit_rhs(A, {unit(3, 0), Vector(), 1e-12}, 0));
  EXPECT_EQ(s.k(), 0);
  EXPECT_EQ(s.m(), 1);
  EXPECT_EQ(s.t(), 1);
  EXPECT_EQ(s.Q().col(0), unit(3, 0));
  EXPECT_EQ(s.v_next(), Vector::Ones(1));
  EXPECT_EQ(s.Z().cols(), 1);
}

TEST(AdmitRhs, InitialGuessIsSubtracted) {
  const auto A = dense_operator(Matrix::Identity(3, 3));
  SharedSearchState s(3);
  s.admit_rhs(A, {unit(3, 0, 2), unit(3, 0), 1e-12}, 0);
  EXPECT_EQ(s.Q().col(0), unit(3, 0));
}

TEST(AdmitRhs, ZeroRightHandSideIsSolvedWithoutBasis) {
  const auto A = dense_operator(Matrix::Identity(3, 3));
  SharedSearchState s(3);
  EXPECT_TRUE(s.admit_rhs(A, {Vector::Zero(3), Vector(), 1e-12}, 0));
  EXPECT_EQ(s.t(), 0);
  EXPECT_FALSE(s.current());
  EXPECT_EQ(*s.records()[0].x, Vector::Zero(3));
}

TEST(ExpandSearchSpace, InvariantSubspaceDoesNotGrowQ) {
  const auto A = dense_operator(Matrix::Identity(3, 3));
  SharedSearchState s(3);
  s.admit_rhs(A, {unit(3, 0), Vector(), 1e-12}, 0);
  s.update_direction_projection();
  const Vector p = s.form_direction();
  EXPECT_EQ(p, unit(3, 0));
  s.expand_search_space(A, p);
  EXPECT_EQ(s.t(), 1);
  EXPECT_EQ(s.H(), Matrix::Ones(1, 1));
}

TEST(ExpandSearchSpace, SwapAppendsColumn) {
  Matrix M(2, 2);
  M << 0, 1, 1, 0;
  const auto A = dense_operator(M);
  SharedSearchState s(2);
  s.admit_rhs(A, {unit(2, 0), Vector(), 1e-12}, 0);
  s.update_direction_projection();
  s.expand_search_space(A, s.form_direction());
  EXPECT_EQ(s.t(), 2);
  EXPECT_EQ(s.Q().col(1), unit(2, 1));
  EXPECT_EQ(s.H().col(0), unit(2, 1));
  EXPECT_NEAR(s.current_residual_norm(), 1, 1e-15);
}

TEST(ExpandSearchSpace, ExtendedArnoldiRelationOnRandom) {
  auto p = test::random_problem(20, 3, 11, 1e-8);
  test::InvariantLog log;
  StreamHooks hooks;
  hooks.observer = [&](const SharedSearchState& s) { test::observe_invariants(p.A, s, log); };
  solve_stream(dense_operator(p.A), provider_from_list(p.systems), {}, hooks);
  EXPECT_LE(log.arnoldi, 1e-10);
  EXPECT_TRUE(log.ok()) << log.describe();
}

TEST(FormDirection, IdentityStreamUsesNewResidual) {
  // b1 = e1 converges in one step; b2 = e2 then gives p_2 = e2.
  const auto A = dense_operator(Matrix::Identity(3, 3));
  SharedSearchState s(3);
  s.admit_rhs(A, {unit(3, 0), Vector(), 1e-12}, 0);
  s.update_direction_projection();
  s.expand_search_space(A, s.form_direction());
  ASSERT_LE(s.current_residual_norm(), 1e-12);
  s.finalize_current(A);
  EXPECT_FALSE(s.admit_rhs(A, {unit(3, 1), Vector(), 1e-12}, 1));
  EXPECT_EQ(s.t(), 2);
  s.update_direction_projection();
  const Vector p = s.form_direction();
  EXPECT_NEAR((p - unit(3, 1)).norm(), 0, 1e-15);
}

TEST(CurrentResidualNorm, MatchesExplicitProjector) {
  auto p = test::random_problem(15, 3, 21, 1e-8);
  Real worst = 0;
  StreamHooks hooks;
  hooks.observer = [&](const SharedSearchState& s) {
    if (!s.current()) return;
    const Vector& r0 = s.current_record().r0;
    const Matrix U = s.image_basis();
    const Real explicit_norm = (r0 - U * (U.adjoint() * r0)).norm();
    worst = std::max(worst, std::abs(s.current_residual_norm() - explicit_norm) / r0.norm());
  };
  solve_stream(dense_operator(p.A), provider_from_list(p.systems), {}, hooks);
  EXPECT_LE(worst, 1e-10);
}

TEST(SolveStream, IdentityUnitVectors) {
  const auto A = dense_operator(Matrix::Identity(3, 3));
  std::vector<RhsInput> in{{unit(3, 0), Vector(), 1e-12}, {unit(3, 1), Vector(), 1e-12}, {unit(3, 2), Vector(), 1e-12}};
  Index final_t = 0;
  StreamHooks hooks;
  hooks.observer = [&](const SharedSearchState& s) { final_t = s.t(); };
  const auto rep = solve_stream(A, provider_from_list(in), {}, hooks);
  EXPECT_EQ(rep.total_iterations, 3);
  EXPECT_TRUE(rep.all_verified());
  EXPECT_EQ(final_t, 3);
}

TEST(SolveStream, SingleSystemMatchesClassicGmres) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto p = test::random_problem(20, 1, seed + 70, 1e-10);
    const auto op = dense_operator(p.A);
    const auto classic = gmres_solve(op, p.systems[0].b, Vector::Zero(20), 1e-10);
    MrhsTrace trace;
    StreamHooks hooks;
    hooks.trace = &trace;
    std::optional<Vector> x;
    auto provider = provider_from_list(p.systems);
    RhsProvider capture = [&](const std::optional<Vector>& prev) {
      if (prev) x = prev;
      return provider(prev);
    };
    const auto rep = solve_stream(op, capture, {}, hooks);
    ASSERT_EQ(rep.records.size(), 1u);
    const auto& h = rep.records[0].residual_history;
    ASSERT_EQ(h.size(), classic.history.size());
    for (std::size_t k = 0; k < h.size(); ++k) EXPECT_LE(std::abs(h[k] - classic.history[k]), 1e-10 * h[0]);
    ASSERT_TRUE(x.has_value());
    EXPECT_LE((*x - classic.x).norm(), 1e-9 * classic.x.norm());
  }
}

TEST(SolveStream, SingleSystemDirectionsSpanKrylovVectors) {
  auto p = test::random_problem(20, 1, 5, 1e-10);
  const auto op = dense_operator(p.A);
  auto classic = start_classic(p.systems[0].b);
  Real worst = 0;
  StreamHooks hooks;
  hooks.observer = [&](const SharedSearchState& s) {
    if (s.k() == 0 || classic.happy_breakdown) return;
    // p_k vs the k-th Arnoldi vector, compared up to a unit phase.
    const Vector pk = s.directions().col(s.k() - 1);
    const Vector qk = classic.Q.col(s.k() - 1);
    worst = std::max(worst, 1 - std::abs(qk.dot(pk)));
    arnoldi_step(classic, op);
  };
  arnoldi_step(classic, op);
  solve_stream(op, provider_from_list(p.systems), {}, hooks);
  EXPECT_LE(worst, 1e-10);
}

TEST(SolveStream, ExactTerminationWithinN) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto p = test::random_problem(30, 3, seed + 500, 1e-12);
    const auto rep = solve_stream(dense_operator(p.A), provider_from_list(p.systems));
    EXPECT_LE(rep.total_iterations, 30);
    EXPECT_TRUE(rep.all_converged());
  }
}

TEST(SolveStream, DuplicateRightHandSideNeedsNoIterations) {
  auto p = test::random_problem(20, 1, 8, 1e-8);
  p.systems.push_back(p.systems[0]);
  std::vector<Vector> solutions;
  auto inner = provider_from_list(p.systems);
  RhsProvider capture = [&](const std::optional<Vector>& prev) {
    if (prev) solutions.push_back(*prev);
    return inner(prev);
  };
  const auto rep = solve_stream(dense_operator(p.A), capture);
  ASSERT_EQ(rep.records.size(), 2u);
  EXPECT_EQ(rep.records[1].iterations, 0);
  EXPECT_TRUE(rep.records[1].converged);
  ASSERT_EQ(solutions.size(), 2u);
  EXPECT_LE((solutions[0] - solutions[1]).norm(), 1e-12 * solutions[0].norm());
  EXPECT_GT(rep.records[0].iterations, 0);
}

TEST(SolveStream, ResidualInsideBasisStillExtendsSearchSpace) {
  // The second right-hand side lies in colspan(Q) after the first solve but is far from solved.
  auto p = test::random_problem(20, 1, 31, 1e-3);
  Matrix Q_final;
  Index t_before = 0, k_before = 0, t_admitted = -1, k_final = 0;
  StreamHooks hooks;
  hooks.observer = [&](const SharedSearchState& s) {
    if (s.records().size() == 1 && s.current()) Q_final = s.Q(), t_before = s.t(), k_before = s.k();
    if (s.records().size() == 2 && t_admitted < 0) t_admitted = s.t();
    k_final = s.k();
  };
  int calls = 0;
  RhsProvider provider = [&](const std::optional<Vector>&) -> std::optional<RhsInput> {
    ++calls;
    if (calls == 1) return p.systems[0];
    if (calls == 2) return RhsInput{Q_final.col(Q_final.cols() - 1) + Q_final.col(0), Vector(), 1e-3};
    return std::nullopt;
  };
  const auto rep = solve_stream(dense_operator(p.A), provider, {}, hooks);
  ASSERT_EQ(rep.records.size(), 2u);
  EXPECT_EQ(t_admitted, t_before);
  EXPECT_GT(rep.records[1].iterations, 0);
  EXPECT_GT(k_final, k_before);
  EXPECT_TRUE(rep.all_verified());
}

TEST(SolveStream, ProviderSeesPreviousSolution) {
  auto p = test::random_problem(20, 1, 12, 1e-10);
  const Matrix A = p.A;
  const Vector b1 = p.systems[0].b;
  int call = 0;
  Vector second_b;
  RhsProvider provider = [&](const std::optional<Vector>& prev) -> std::optional<RhsInput> {
    ++call;
    if (call == 1) return RhsInput{b1, Vector(), 1e-10};
    if (call == 2) {
      EXPECT_TRUE(prev.has_value());
      EXPECT_LE((A * *prev - b1).norm(), 1.05e-10 * b1.norm());
      second_b = *prev;  // solve A x = x_1 next
      return RhsInput{second_b, Vector(), 1e-10};
    }
    return std::nullopt;
  };
  const auto rep = solve_stream(dense_operator(A), provider);
  EXPECT_EQ(rep.records.size(), 2u);
  EXPECT_TRUE(rep.all_verified());
}

TEST(SolveStream, MatvecAccounting) {
  auto p = test::random_problem(25, 4, 17, 1e-8);
  MatvecCounter outer;
  const auto op = counted(dense_operator(p.A), outer);
  const auto rep = solve_stream(op, provider_from_list(p.systems));
  // one per iteration, one per admitted system, one a-posteriori check per system
  const long long expected = rep.total_iterations + 2 * static_cast<long long>(rep.records.size());
  EXPECT_EQ(rep.total_matvecs, expected);
  EXPECT_EQ(outer.count, expected);
}

TEST(SolveStream, StructuralInvariantsAndRecurrence) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    auto p = test::random_problem(30, 4, seed + 900, 1e-8);
    test::InvariantLog inv;
    test::RecurrenceLog st;
    test::RecurrenceObserver recurrence(st);
    StreamHooks hooks;
    hooks.observer = [&](const SharedSearchState& s) {
      test::observe_invariants(p.A, s, inv);
      recurrence(s);
      EXPECT_LE(s.v_next().size(), 2 * s.m());
    };
    const auto rep = solve_stream(dense_operator(p.A), provider_from_list(p.systems), {}, hooks);
    EXPECT_TRUE(rep.all_verified());
    EXPECT_TRUE(inv.ok()) << inv.describe();
    EXPECT_TRUE(st.ok()) << "recurrence " << st.recurrence << " pivot " << st.smallest_pivot;
    EXPECT_GT(st.pivot_checks, 0);
    for (const auto& r : rep.records)
      for (std::size_t j = 1; j < r.residual_history.size(); ++j)
        EXPECT_LE(r.residual_history[j], r.residual_history[j - 1] * (1 + 1e-12));
  }
}

TEST(SolveStream, SearchSpacesAreNested) {
  auto p = test::random_problem(20, 3, 44, 1e-8);
  Matrix previous;
  Real worst = 0;
  StreamHooks hooks;
  hooks.observer = [&](const SharedSearchState& s) {
    if (previous.cols() > 0 && s.k() == previous.cols() + 1) {
      const Matrix now = s.C().topLeftCorner(previous.rows(), previous.cols());
      worst = std::max(worst, (now - previous).norm());
      worst = std::max(worst, s.C().bottomLeftCorner(s.C().rows() - previous.rows(), previous.cols()).norm());
    }
    previous = s.C();
  };
  solve_stream(dense_operator(p.A), provider_from_list(p.systems), {}, hooks);
  EXPECT_EQ(worst, 0);
}

TEST(SolveStream, IterationCapReportsNonConvergence) {
  auto p = test::random_problem(30, 3, 2, 1e-12);
  SolveOptions o;
  o.max_iter = 5;
  const auto rep = solve_stream(dense_operator(p.A), provider_from_list(p.systems), o);
  ASSERT_EQ(rep.records.size(), 1u);
  EXPECT_FALSE(rep.records[0].converged);
  EXPECT_EQ(rep.total_iterations, 5);
}

TEST(SolveStream, ReorthogonalizedModeAgreesWithCompact) {
  auto p = test::random_problem(30, 4, 77, 1e-8);
  SolveOptions compact, reorth;
  reorth.direction_mode = DirectionMode::reorthogonalized;
  const auto a = solve_stream(dense_operator(p.A), provider_from_list(p.systems), compact);
  const auto b = solve_stream(dense_operator(p.A), provider_from_list(p.systems), reorth);
  ASSERT_EQ(a.records.size(), b.records.size());
  EXPECT_EQ(a.total_iterations, b.total_iterations);
  for (std::size_t s = 0; s < a.records.size(); ++s)
    for (std::size_t j = 0; j < a.records[s].residual_history.size(); ++j)
      EXPECT_NEAR(a.records[s].residual_history[j], b.records[s].residual_history[j],
                  1e-8 * a.records[s].residual_history[0]);
}

TEST(SolveStream, RejectsMismatchedDimensions) {
  const auto A = dense_operator(Matrix::Identity(3, 3));
  std::vector<RhsInput> in{{Vector::Ones(4), Vector(), 1e-8}};
  EXPECT_THROW(solve_stream(A, provider_from_list(in)), contract_error);
}
