#pragma once

// Brute-force certification of the multi-RHS solver. The search space is
// rebuilt column by column from a solver trace and the least-squares problem
// min ||r0 - A B y|| is solved with a dense factorization that shares no code
// with the solvers' incremental QR.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "mrhs/gmres_mrhs.hpp"
#include "mrhs/operator.hpp"

namespace mrhs::oracle {

struct BasisColumn {
  enum class Kind { projected_residual, image_vector };
  Kind kind = Kind::image_vector;
  Index source = 0;  // record position for residuals, j (1-based) for u_j
};

struct ExplicitSearchBasis {
  Matrix columns;
  std::vector<BasisColumn> provenance;
  bool full_rank = true;
};

/// Orthonormal basis of colspan(M) from the SVD, rank cut at tol * sigma_max.
inline Matrix svd_range(const Matrix& M, Real tol = 1e-8) {
  if (M.cols() == 0) return Matrix(M.rows(), 0);
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeThinU);
  const auto& sigma = svd.singularValues();
  Index rank = 0;
  while (rank < sigma.size() && sigma(rank) > tol * sigma(0)) ++rank;
  return svd.matrixU().leftCols(rank);
}

inline Real smallest_singular_value(const Matrix& M) {
  if (M.cols() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(M);
  return svd.singularValues()(svd.singularValues().size() - 1);
}

/// ||P_A - P_B||_2 for the orthogonal projectors onto the two column spans.
inline Real projector_distance(const Matrix& A, const Matrix& B, Real tol = 1e-8) {
  const Matrix UA = svd_range(A, tol);
  const Matrix UB = svd_range(B, tol);
  const Matrix diff = UA * UA.adjoint() - UB * UB.adjoint();
  if (diff.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(diff);
  return svd.singularValues()(0);
}

/// L_k assembled in the order
///   r^{(1)}_0, u_1, ..., u_{n_1-1}, r^{(2)}_{n_1}, u_{n_1+1}, ..., r^{(m)}_{n_{m-1}}, ..., u_{k-1}
/// where r^{(s)}_{n_{s-1}} is the admitted residual with its A L_{n_{s-1}} part removed.
inline ExplicitSearchBasis assemble_search_basis(const MrhsTrace& trace, Index k) {
  ExplicitSearchBasis basis;
  std::vector<const MrhsTrace::Admission*> entered;
  for (const auto& a : trace.admissions)
    if (a.entered && a.k < k) entered.push_back(&a);
  if (entered.empty() || k == 0) {
    basis.columns = Matrix(trace.admissions.empty() ? 0 : trace.admissions.front().r0.size(), 0);
    basis.full_rank = k == 0;
    return basis;
  }
  const Index n = entered.front()->r0.size();

  std::vector<Vector> image;  // u_1 ... u_{k-1}
  for (const auto& s : trace.steps)
    if (s.k < k) image.push_back(s.u);
  if (static_cast<Index>(image.size()) < k - 1) {
    basis.full_rank = false;
    basis.columns = Matrix(n, 0);
    return basis;
  }

  basis.columns = Matrix(n, k);
  Index col = 0;
  for (std::size_t s = 0; s < entered.size(); ++s) {
    const Index start = entered[s]->k;
    const Index stop = s + 1 < entered.size() ? entered[s + 1]->k : k;
    Vector residual = entered[s]->r0;
    if (start > 0) {
      Matrix U(n, start);
      for (Index j = 0; j < start; ++j) U.col(j) = image[static_cast<std::size_t>(j)];
      const Matrix range = svd_range(U, 1e-12);
      residual -= range * (range.adjoint() * residual);
    }
    basis.columns.col(col++) = residual;
    basis.provenance.push_back({BasisColumn::Kind::projected_residual, entered[s]->record});
    for (Index j = start + 1; j < stop; ++j) {
      basis.columns.col(col++) = image[static_cast<std::size_t>(j - 1)];
      basis.provenance.push_back({BasisColumn::Kind::image_vector, j});
    }
  }
  basis.columns.conservativeResize(Eigen::NoChange, col);
  if (col != k) {
    basis.full_rank = false;
    return basis;
  }
  Matrix scaled = basis.columns;
  for (Index j = 0; j < scaled.cols(); ++j) scaled.col(j) /= scaled.col(j).norm();
  Eigen::JacobiSVD<Matrix> svd(scaled);
  basis.full_rank = svd.singularValues()(k - 1) > 1e-8 * svd.singularValues()(0);
  return basis;
}

struct MinResidual {
  Real norm = 0;
  Vector y;
  Real normal_residual = 0;  // ||(AB)^* r|| / (||AB|| ||r0||)
  bool certified = true;
};

/// min_y ||r0 - A B y|| through a column-pivoted Householder QR of A B.
inline MinResidual min_residual_oracle(const LinearOperator& A, const Matrix& basis, const Vector& r0) {
  MinResidual out;
  if (basis.cols() == 0) {
    out.norm = r0.norm();
    out.y = Vector::Zero(0);
    return out;
  }
  // Orthonormalize the basis first (Householder); the raw columns can be very
  // ill-conditioned once a system is close to convergence.
  Matrix scaled = basis;
  for (Index j = 0; j < scaled.cols(); ++j) {
    const Real norm = scaled.col(j).norm();
    if (norm > 0) scaled.col(j) /= norm;
  }
  Eigen::ColPivHouseholderQR<Matrix> rank_qr(scaled);
  rank_qr.setThreshold(1e-13);
  if (rank_qr.rank() < basis.cols()) out.certified = false;
  Eigen::HouseholderQR<Matrix> basis_qr(basis);
  const Matrix W = basis_qr.householderQ() * Matrix::Identity(basis.rows(), basis.cols());
  const Matrix T = basis_qr.matrixQR().topRows(basis.cols()).triangularView<Eigen::Upper>();
  Matrix AW(basis.rows(), basis.cols());
  for (Index j = 0; j < basis.cols(); ++j) AW.col(j) = A.apply(W.col(j));
  Eigen::ColPivHouseholderQR<Matrix> qr(AW);
  qr.setThreshold(1e-13);
  if (qr.rank() < basis.cols()) out.certified = false;
  const Vector z = qr.solve(r0);
  out.y = T.triangularView<Eigen::Upper>().solve(z);
  const Matrix& AB = AW;
  const Vector r = r0 - AW * z;
  out.norm = r.norm();
  const Real scale = AB.norm() * r0.norm();
  out.normal_residual = scale > 0 ? (AB.adjoint() * r).norm() / scale : 0;
  return out;
}

inline MinResidual min_residual_oracle(const LinearOperator& A, const ExplicitSearchBasis& basis, const Vector& r0) {
  auto out = min_residual_oracle(A, basis.columns, r0);
  out.certified = out.certified && basis.full_rank;
  return out;
}

struct Certification {
  Index checks = 0;
  Real max_relative_deviation = 0;  // |estimate - oracle| / max(oracle, floor)
  Index failures = 0;
  std::vector<std::string> messages;

  bool passed() const { return failures == 0; }
};

/// Compares every residual estimate in the trace with the oracle minimum over
/// the explicitly assembled L_k. Deviations are relative to max(oracle, floor * ||r0||)
/// so that residuals at roundoff level do not produce spurious failures.
inline Certification certify(const LinearOperator& A, const MrhsTrace& trace, Real rel_tol = 1e-9,
                             Real floor = 1e-13) {
  Certification out;
  auto r0_of = [&](Index record) -> const Vector& {
    for (const auto& a : trace.admissions)
      if (a.record == record) return a.r0;
    throw contract_error("certify: record " + std::to_string(record) + " has no admission");
  };
  auto check = [&](Index k, const Vector& r0, Real estimate, const std::string& what) {
    const auto basis = assemble_search_basis(trace, k);
    const auto best = min_residual_oracle(A, basis, r0);
    ++out.checks;
    const Real scale = std::max(best.norm, floor * r0.norm());
    const Real dev = scale > 0 ? std::abs(estimate - best.norm) / scale : 0;
    out.max_relative_deviation = std::max(out.max_relative_deviation, dev);
    if (!best.certified || dev > rel_tol) {
      ++out.failures;
      char buf[160];
      std::snprintf(buf, sizeof buf, " k=%lld: estimate %.9e oracle %.9e deviation %.2e%s", static_cast<long long>(k),
                    estimate, best.norm, dev, best.certified ? "" : " (rank deficient)");
      out.messages.push_back(what + buf);
    }
  };
  for (const auto& a : trace.admissions) check(a.k, a.r0, a.estimate, "admission " + std::to_string(a.record));
  for (const auto& s : trace.steps) check(s.k, r0_of(s.record), s.estimate, "step");
  return out;
}

}  // namespace mrhs::oracle
