#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <utility>

#include <Eigen/SparseCore>

#include "mrhs/types.hpp"

namespace mrhs {

using SparseMatrix = Eigen::SparseMatrix<Scalar, Eigen::RowMajor>;

/// A square operator seen only through its dimension and matrix-vector products.
/// Copies share the underlying callable; apply() must be safe to call concurrently.
class LinearOperator {
public:
  using Apply = std::function<Vector(const Vector&)>;

  LinearOperator() = default;
  LinearOperator(Index size, Apply apply, Real norm_estimate = 0)
      : size_(size), apply_(std::move(apply)), norm_estimate_(norm_estimate) {}

  Index size() const { return size_; }

  /// An upper bound-ish scale for ||A||; 0 when unknown.
  Real norm_estimate() const { return norm_estimate_; }

  Vector apply(const Vector& x) const {
    require(x.size() == size_, "operator of size " + std::to_string(size_) + " applied to vector of size " +
                                   std::to_string(x.size()));
    return apply_(x);
  }
  Vector operator()(const Vector& x) const { return apply(x); }

private:
  Index size_ = 0;
  Apply apply_;
  Real norm_estimate_ = 0;
};

inline LinearOperator dense_operator(Matrix A) {
  require(A.rows() == A.cols(), "dense_operator: matrix is not square");
  const Index n = A.rows();
  const Real norm = A.norm();
  auto shared = std::make_shared<const Matrix>(std::move(A));
  return LinearOperator(n, [shared](const Vector& x) -> Vector { return (*shared) * x; }, norm);
}

inline LinearOperator sparse_operator(SparseMatrix A) {
  require(A.rows() == A.cols(), "sparse_operator: matrix is not square");
  const Index n = A.rows();
  const Real norm = A.norm();
  auto shared = std::make_shared<const SparseMatrix>(std::move(A));
  return LinearOperator(n, [shared](const Vector& x) -> Vector { return (*shared) * x; }, norm);
}

/// Rounds a vector to complex<float> and back.
inline Vector round_to_single(const Vector& x) {
  return x.cast<std::complex<float>>().cast<Scalar>();
}

/// Emulates a single-precision matvec: input and output are rounded to complex<float>.
inline LinearOperator single_precision(const LinearOperator& A) {
  return LinearOperator(
      A.size(), [A](const Vector& x) -> Vector { return round_to_single(A.apply(round_to_single(x))); },
      A.norm_estimate());
}

/// Counts operator applications and the time spent inside them.
struct MatvecCounter {
  long long count = 0;
  std::chrono::nanoseconds elapsed{0};

  double elapsed_ms() const { return std::chrono::duration<double, std::milli>(elapsed).count(); }
};

/// Wraps A so every apply() is recorded in *counter. The counter must outlive the result.
inline LinearOperator counted(const LinearOperator& A, MatvecCounter& counter) {
  MatvecCounter* sink = &counter;
  return LinearOperator(
      A.size(),
      [A, sink](const Vector& x) -> Vector {
        const auto start = std::chrono::steady_clock::now();
        Vector y = A.apply(x);
        sink->elapsed += std::chrono::steady_clock::now() - start;
        ++sink->count;
        return y;
      },
      A.norm_estimate());
}

}  // namespace mrhs
