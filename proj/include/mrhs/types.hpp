#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace mrhs {

using Real = double;
using Scalar = std::complex<double>;
using Index = Eigen::Index;
using Vector = Eigen::VectorXcd;
using Matrix = Eigen::MatrixXcd;

/// Thrown when a caller breaks a documented precondition (dimension mismatch and the like).
class contract_error : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Triangular solve hit a zero or numerically zero pivot.
class singular_system_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// The search space lost rank or orthogonality beyond recovery.
class breakdown_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw contract_error(message);
}

}  // namespace mrhs
