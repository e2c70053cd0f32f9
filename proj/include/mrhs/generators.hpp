#pragma once

// Synthetic test problems. Everything is a deterministic function of the seed
// for a given standard library (std::mt19937_64 and the std distributions).

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "mrhs/operator.hpp"
#include "mrhs/report.hpp"

namespace mrhs::gen {

class config_error : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

inline Scalar complex_normal(std::mt19937_64& rng) {
  std::normal_distribution<Real> nd(0.0, 1.0);
  const Real re = nd(rng);
  const Real im = nd(rng);
  return {re, im};
}

/// I + scale * G / sqrt(N), G with independent complex normal entries. For
/// scale = 0.25 the spectrum sits in a disk of radius about 0.5 around 1.
inline Matrix random_well_conditioned(Index n, std::uint64_t seed, Real scale = 0.25) {
  require(n > 0, "random_well_conditioned: n must be positive");
  std::mt19937_64 rng(seed);
  Matrix A(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) A(i, j) = complex_normal(rng) * (scale / std::sqrt(static_cast<Real>(n)));
  A += Matrix::Identity(n, n);
  return A;
}

struct StencilParams {
  Real convection_x = 0.6;  // cell Peclet-type coefficients of the central first-derivative terms
  Real convection_y = 0.3;
  Scalar shift{0.05, 0.05};
};

/// Five-point convection-diffusion operator on an n x n grid (N = n^2,
/// Dirichlet boundary), in stencil units:
///   (4 + shift) u_ij - (1 + bx) u_{i-1,j} - (1 - bx) u_{i+1,j} - (1 + by) u_{i,j-1} - (1 - by) u_{i,j+1}
inline SparseMatrix convection_diffusion(Index grid, const StencilParams& p = {}) {
  require(grid > 0, "convection_diffusion: grid size must be positive");
  const Index n = grid * grid;
  std::vector<Eigen::Triplet<Scalar>> entries;
  entries.reserve(static_cast<std::size_t>(5 * n));
  auto id = [grid](Index i, Index j) { return j * grid + i; };
  for (Index j = 0; j < grid; ++j) {
    for (Index i = 0; i < grid; ++i) {
      const Index row = id(i, j);
      entries.emplace_back(row, row, Scalar(4) + p.shift);
      if (i > 0) entries.emplace_back(row, id(i - 1, j), Scalar(-1 - p.convection_x));
      if (i + 1 < grid) entries.emplace_back(row, id(i + 1, j), Scalar(-1 + p.convection_x));
      if (j > 0) entries.emplace_back(row, id(i, j - 1), Scalar(-1 - p.convection_y));
      if (j + 1 < grid) entries.emplace_back(row, id(i, j + 1), Scalar(-1 + p.convection_y));
    }
  }
  SparseMatrix A(n, n);
  A.setFromTriplets(entries.begin(), entries.end());
  return A;
}

/// Real block anti-diagonal matrix [[0, B], [C, 0]] with B upper and C lower
/// bidiagonal. The diagonals decay geometrically to 1/spread and the
/// off-diagonals are random multiples (scaled by coupling) of the smaller
/// neighbouring diagonal entry, which makes B and C non-normal. For any
/// real b supported on the first half, b is orthogonal to A b, so minimal
/// residual methods stagnate in their first step.
inline Matrix nonnormal_ill_conditioned(Index n, std::uint64_t seed, Real spread = 1e3, Real coupling = 0.5) {
  require(n >= 2 && n % 2 == 0, "nonnormal_ill_conditioned: n must be even and at least 2");
  require(spread >= 1, "nonnormal_ill_conditioned: spread must be at least 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<Real> nd(0.0, 1.0);
  const Index h = n / 2;
  auto diagonal = [&](Index i) {
    return h == 1 ? 1.0 : std::pow(spread, -static_cast<Real>(i) / static_cast<Real>(h - 1));
  };
  Matrix B = Matrix::Zero(h, h);
  Matrix C = Matrix::Zero(h, h);
  for (Index i = 0; i < h; ++i) {
    B(i, i) = diagonal(i);
    C(i, i) = diagonal(h - 1 - i);
  }
  for (Index i = 0; i + 1 < h; ++i) {
    B(i, i + 1) = coupling * nd(rng) * std::min(B(i, i).real(), B(i + 1, i + 1).real());
    C(i + 1, i) = coupling * nd(rng) * std::min(C(i, i).real(), C(i + 1, i + 1).real());
  }
  Matrix A = Matrix::Zero(n, n);
  A.topRightCorner(h, h) = B;
  A.bottomLeftCorner(h, h) = C;
  return A;
}

/// Complex normal right-hand sides.
inline std::vector<Vector> random_family(Index n, Index count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Vector> out;
  for (Index s = 0; s < count; ++s) {
    Vector b(n);
    for (Index i = 0; i < n; ++i) b(i) = complex_normal(rng);
    out.push_back(std::move(b));
  }
  return out;
}

/// Real normal right-hand sides supported on the first n/2 entries.
inline std::vector<Vector> half_real_family(Index n, Index count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<Real> nd(0.0, 1.0);
  std::vector<Vector> out;
  for (Index s = 0; s < count; ++s) {
    Vector b = Vector::Zero(n);
    for (Index i = 0; i < n / 2; ++i) b(i) = nd(rng);
    out.push_back(std::move(b));
  }
  return out;
}

/// Re <a, b> / (||a|| ||b||).
inline Real correlation(const Vector& a, const Vector& b) {
  const Real scale = a.norm() * b.norm();
  return scale > 0 ? std::real(a.dot(b)) / scale : 0;
}

struct AngleSweep {
  std::vector<Vector> rhs;
  std::vector<Real> angles;
  Real step = 0;
};

/// Plane waves exp(i kappa (x cos(theta) + y sin(theta))) sampled on a square
/// grid in [-1/2, 1/2]^2 (the first N points of the smallest grid holding N),
/// kappa = 2 pi waves. The angle step is the largest one (to 1e-6 rad) for
/// which every adjacent pair keeps correlation >= floor; the seed picks the
/// starting angle.
inline AngleSweep angle_sweep_family(Index n, Index count, std::uint64_t seed, Real floor = 0.9, Real waves = 4) {
  require(n > 0 && count > 0, "angle_sweep_family: n and count must be positive");
  require(floor > -1 && floor < 1, "angle_sweep_family: correlation floor must lie in (-1, 1)");
  const Index side = static_cast<Index>(std::ceil(std::sqrt(static_cast<Real>(n))));
  std::vector<Real> x(static_cast<std::size_t>(n)), y(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const Real denom = side > 1 ? static_cast<Real>(side - 1) : 1.0;
    x[static_cast<std::size_t>(i)] = static_cast<Real>(i % side) / denom - 0.5;
    y[static_cast<std::size_t>(i)] = static_cast<Real>(i / side) / denom - 0.5;
  }
  const Real kappa = 2 * std::numbers::pi * waves;
  auto wave = [&](Real theta) {
    Vector b(n);
    const Real cx = kappa * std::cos(theta);
    const Real cy = kappa * std::sin(theta);
    for (Index i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      b(i) = std::polar(1.0, cx * x[k] + cy * y[k]);
    }
    return b;
  };
  std::mt19937_64 rng(seed);
  const Real theta0 = std::uniform_real_distribution<Real>(0, 2 * std::numbers::pi)(rng);

  auto worst = [&](Real step) {
    Real lowest = 1;
    Vector prev = wave(theta0);
    for (Index j = 1; j < count; ++j) {
      Vector next = wave(theta0 + static_cast<Real>(j) * step);
      lowest = std::min(lowest, correlation(prev, next));
      prev = std::move(next);
    }
    return lowest;
  };

  Real lo = 0, hi = 2 * std::numbers::pi / static_cast<Real>(std::max<Index>(count, 2));
  if (count > 1 && worst(hi) < floor) {
    while (hi - lo > 1e-6) {
      const Real mid = 0.5 * (lo + hi);
      if (worst(mid) >= floor) lo = mid;
      else hi = mid;
    }
  } else {
    lo = hi;
  }

  AngleSweep out;
  out.step = lo;
  for (Index j = 0; j < count; ++j) {
    const Real theta = theta0 + static_cast<Real>(j) * lo;
    out.angles.push_back(theta);
    out.rhs.push_back(wave(theta));
  }
  return out;
}

/// Largest over smallest singular value of a dense matrix.
inline Real condition_number(const Matrix& A) {
  Eigen::JacobiSVD<Matrix> svd(A);
  const auto& s = svd.singularValues();
  return s(0) / s(s.size() - 1);
}

}  // namespace mrhs::gen
