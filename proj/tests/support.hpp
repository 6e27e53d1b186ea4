#pragma once

// Shared helpers for the test suites: deterministic random instance
// generation and independent numeric oracles (finite differences, grid
// search, big-integer combinatorics).  Everything here is intentionally
// implemented without touching the library code paths under test.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "ldgeom/contraction.hpp"
#include "ldgeom/types.hpp"

namespace testsupport {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// Deterministic instance generation.  mt19937_64 with fixed seeds; only used
// to produce instances, never as a numeric oracle.

inline double uniform(std::mt19937_64& gen, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(gen);
}

// Interior simplex point with all components bounded below by floor_frac / n.
inline Vec random_simplex(std::mt19937_64& gen, int n, double floor_frac = 0.1) {
  Vec w(n);
  for (int i = 0; i < n; ++i) w(i) = -std::log(uniform(gen, 1e-12, 1.0));
  w /= w.sum();
  const Vec u = Vec::Constant(n, 1.0 / n);
  return (1.0 - floor_frac) * w + floor_frac * u;
}

// Random observable matrix passing the type invariants, with the stacked
// constraint matrix [X; 1^T] kept well conditioned.
inline Mat random_observable(std::mt19937_64& gen, int n, int k) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Mat X(k, n);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < n; ++j) X(i, j) = uniform(gen, -2.0, 2.0);
    Mat A(k + 1, n);
    A.topRows(k) = X;
    A.row(k).setOnes();
    Eigen::JacobiSVD<Mat> svd(A);
    const auto& sv = svd.singularValues();
    if (sv(k) < 0.25 * sv(0) || sv(0) > 8.0) continue;
    try {
      ldgeom::ObservableMatrix<double> probe(X);
      return X;
    } catch (const ldgeom::Error&) {
      continue;
    }
  }
  throw std::runtime_error("random_observable: generation failed");
}

// Orthonormal basis of the null space of [X; 1^T] (directions along the fiber).
inline Mat fiber_basis(const Mat& X) {
  const int k = static_cast<int>(X.rows()), n = static_cast<int>(X.cols());
  Mat A(k + 1, n);
  A.topRows(k) = X;
  A.row(k).setOnes();
  Eigen::FullPivLU<Mat> lu(A);
  return lu.kernel();  // n x (n - k - 1)
}

// Random point of the fiber through nu0, staying a safe distance from the
// boundary of the simplex.
inline Vec random_fiber_point(std::mt19937_64& gen, const Mat& X, const Vec& nu0) {
  const Mat Z = fiber_basis(X);
  for (int attempt = 0; attempt < 200; ++attempt) {
    Vec t(Z.cols());
    for (int i = 0; i < t.size(); ++i) t(i) = uniform(gen, -1.0, 1.0);
    if (t.norm() == 0.0) continue;
    const double scale = uniform(gen, 0.1, 0.6) * nu0.minCoeff() / t.norm();
    const Vec cand = nu0 + Z * (scale * t);
    if (cand.minCoeff() > 0.2 * nu0.minCoeff()) return cand;
  }
  return nu0;
}

// ---------------------------------------------------------------------------
// Finite difference oracles (central differences).

template <typename F>
double central_difference(const F& f, double x0, double h) {
  return (f(x0 + h) - f(x0 - h)) / (2.0 * h);
}

template <typename F>
Vec gradient_fd(const F& f, const Vec& x0, double h) {
  Vec g(x0.size());
  for (int i = 0; i < x0.size(); ++i) {
    Vec xp = x0, xm = x0;
    xp(i) += h;
    xm(i) -= h;
    g(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

// Hessian via central differences of a supplied gradient map.
template <typename G>
Mat jacobian_fd(const G& grad, const Vec& x0, double h) {
  const Vec g0 = grad(x0);
  Mat J(g0.size(), x0.size());
  for (int i = 0; i < x0.size(); ++i) {
    Vec xp = x0, xm = x0;
    xp(i) += h;
    xm(i) -= h;
    J.col(i) = (grad(xp) - grad(xm)) / (2.0 * h);
  }
  return J;
}

// ---------------------------------------------------------------------------
// Fiber grid search oracle for the contracted rate function.  Scans the
// fiber {nu >= 0, sum nu = 1, X nu = x} on a regular grid of the free
// coordinates, solving the remaining ones from the equality constraints, and
// returns the feasible grid point of smallest relative entropy to p.
// Independent of the library's Newton/tilt machinery.

struct GridMinimum {
  double value = std::numeric_limits<double>::infinity();
  Vec argmin;
  long feasible = 0;
};

inline double kl_raw(const Vec& nu, const Vec& p) {
  double s = 0;
  for (int i = 0; i < nu.size(); ++i)
    if (nu(i) > 0) s += nu(i) * std::log(nu(i) / p(i));
  return s;
}

inline GridMinimum fiber_grid_minimum(const Mat& X, const Vec& x, const Vec& p, double step) {
  const int k = static_cast<int>(X.rows()), n = static_cast<int>(X.cols());
  const int free_dim = n - k - 1;
  Mat A(k + 1, n);
  A.topRows(k) = X;
  A.row(k).setOnes();
  Vec b(k + 1);
  b.head(k) = x;
  b(k) = 1.0;
  // Solve the dependent coordinates (the last k + 1) from the free ones.
  const Mat B = A.rightCols(k + 1);
  const Mat C = A.leftCols(free_dim);
  const Eigen::PartialPivLU<Mat> Blu(B);
  const Vec base = Blu.solve(b);        // dependent part when free coords vanish
  const Mat slope = Blu.solve(C);       // sensitivity to the free coords

  GridMinimum best;
  Vec nu(n);
  const long steps = static_cast<long>(std::floor(1.0 / step));
  if (free_dim == 1) {
    for (long i = 0; i <= steps; ++i) {
      const double f0 = i * step;
      nu(0) = f0;
      nu.tail(k + 1) = base - slope.col(0) * f0;
      if (nu.minCoeff() < 0.0) continue;
      ++best.feasible;
      const double v = kl_raw(nu, p);
      if (v < best.value) {
        best.value = v;
        best.argmin = nu;
      }
    }
  } else if (free_dim == 2) {
    for (long i = 0; i <= steps; ++i) {
      const double f0 = i * step;
      for (long j = 0; j + i <= steps; ++j) {
        const double f1 = j * step;
        nu(0) = f0;
        nu(1) = f1;
        nu.tail(k + 1) = base - slope.col(0) * f0 - slope.col(1) * f1;
        if (nu.minCoeff() < 0.0) continue;
        ++best.feasible;
        const double v = kl_raw(nu, p);
        if (v < best.value) {
          best.value = v;
          best.argmin = nu;
        }
      }
    }
  } else {
    throw std::runtime_error("fiber_grid_minimum: only fiber dimensions 1 and 2 are supported");
  }
  return best;
}

// Sensitivity of the dependent coordinates to the free ones; used to keep the
// randomly generated instances within the resolution guarantees of the grid.
inline double dependent_sensitivity(const Mat& X) {
  const int k = static_cast<int>(X.rows()), n = static_cast<int>(X.cols());
  Mat A(k + 1, n);
  A.topRows(k) = X;
  A.row(k).setOnes();
  const Mat B = A.rightCols(k + 1);
  const Mat C = A.leftCols(n - k - 1);
  const Eigen::PartialPivLU<Mat> Blu(B);
  return Blu.solve(C).cwiseAbs().rowwise().sum().maxCoeff();
}

// ---------------------------------------------------------------------------
// Big-natural arithmetic for Stirling-free multinomial logarithms.

struct BigNat {
  // Base 2^32 little-endian limbs.
  std::vector<std::uint32_t> limb{1u};

  void mul(std::uint32_t m) {
    std::uint64_t carry = 0;
    for (auto& l : limb) {
      const std::uint64_t v = static_cast<std::uint64_t>(l) * m + carry;
      l = static_cast<std::uint32_t>(v);
      carry = v >> 32;
    }
    while (carry) {
      limb.push_back(static_cast<std::uint32_t>(carry));
      carry >>= 32;
    }
  }

  // Exact division by a small divisor (asserts zero remainder).
  void div(std::uint32_t d) {
    std::uint64_t rem = 0;
    for (auto it = limb.rbegin(); it != limb.rend(); ++it) {
      const std::uint64_t v = (rem << 32) | *it;
      *it = static_cast<std::uint32_t>(v / d);
      rem = v % d;
    }
    if (rem != 0) throw std::runtime_error("BigNat::div: inexact division");
    while (limb.size() > 1 && limb.back() == 0) limb.pop_back();
  }

  double log() const {
    // log of the top 64 bits plus the exponent of the remainder.
    const std::size_t top = limb.size() - 1;
    std::uint64_t hi = limb[top];
    int extra_bits = 0;
    double mant = static_cast<double>(hi);
    if (top >= 1) mant = mant * 4294967296.0 + static_cast<double>(limb[top - 1]);
    if (top >= 2) {
      mant = mant * 4294967296.0 + static_cast<double>(limb[top - 2]);
      extra_bits = 32 * (static_cast<int>(top) - 2);
    }
    return std::log(mant) + extra_bits * std::log(2.0);
  }
};

// log of the multinomial coefficient N! / prod(c_i!) by exact big-integer
// arithmetic (no Stirling approximation).
inline double log_multinomial(long N, const std::vector<long>& counts) {
  BigNat w;
  for (long i = 2; i <= N; ++i) w.mul(static_cast<std::uint32_t>(i));
  for (long c : counts)
    for (long i = 2; i <= c; ++i) w.div(static_cast<std::uint32_t>(i));
  return w.log();
}

}  // namespace testsupport
