#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <utility>
#include <vector>

#include "ldgeom/contraction.hpp"
#include "ldgeom/core.hpp"
#include "ldgeom/errors.hpp"
#include "ldgeom/types.hpp"

// The fiber polytope {nu >= 0, 1.nu = 1, X nu = x}, its vertex enumeration,
// and simplex charts built from vertex subsets together with the chart-level
// entropy, conjugate, free energy and divergence.

namespace ldgeom {

/// The fiber over a moment point: an (n - k - 1)-dimensional polytope inside
/// the simplex.  Nonempty interior is certified by a successful information
/// projection under the uniform prior.
template <typename Scalar = double>
struct FiberPolytope {
  ObservableMatrix<Scalar> observables;
  MomentPoint<Scalar> moment;

  Eigen::Index dimension() const { return observables.states() - observables.observables() - 1; }

  static FiberPolytope certified(const ObservableMatrix<Scalar>& X, const MomentPoint<Scalar>& x,
                                 const SolveOptions<Scalar>& opts = {}) {
    information_projection(x, X, ProbabilityVector<Scalar>::uniform(X.states()), opts);
    return FiberPolytope{X, x};
  }
};

/// Vertices of a fiber polytope, one per column, in the deterministic order
/// discovered by lexicographic support enumeration.
template <typename Scalar = double>
struct VertexSet {
  Matrix<Scalar> vertices;  // n x m, columns are vertices
  Eigen::Index count() const { return vertices.cols(); }
};

/// Enumerate all vertices of the fiber polytope by exhaustive basic feasible
/// solutions: every vertex is supported on at most k + 1 states, so each
/// support subset of that size yields a candidate by solving the equality
/// constraints restricted to it.  Capped at n <= 20 states.
template <typename Scalar>
VertexSet<Scalar> enumerate_vertices(const ObservableMatrix<Scalar>& X,
                                     const MomentPoint<Scalar>& x) {
  const Eigen::Index n = X.states(), k = X.observables();
  detail::require_observable_match(X, n, x.size(), "enumerate_vertices");
  if (n > 20)
    throw CapExceeded("enumerate_vertices: exhaustive support enumeration is capped at n = 20");

  Matrix<Scalar> A(k + 1, n);
  A.topRows(k) = X.matrix();
  A.row(k).setOnes();
  Vector<Scalar> b(k + 1);
  b.head(k) = x.values();
  b(k) = Scalar(1);
  const Scalar bscale = std::max(Scalar(1), b.template lpNorm<Eigen::Infinity>());

  const Eigen::Index m = k + 1;
  std::vector<Eigen::Index> support(m);
  for (Eigen::Index i = 0; i < m; ++i) support[i] = i;
  std::vector<Vector<Scalar>> found;

  const auto advance = [&]() {
    Eigen::Index i = m - 1;
    while (i >= 0 && support[i] == n - m + i) --i;
    if (i < 0) return false;
    ++support[i];
    for (Eigen::Index j = i + 1; j < m; ++j) support[j] = support[j - 1] + 1;
    return true;
  };

  do {
    Matrix<Scalar> AB(m, m);
    for (Eigen::Index j = 0; j < m; ++j) AB.col(j) = A.col(support[j]);
    const Vector<Scalar> nb = AB.fullPivLu().solve(b);
    // Singular or inconsistent bases are filtered by the residual, infeasible
    // ones by the sign check.
    if ((AB * nb - b).template lpNorm<Eigen::Infinity>() > Scalar(1e-10) * bscale) continue;
    if ((nb.array() < Scalar(-1e-11)).any()) continue;
    Vector<Scalar> v = Vector<Scalar>::Zero(n);
    for (Eigen::Index j = 0; j < m; ++j) v(support[j]) = std::max(nb(j), Scalar(0));
    if ((A * v - b).template lpNorm<Eigen::Infinity>() > Scalar(1e-10) * bscale) continue;
    bool duplicate = false;
    for (const auto& w : found)
      if ((w - v).template lpNorm<Eigen::Infinity>() <= Scalar(1e-9)) {
        duplicate = true;
        break;
      }
    if (!duplicate) found.push_back(std::move(v));
  } while (advance());

  if (found.empty())
    throw EmptyFiber("enumerate_vertices: no feasible point; the fiber over x is empty");
  VertexSet<Scalar> out;
  out.vertices.resize(n, static_cast<Eigen::Index>(found.size()));
  for (Eigen::Index j = 0; j < out.vertices.cols(); ++j) out.vertices.col(j) = found[j];
  return out;
}

/// Barycentric coordinates on a simplex chart: strictly positive, summing to
/// one, of dimension n - k.
template <typename Scalar = double>
class MixtureCoordinate {
 public:
  explicit MixtureCoordinate(Vector<Scalar> eta)
      : eta_(detail::validated_simplex<Scalar>(std::move(eta), "MixtureCoordinate")) {}
  const Vector<Scalar>& values() const { return eta_; }
  Eigen::Index size() const { return eta_.size(); }

 private:
  Vector<Scalar> eta_;
};

/// Chart-level energy coordinates chi, gauge-equivalent modulo constant
/// shifts chi + c*1 just like state-space energies.
template <typename Scalar = double>
class ChartEnergy {
 public:
  explicit ChartEnergy(Vector<Scalar> chi)
      : chi_(detail::validated_finite<Scalar>(std::move(chi), "ChartEnergy")) {}
  const Vector<Scalar>& values() const { return chi_; }
  Eigen::Index size() const { return chi_.size(); }

 private:
  Vector<Scalar> chi_;
};

/// An affine simplex chart of the fiber: Q maps mixture coordinates eta to
/// fiber points Q eta, its columns being n - k affinely independent vertices.
template <typename Scalar = double>
class SimplexChart {
 public:
  const Matrix<Scalar>& matrix() const { return Q_; }
  Eigen::Index states() const { return Q_.rows(); }
  Eigen::Index coordinates() const { return Q_.cols(); }

 private:
  template <typename S>
  friend SimplexChart<S> build_chart(const Matrix<S>&, const ObservableMatrix<S>&,
                                     const MomentPoint<S>&);
  explicit SimplexChart(Matrix<Scalar> Q) : Q_(std::move(Q)) {}
  Matrix<Scalar> Q_;
};

/// Build a chart from n - k vertices of the fiber (one per column).  Checks
/// that every column really lies on the fiber (X Q = x 1^T within 1e-10) and
/// that the columns are linearly independent.
template <typename Scalar>
SimplexChart<Scalar> build_chart(const Matrix<Scalar>& vertices, const ObservableMatrix<Scalar>& X,
                                 const MomentPoint<Scalar>& x) {
  const Eigen::Index n = X.states(), k = X.observables();
  detail::require_observable_match(X, n, x.size(), "build_chart");
  if (vertices.rows() != n || vertices.cols() != n - k)
    throw DimensionMismatch("build_chart: expected exactly n - k vertex columns of length n");
  if (!vertices.allFinite()) throw NonFiniteValue("build_chart: non-finite vertex entries");

  const Matrix<Scalar> XQ = X.matrix() * vertices;
  for (Eigen::Index j = 0; j < XQ.cols(); ++j)
    if ((XQ.col(j) - x.values()).template lpNorm<Eigen::Infinity>() > Scalar(1e-10))
      throw FiberViolation("build_chart: a supplied vertex is off the fiber of x");
  for (Eigen::Index j = 0; j < vertices.cols(); ++j)
    if (std::abs(vertices.col(j).sum() - Scalar(1)) > Scalar(1e-10))
      throw FiberViolation("build_chart: a supplied vertex does not sum to one");

  Eigen::JacobiSVD<Matrix<Scalar>> svd(vertices);
  const auto& sv = svd.singularValues();
  if (sv(sv.size() - 1) <= Scalar(1e-10) * sv(0))
    throw RankDeficient("build_chart: chosen vertices are linearly dependent");
  return SimplexChart<Scalar>(vertices);
}

namespace detail {

template <typename Scalar>
Vector<Scalar> chart_point(const MixtureCoordinate<Scalar>& eta, const SimplexChart<Scalar>& chart) {
  if (eta.size() != chart.coordinates())
    throw DimensionMismatch("chart coordinates do not match the chart dimension");
  Vector<Scalar> nu = chart.matrix() * eta.values();
  if ((nu.array() <= Scalar(kComponentFloor)).any())
    throw PatchBoundary("mixture coordinate maps to the boundary of the simplex patch");
  return nu;
}

}  // namespace detail

/// Entropy rate in chart coordinates: S_X(eta | p) = S(Q eta | p) - phi(x | p),
/// the conditional rate of the fiber point Q eta given the moment value.
template <typename Scalar>
Scalar chart_entropy(const MixtureCoordinate<Scalar>& eta, const SimplexChart<Scalar>& chart,
                     const ProbabilityVector<Scalar>& p, const ObservableMatrix<Scalar>& X,
                     const MomentPoint<Scalar>& x, const SolveOptions<Scalar>& opts = {}) {
  const EmpiricalFrequency<Scalar> nu(detail::chart_point(eta, chart));
  return kl_divergence(nu, p) - moment_rate(x, X, p, opts);
}

/// Conjugate chart energy of a mixture coordinate: chi = Q^T mu with mu the
/// canonical-gauge energy of the fiber point Q eta.
template <typename Scalar>
ChartEnergy<Scalar> chart_conjugate(const MixtureCoordinate<Scalar>& eta,
                                    const SimplexChart<Scalar>& chart,
                                    const ProbabilityVector<Scalar>& p) {
  const EmpiricalFrequency<Scalar> nu(detail::chart_point(eta, chart));
  const EnergyVector<Scalar> mu = energy_of(nu, p);
  return ChartEnergy<Scalar>(chart.matrix().transpose() * mu.values());
}

/// Chart free energy F_X(chi | p) = phi(x|p) + inf { F(mu'|p) : Q^T mu' = chi }.
/// Evaluated through the identity F_X(chi|p) - phi(x|p) = F(mu'|p) - phi(x|p^mu')
/// which holds for any representative mu'; the minimum-norm solution of
/// Q^T mu' = chi is used, so the result is representative-independent.
template <typename Scalar>
Scalar chart_free_energy(const ChartEnergy<Scalar>& chi, const SimplexChart<Scalar>& chart,
                         const ProbabilityVector<Scalar>& p, const ObservableMatrix<Scalar>& X,
                         const MomentPoint<Scalar>& x, const SolveOptions<Scalar>& opts = {}) {
  if (chi.size() != chart.coordinates())
    throw DimensionMismatch("chart_free_energy: energy length does not match the chart dimension");
  const Matrix<Scalar> Qt = chart.matrix().transpose();
  const Vector<Scalar> mu =
      Qt.completeOrthogonalDecomposition().solve(chi.values());
  const EnergyVector<Scalar> muv(mu);
  const ProbabilityVector<Scalar> tilted = tilt(p, muv);
  return moment_rate(x, X, p, opts) + free_energy(muv, p) - moment_rate(x, X, tilted, opts);
}

/// Bregman divergence of the chart entropy:
/// D(eta1, eta2) = S_X(eta1) - S_X(eta2) - chi(eta2) . (eta1 - eta2).
/// Coincides with the relative entropy S(Q eta1 | Q eta2) of the underlying
/// fiber points.
template <typename Scalar>
Scalar chart_divergence(const MixtureCoordinate<Scalar>& eta1, const MixtureCoordinate<Scalar>& eta2,
                        const SimplexChart<Scalar>& chart, const ProbabilityVector<Scalar>& p,
                        const ObservableMatrix<Scalar>& X, const MomentPoint<Scalar>& x,
                        const SolveOptions<Scalar>& opts = {}) {
  const Scalar s1 = chart_entropy(eta1, chart, p, X, x, opts);
  const Scalar s2 = chart_entropy(eta2, chart, p, X, x, opts);
  const ChartEnergy<Scalar> chi2 = chart_conjugate(eta2, chart, p);
  return s1 - s2 - chi2.values().dot(eta1.values() - eta2.values());
}

}  // namespace ldgeom
