#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <utility>

#include "ldgeom/core.hpp"
#include "ldgeom/errors.hpp"
#include "ldgeom/types.hpp"

// Contraction of the simplex rate function to moment coordinates x = X nu:
// cumulant generating function, conjugate (Newton) solves, projected rate and
// metric.

namespace ldgeom {

/// A k x n matrix of observables, 1 <= k <= n - 1, with linearly independent
/// rows none of whose combinations is constant over the states.  Rows are the
/// observables, columns index states.
template <typename Scalar = double>
class ObservableMatrix {
 public:
  explicit ObservableMatrix(Matrix<Scalar> X) : X_(std::move(X)) {
    const Eigen::Index k = X_.rows(), n = X_.cols();
    if (k < 1 || n < 2 || k > n - 1)
      throw DimensionMismatch("ObservableMatrix needs 1 <= k <= n - 1");
    if (!X_.allFinite()) throw NonFiniteValue("ObservableMatrix has non-finite entries");
    Eigen::JacobiSVD<Matrix<Scalar>> svd(X_, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    if (sv(k - 1) <= Scalar(1e-10) * sv(0))
      throw DegenerateObservable("ObservableMatrix rows are linearly dependent");
    // No combination of rows may be constant: least-squares residual of
    // X^T c = 1 must stay away from zero relative to |1|.
    Eigen::JacobiSVD<Matrix<Scalar>> svdT(X_.transpose(),
                                          Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector<Scalar> ones = Vector<Scalar>::Ones(n);
    const Vector<Scalar> c = svdT.solve(ones);
    const Scalar rel = (X_.transpose() * c - ones).norm() / std::sqrt(Scalar(n));
    if (rel <= Scalar(1e-8))
      throw DegenerateObservable("ObservableMatrix row span contains the constant observable");
  }

  const Matrix<Scalar>& matrix() const { return X_; }
  Eigen::Index observables() const { return X_.rows(); }
  Eigen::Index states() const { return X_.cols(); }

 private:
  Matrix<Scalar> X_;
};

/// A point in moment coordinates (k-vector).  Membership in the open moment
/// hull is certified operationally by a successful conjugate solve.
template <typename Scalar = double>
class MomentPoint {
 public:
  explicit MomentPoint(Vector<Scalar> x)
      : x_(detail::validated_finite<Scalar>(std::move(x), "MomentPoint")) {}
  const Vector<Scalar>& values() const { return x_; }
  Eigen::Index size() const { return x_.size(); }

 private:
  Vector<Scalar> x_;
};

/// Natural (exponential-family) parameter conjugate to a moment point.
template <typename Scalar = double>
class NaturalParameter {
 public:
  explicit NaturalParameter(Vector<Scalar> a)
      : a_(detail::validated_finite<Scalar>(std::move(a), "NaturalParameter")) {}
  const Vector<Scalar>& values() const { return a_; }
  Eigen::Index size() const { return a_.size(); }

 private:
  Vector<Scalar> a_;
};

template <typename Scalar = double>
struct SolveOptions {
  Scalar tol = Scalar(1e-12);  // infinity norm of the moment residual
  int max_iter = 200;
};

template <typename Scalar = double>
struct ConjugateSolution {
  NaturalParameter<Scalar> alpha;
  Scalar residual;  // |tilted_mean(alpha) - x|_inf at exit
  int iterations;
};

namespace detail {

template <typename Scalar>
void require_observable_match(const ObservableMatrix<Scalar>& X, Eigen::Index n_states,
                              Eigen::Index k, const char* what) {
  if (X.states() != n_states)
    throw DimensionMismatch(std::string(what) + ": observable and distribution state counts differ");
  if (k >= 0 && X.observables() != k)
    throw DimensionMismatch(std::string(what) + ": parameter length does not match observable count");
}

// The lift X^T alpha of a natural parameter to an energy on the states.
template <typename Scalar>
EnergyVector<Scalar> lifted_energy(const NaturalParameter<Scalar>& alpha,
                                   const ObservableMatrix<Scalar>& X) {
  return EnergyVector<Scalar>(X.matrix().transpose() * alpha.values());
}

}  // namespace detail

/// Cumulant generating function psi(alpha | p) = log sum_i p_i exp(alpha . X_i).
/// Identical to the free energy of the lifted tilt X^T alpha by construction.
template <typename Scalar>
Scalar log_partition(const NaturalParameter<Scalar>& alpha, const ObservableMatrix<Scalar>& X,
                     const ProbabilityVector<Scalar>& p) {
  detail::require_observable_match(X, p.size(), alpha.size(), "log_partition");
  return free_energy(detail::lifted_energy(alpha, X), p);
}

/// Mean of the observables under the tilted distribution: grad psi(alpha).
template <typename Scalar>
Vector<Scalar> tilted_mean(const NaturalParameter<Scalar>& alpha, const ObservableMatrix<Scalar>& X,
                           const ProbabilityVector<Scalar>& p) {
  detail::require_observable_match(X, p.size(), alpha.size(), "tilted_mean");
  return X.matrix() * tilt(p, detail::lifted_energy(alpha, X)).values();
}

/// Covariance of the observables under the tilted distribution: the Hessian
/// of psi, equal to X g X^T for the simplex metric g at the tilted point.
template <typename Scalar>
Matrix<Scalar> tilted_covariance(const NaturalParameter<Scalar>& alpha,
                                 const ObservableMatrix<Scalar>& X,
                                 const ProbabilityVector<Scalar>& p) {
  detail::require_observable_match(X, p.size(), alpha.size(), "tilted_covariance");
  const Vector<Scalar> nu = tilt(p, detail::lifted_energy(alpha, X)).values();
  const Vector<Scalar> mean = X.matrix() * nu;
  Matrix<Scalar> C = X.matrix() * nu.asDiagonal() * X.matrix().transpose();
  C.noalias() -= mean * mean.transpose();
  return ((C + C.transpose()) / Scalar(2)).eval();
}

/// Solve grad psi(alpha) = x for the natural parameter conjugate to x.
///
/// Damped Newton iteration on the smooth convex objective
/// f(alpha) = psi(alpha) - alpha . x, starting from alpha = 0, with Armijo
/// backtracking (sufficient decrease 1e-4, step halving).  Convergence is
/// declared when the moment residual |grad psi - x|_inf drops below tol.
/// Iterates escaping |alpha|_inf > 1e4 mean x sits outside or on the boundary
/// of the moment hull; exhausting max_iter without meeting tol is reported
/// separately.
template <typename Scalar>
ConjugateSolution<Scalar> solve_conjugate(const MomentPoint<Scalar>& x,
                                          const ObservableMatrix<Scalar>& X,
                                          const ProbabilityVector<Scalar>& p,
                                          const SolveOptions<Scalar>& opts = {}) {
  detail::require_observable_match(X, p.size(), x.size(), "solve_conjugate");
  const Eigen::Index k = X.observables();
  Vector<Scalar> alpha = Vector<Scalar>::Zero(k);

  auto objective = [&](const Vector<Scalar>& a) {
    return detail::log_sum_exp(p.values(), (X.matrix().transpose() * a).eval()) -
           a.dot(x.values());
  };

  Scalar residual = std::numeric_limits<Scalar>::infinity();
  for (int iter = 0; iter <= opts.max_iter; ++iter) {
    const NaturalParameter<Scalar> a(alpha);
    const Vector<Scalar> r = tilted_mean(a, X, p) - x.values();
    residual = r.template lpNorm<Eigen::Infinity>();
    if (residual <= opts.tol) return {NaturalParameter<Scalar>(alpha), residual, iter};
    if (iter == opts.max_iter) break;

    const Matrix<Scalar> H = tilted_covariance(a, X, p);
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(H);
    const Scalar lmax = eig.eigenvalues().maxCoeff();
    const Scalar lmin = eig.eigenvalues().minCoeff();
    if (!(lmax > Scalar(0)) || lmin <= Scalar(1e-14) * lmax) {
      // At the zero tilt the covariance only reflects the observable under p,
      // so a collapse there is a degenerate observable.  A collapse after
      // stepping means the tilt concentrated on a face of the hull: the
      // target moment is not interior.
      if (iter == 0)
        throw DegenerateObservable(
            "solve_conjugate: tilted covariance condition fell below 1e-14 at an iterate");
      throw OutsideDomain(
          "solve_conjugate: iterates diverged (tilted covariance collapsed on a hull face); the "
          "moment point lies outside or on the boundary of the moment hull");
    }
    const Vector<Scalar> step =
        -(eig.eigenvectors() *
          (eig.eigenvectors().transpose() * r).cwiseQuotient(eig.eigenvalues()));

    // Armijo backtracking along the Newton direction.  Once the predicted
    // decrease -slope falls below the floating-point resolution of the
    // objective the sufficient-decrease test is pure rounding noise, so the
    // plain Newton step is taken instead: the iterate is already in the
    // quadratic basin at that point.
    const Scalar f0 = objective(alpha);
    const Scalar slope = r.dot(step);
    Scalar t = Scalar(1);
    if (-slope > Scalar(1e-14) * (Scalar(1) + std::abs(f0))) {
      while (objective(alpha + t * step) > f0 + Scalar(1e-4) * t * slope && t > Scalar(1e-20))
        t /= Scalar(2);
    }
    alpha += t * step;

    if (alpha.template lpNorm<Eigen::Infinity>() > Scalar(1e4))
      throw OutsideDomain(
          "solve_conjugate: iterates diverged (|alpha|_inf > 1e4); the moment point lies outside "
          "or on the boundary of the moment hull");
  }
  throw OutsideDomain(
      "solve_conjugate: maximum iterations exhausted before the moment residual met tolerance");
}

/// Rate function in moment coordinates: phi(x | p) = alpha . x - psi(alpha)
/// at the conjugate parameter, i.e. the Legendre transform of psi.
template <typename Scalar>
Scalar moment_rate(const MomentPoint<Scalar>& x, const ObservableMatrix<Scalar>& X,
                   const ProbabilityVector<Scalar>& p, const SolveOptions<Scalar>& opts = {}) {
  const auto sol = solve_conjugate(x, X, p, opts);
  return sol.alpha.values().dot(x.values()) - log_partition(sol.alpha, X, p);
}

/// The information projection nu* = tilt(p, X^T alpha): the unique minimizer
/// of the relative entropy to p over the fiber {nu : X nu = x}.
template <typename Scalar>
EmpiricalFrequency<Scalar> information_projection(const MomentPoint<Scalar>& x,
                                                  const ObservableMatrix<Scalar>& X,
                                                  const ProbabilityVector<Scalar>& p,
                                                  const SolveOptions<Scalar>& opts = {}) {
  const auto sol = solve_conjugate(x, X, p, opts);
  return EmpiricalFrequency<Scalar>(tilt(p, detail::lifted_energy(sol.alpha, X)).values());
}

/// Metric on moment coordinates: the Hessian of phi, computed as the inverse
/// of the tilted covariance at the conjugate point through a symmetric
/// eigendecomposition.  Guarded against conditioning beyond 1e14.
template <typename Scalar>
Matrix<Scalar> moment_metric(const MomentPoint<Scalar>& x, const ObservableMatrix<Scalar>& X,
                             const ProbabilityVector<Scalar>& p,
                             const SolveOptions<Scalar>& opts = {}) {
  const auto sol = solve_conjugate(x, X, p, opts);
  const Matrix<Scalar> C = tilted_covariance(sol.alpha, X, p);
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(C);
  const Scalar lmax = eig.eigenvalues().maxCoeff();
  const Scalar lmin = eig.eigenvalues().minCoeff();
  if (!(lmin > Scalar(0)) || lmax / lmin > Scalar(1e14))
    throw DegenerateObservable("moment_metric: tilted covariance condition exceeds 1e14");
  return eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
         eig.eigenvectors().transpose();
}

}  // namespace ldgeom
