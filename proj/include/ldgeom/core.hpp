#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "ldgeom/errors.hpp"
#include "ldgeom/types.hpp"

// Entropy, divergence and free-energy primitives on the open simplex.
// All values are in nats.

namespace ldgeom {

namespace detail {

template <typename Scalar>
void require_same_size(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b) throw DimensionMismatch(std::string(what) + ": state counts differ");
}

// log sum_i p_i exp(mu_i), stabilized by subtracting the max component so that
// tilts with |mu_i| around 700 stay inside the representable range.
template <typename DerivedP, typename DerivedM>
typename DerivedP::Scalar log_sum_exp(const Eigen::MatrixBase<DerivedP>& p,
                                      const Eigen::MatrixBase<DerivedM>& mu) {
  using Scalar = typename DerivedP::Scalar;
  const Scalar m = mu.maxCoeff();
  const Scalar s = (p.array() * (mu.array() - m).exp()).sum();
  return m + std::log(s);
}

}  // namespace detail

/// Shannon entropy -sum nu_i log nu_i of an empirical frequency.  This is the
/// exponential growth rate of the number of length-N samples realizing nu.
template <typename Scalar>
Scalar shannon_entropy(const EmpiricalFrequency<Scalar>& nu) {
  return -(nu.values().array() * nu.values().array().log()).sum();
}

/// Relative entropy sum nu_i log(nu_i / p_i).  Strictly positive unless
/// nu == p (Gibbs), and the exponential decay rate of observing frequency nu
/// under prior p.
template <typename Scalar>
Scalar kl_divergence(const EmpiricalFrequency<Scalar>& nu, const ProbabilityVector<Scalar>& p) {
  detail::require_same_size<Scalar>(nu.size(), p.size(), "kl_divergence");
  return (nu.values().array() * (nu.values().array() / p.values().array()).log()).sum();
}

/// Free energy F(mu | p) = log sum_i p_i exp(mu_i).
template <typename Scalar>
Scalar free_energy(const EnergyVector<Scalar>& mu, const ProbabilityVector<Scalar>& p) {
  detail::require_same_size<Scalar>(mu.size(), p.size(), "free_energy");
  return detail::log_sum_exp(p.values(), mu.values());
}

/// Exponential tilt p_i exp(mu_i - F(mu | p)).  Invariant under constant
/// shifts of mu; tilting by 0 returns p itself.
template <typename Scalar>
ProbabilityVector<Scalar> tilt(const ProbabilityVector<Scalar>& p, const EnergyVector<Scalar>& mu) {
  detail::require_same_size<Scalar>(mu.size(), p.size(), "tilt");
  const Scalar m = mu.values().maxCoeff();
  Vector<Scalar> w = p.values().array() * (mu.values().array() - m).exp();
  w /= w.sum();
  // Components that underflow under an extreme tilt are pinned to the
  // positivity floor: the tilted measure stays a point of the open simplex.
  w = w.cwiseMax(Scalar(detail::kComponentFloor));
  return ProbabilityVector<Scalar>(std::move(w));
}

/// The canonical-gauge energy mu_i = log(nu_i / p_i) whose tilt of p is nu.
/// In this gauge F(mu | p) = 0 and tilt(p, energy_of(nu, p)) round-trips.
template <typename Scalar>
EnergyVector<Scalar> energy_of(const EmpiricalFrequency<Scalar>& nu,
                               const ProbabilityVector<Scalar>& p) {
  detail::require_same_size<Scalar>(nu.size(), p.size(), "energy_of");
  return EnergyVector<Scalar>((nu.values().array() / p.values().array()).log());
}

/// Inverse metric g^ij = nu_i (delta_ij - nu_j) at the tilted point
/// nu = tilt(p, mu).  Equals the Hessian of F in mu and the covariance of the
/// state indicator functions; its null space is the constant direction.
template <typename Scalar>
Matrix<Scalar> simplex_metric(const EnergyVector<Scalar>& mu, const ProbabilityVector<Scalar>& p) {
  const Vector<Scalar> nu = tilt(p, mu).values();
  Matrix<Scalar> g = Matrix<Scalar>(nu.asDiagonal());
  g.noalias() -= nu * nu.transpose();
  return g;
}

/// Bilinear form y^T g z of the simplex metric, evaluated directly as the
/// covariance Cov_nu(y, z) under the tilted distribution.
template <typename Scalar>
Scalar covariance_form(const RealObservable<Scalar>& y, const RealObservable<Scalar>& z,
                       const EnergyVector<Scalar>& mu, const ProbabilityVector<Scalar>& p) {
  detail::require_same_size<Scalar>(y.size(), p.size(), "covariance_form");
  detail::require_same_size<Scalar>(z.size(), p.size(), "covariance_form");
  const Vector<Scalar> nu = tilt(p, mu).values();
  const Scalar my = nu.dot(y.values());
  const Scalar mz = nu.dot(z.values());
  return (nu.array() * y.values().array() * z.values().array()).sum() - my * mz;
}

}  // namespace ldgeom
