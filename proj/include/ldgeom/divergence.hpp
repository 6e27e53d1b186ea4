#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "ldgeom/contraction.hpp"
#include "ldgeom/core.hpp"
#include "ldgeom/errors.hpp"
#include "ldgeom/types.hpp"

// Entropy production, Bregman divergences, the Pythagorean decomposition of
// the rate function across a fiber, chain decomposition over product state
// spaces, and information gains.

namespace ldgeom {

/// Row-major layout of a product state space Y x Z: the joint state (y, z)
/// sits at flat index y * n2 + z.
struct ProductStateLayout {
  Eigen::Index n1;
  Eigen::Index n2;

  ProductStateLayout(Eigen::Index a, Eigen::Index b) : n1(a), n2(b) {
    if (n1 < 2 || n2 < 2) throw LayoutMismatch("ProductStateLayout needs n1, n2 >= 2");
  }
  Eigen::Index flat(Eigen::Index y, Eigen::Index z) const { return y * n2 + z; }
  Eigen::Index states() const { return n1 * n2; }
};

/// The terms of the Pythagorean identity total = excess + projection,
/// i.e. S(nu|p) = S(nu|nu*) + S(nu*|p), together with the projector nu*.
template <typename Scalar = double>
struct PythagoreanSplit {
  Scalar total;       // S(nu | p)
  Scalar excess;      // S(nu | nu*), the fluctuation beyond the fiber minimum
  Scalar projection;  // S(nu* | p), the rate of the moment value itself
  EmpiricalFrequency<Scalar> projector;  // nu* itself
};

/// Marginal plus weighted conditional terms of the entropy chain over Y x Z.
template <typename Scalar = double>
struct EntropyChainTerms {
  Scalar marginal;              // S(nu_Y | p_Y)
  Scalar weighted_conditional;  // sum_y nu_Y(y) S(nu(.|y) | p(.|y))
  Scalar total() const { return marginal + weighted_conditional; }
};

/// Fenchel-Young entropy production sigma(x, alpha | p) =
/// phi(x|p) + psi(alpha|p) - alpha . x.  Nonnegative, zero exactly at
/// conjugate pairs, and equal to the rate of x under the tilted prior.
template <typename Scalar>
Scalar entropy_production(const MomentPoint<Scalar>& x, const NaturalParameter<Scalar>& alpha,
                          const ObservableMatrix<Scalar>& X, const ProbabilityVector<Scalar>& p,
                          const SolveOptions<Scalar>& opts = {}) {
  return moment_rate(x, X, p, opts) + log_partition(alpha, X, p) -
         alpha.values().dot(x.values());
}

/// Bregman divergence of the moment rate phi between moment points:
/// D_phi(x, y) = phi(x) - phi(y) - grad phi(y) . (x - y), with
/// grad phi(y) the conjugate parameter of y.
template <typename Scalar>
Scalar moment_divergence(const MomentPoint<Scalar>& x, const MomentPoint<Scalar>& y,
                         const ObservableMatrix<Scalar>& X, const ProbabilityVector<Scalar>& p,
                         const SolveOptions<Scalar>& opts = {}) {
  const auto at_y = solve_conjugate(y, X, p, opts);
  return moment_rate(x, X, p, opts) - moment_rate(y, X, p, opts) -
         at_y.alpha.values().dot(x.values() - y.values());
}

/// Bregman divergence of the entropy rate S(.|p) between frequencies.  The
/// prior enters the formula only through terms that cancel, so the value is
/// independent of p and coincides with the relative entropy S(nu1 | nu2).
template <typename Scalar>
Scalar frequency_divergence(const EmpiricalFrequency<Scalar>& nu1,
                            const EmpiricalFrequency<Scalar>& nu2,
                            const ProbabilityVector<Scalar>& p) {
  detail::require_same_size<Scalar>(nu1.size(), p.size(), "frequency_divergence");
  detail::require_same_size<Scalar>(nu2.size(), p.size(), "frequency_divergence");
  const Scalar s1 = kl_divergence(nu1, p);
  const Scalar s2 = kl_divergence(nu2, p);
  // grad_nu S(nu|p) = log(nu/p) + 1; the +1 drops against sum(nu1 - nu2) = 0.
  const Vector<Scalar> grad =
      (nu2.values().array() / p.values().array()).log().matrix() + Vector<Scalar>::Ones(p.size());
  return s1 - s2 - grad.dot(nu1.values() - nu2.values());
}

/// Rate of seeing frequency nu given that its moment value x was seen:
/// S(nu|p) - phi(x|p).  Requires nu to lie on the fiber of x and equals the
/// relative entropy of nu to the tilted prior at the conjugate parameter.
template <typename Scalar>
Scalar conditional_rate(const EmpiricalFrequency<Scalar>& nu, const MomentPoint<Scalar>& x,
                        const ObservableMatrix<Scalar>& X, const ProbabilityVector<Scalar>& p,
                        const SolveOptions<Scalar>& opts = {}) {
  detail::require_same_size<Scalar>(nu.size(), p.size(), "conditional_rate");
  const Scalar off =
      (X.matrix() * nu.values() - x.values()).template lpNorm<Eigen::Infinity>();
  if (off > Scalar(1e-9))
    throw FiberViolation("conditional_rate: frequency is off the fiber of the moment point");
  return kl_divergence(nu, p) - moment_rate(x, X, p, opts);
}

/// Split S(nu|p) into the fiber excess S(nu|nu*) and the projection rate
/// S(nu*|p), where nu* is the information projection of x = X nu.
template <typename Scalar>
PythagoreanSplit<Scalar> pythagorean_decompose(const EmpiricalFrequency<Scalar>& nu,
                                               const MomentPoint<Scalar>& x,
                                               const ObservableMatrix<Scalar>& X,
                                               const ProbabilityVector<Scalar>& p,
                                               const SolveOptions<Scalar>& opts = {}) {
  detail::require_same_size<Scalar>(nu.size(), p.size(), "pythagorean_decompose");
  const Scalar off =
      (X.matrix() * nu.values() - x.values()).template lpNorm<Eigen::Infinity>();
  if (off > Scalar(1e-9))
    throw FiberViolation("pythagorean_decompose: frequency is off the fiber of the moment point");
  EmpiricalFrequency<Scalar> star = information_projection(x, X, p, opts);
  return {kl_divergence(nu, p), kl_divergence(nu, star.as_probability()),
          kl_divergence(star, p), std::move(star)};
}

/// Chain decomposition of S(nu|p) over a product space Y x Z into the
/// marginal rate on Y plus the nu_Y-weighted conditional rate on Z.
template <typename Scalar>
EntropyChainTerms<Scalar> entropy_chain(const EmpiricalFrequency<Scalar>& nu,
                                        const ProbabilityVector<Scalar>& p,
                                        const ProductStateLayout& layout) {
  if (nu.size() != layout.states() || p.size() != layout.states())
    throw LayoutMismatch("entropy_chain: layout does not match the joint state count");
  EntropyChainTerms<Scalar> out{Scalar(0), Scalar(0)};
  for (Eigen::Index y = 0; y < layout.n1; ++y) {
    Scalar ny = 0, py = 0;
    for (Eigen::Index z = 0; z < layout.n2; ++z) {
      ny += nu[layout.flat(y, z)];
      py += p[layout.flat(y, z)];
    }
    out.marginal += ny * std::log(ny / py);
    // Conditional slice renormalized by the marginals of nu and p at y.
    for (Eigen::Index z = 0; z < layout.n2; ++z) {
      const Scalar nyz = nu[layout.flat(y, z)];
      const Scalar pyz = p[layout.flat(y, z)];
      out.weighted_conditional += nyz * std::log((nyz / ny) / (pyz / py));
    }
  }
  return out;
}

/// Per-sample information gain of an observed frequency over the uniform
/// reference: log n - H(nu) = S(nu | uniform).
template <typename Scalar>
Scalar gain_frequency_vs_uniform(const EmpiricalFrequency<Scalar>& nu) {
  return std::log(Scalar(nu.size())) - shannon_entropy(nu);
}

/// Per-sample information gain of an observed frequency over the prior.
template <typename Scalar>
Scalar gain_frequency_vs_prior(const EmpiricalFrequency<Scalar>& nu,
                               const ProbabilityVector<Scalar>& p) {
  return kl_divergence(nu, p);
}

/// Per-sample information gain of an observed moment value over the prior:
/// the contracted rate phi(x | p).
template <typename Scalar>
Scalar gain_mean_vs_prior(const MomentPoint<Scalar>& x, const ObservableMatrix<Scalar>& X,
                          const ProbabilityVector<Scalar>& p,
                          const SolveOptions<Scalar>& opts = {}) {
  return moment_rate(x, X, p, opts);
}

/// Per-sample information gain of the full frequency beyond its moment value:
/// S(nu | nu*) with nu* the projection of x = X nu.
template <typename Scalar>
Scalar gain_frequency_given_mean(const EmpiricalFrequency<Scalar>& nu,
                                 const ObservableMatrix<Scalar>& X,
                                 const ProbabilityVector<Scalar>& p,
                                 const SolveOptions<Scalar>& opts = {}) {
  detail::require_same_size<Scalar>(nu.size(), p.size(), "gain_frequency_given_mean");
  const MomentPoint<Scalar> x(X.matrix() * nu.values());
  const EmpiricalFrequency<Scalar> star = information_projection(x, X, p, opts);
  return kl_divergence(nu, star.as_probability());
}

}  // namespace ldgeom
