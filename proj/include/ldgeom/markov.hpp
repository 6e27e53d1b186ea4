#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <utility>
#include <vector>

#include "ldgeom/errors.hpp"
#include "ldgeom/types.hpp"

// Pair-measure (level-2) large deviation quantities for finite Markov chains:
// empirical pair frequencies, the pair rate function, and the tilted
// free energy log lambda_max(P o exp(u)) with its gradient.

namespace ldgeom {

/// A row-stochastic, primitive transition kernel on n >= 2 states.
template <typename Scalar = double>
class MarkovKernel {
 public:
  explicit MarkovKernel(Matrix<Scalar> P) : P_(std::move(P)) {
    const Eigen::Index n = P_.rows();
    if (n < 2 || P_.cols() != n) throw DimensionMismatch("MarkovKernel must be square, n >= 2");
    if (!P_.allFinite()) throw NonFiniteValue("MarkovKernel has non-finite entries");
    if ((P_.array() < Scalar(0)).any())
      throw InvalidDistribution("MarkovKernel has negative entries");
    for (Eigen::Index i = 0; i < n; ++i)
      if (std::abs(P_.row(i).sum() - Scalar(1)) > Scalar(1e-12))
        throw InvalidDistribution("MarkovKernel row does not sum to one within 1e-12");
    // Primitivity: some power with all entries positive.  A primitive kernel
    // attains this by exponent n^2 at the latest and keeps it afterwards, so
    // boolean squaring up to an exponent >= n^2 decides the question.
    std::vector<char> reach(n * n), next(n * n);
    for (Eigen::Index i = 0; i < n * n; ++i) reach[i] = P_(i / n, i % n) > Scalar(0);
    const auto all_positive = [&](const std::vector<char>& m) {
      for (char c : m)
        if (!c) return false;
      return true;
    };
    Eigen::Index exponent = 1;
    bool ok = all_positive(reach);
    while (!ok && exponent < n * n) {
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
          char v = 0;
          for (Eigen::Index l = 0; l < n && !v; ++l) v = reach[i * n + l] & reach[l * n + j];
          next[i * n + j] = v;
        }
      reach.swap(next);
      exponent *= 2;
      ok = all_positive(reach);
    }
    if (!ok) throw NonPrimitive("MarkovKernel is not primitive");
  }

  const Matrix<Scalar>& matrix() const { return P_; }
  Eigen::Index states() const { return P_.rows(); }

 private:
  Matrix<Scalar> P_;
};

/// An empirical pair frequency: entrywise nonnegative, summing to one, with
/// matching row and column marginals (the shift invariance of cyclic pair
/// counting).
template <typename Scalar = double>
class PairFrequency {
 public:
  explicit PairFrequency(Matrix<Scalar> nu) : nu_(std::move(nu)) {
    const Eigen::Index n = nu_.rows();
    if (n < 2 || nu_.cols() != n) throw DimensionMismatch("PairFrequency must be square, n >= 2");
    if (!nu_.allFinite()) throw NonFiniteValue("PairFrequency has non-finite entries");
    if ((nu_.array() < Scalar(0)).any())
      throw InvalidDistribution("PairFrequency has negative entries");
    if (std::abs(nu_.sum() - Scalar(1)) > Scalar(1e-12))
      throw InvalidDistribution("PairFrequency does not sum to one within 1e-12");
    const Vector<Scalar> rows = nu_.rowwise().sum();
    const Vector<Scalar> cols = nu_.colwise().sum().transpose();
    if ((rows - cols).template lpNorm<Eigen::Infinity>() > Scalar(1e-10))
      throw InvalidDistribution("PairFrequency row and column marginals differ beyond 1e-10");
  }

  const Matrix<Scalar>& matrix() const { return nu_; }
  Eigen::Index states() const { return nu_.rows(); }
  /// The shared row/column marginal (state occupation frequency).
  Vector<Scalar> marginal() const { return nu_.rowwise().sum(); }

 private:
  Matrix<Scalar> nu_;
};

/// An entrywise tilt u of the kernel, finite, defined on pairs.
template <typename Scalar = double>
class TiltMatrix {
 public:
  explicit TiltMatrix(Matrix<Scalar> u) : u_(std::move(u)) {
    if (u_.rows() < 2 || u_.cols() != u_.rows())
      throw DimensionMismatch("TiltMatrix must be square, n >= 2");
    if (!u_.allFinite()) throw NonFiniteValue("TiltMatrix has non-finite entries");
  }
  const Matrix<Scalar>& matrix() const { return u_; }
  Eigen::Index states() const { return u_.rows(); }

  static TiltMatrix zero(Eigen::Index n) { return TiltMatrix(Matrix<Scalar>::Zero(n, n)); }

 private:
  Matrix<Scalar> u_;
};

/// Count consecutive pairs of a state sequence with cyclic wrap-around (the
/// predecessor of the first symbol is the last one), so that row and column
/// marginals agree exactly.  States are 0-based indices into [0, n).
template <typename Scalar = double>
PairFrequency<Scalar> pair_frequency_from_sequence(const std::vector<int>& seq, Eigen::Index n) {
  if (seq.empty()) throw DimensionMismatch("pair_frequency_from_sequence: empty sequence");
  if (n < 2) throw DimensionMismatch("pair_frequency_from_sequence: need n >= 2 states");
  for (int s : seq)
    if (s < 0 || s >= n)
      throw DimensionMismatch("pair_frequency_from_sequence: state index out of range");
  Matrix<Scalar> counts = Matrix<Scalar>::Zero(n, n);
  const std::size_t N = seq.size();
  for (std::size_t l = 0; l < N; ++l) counts(seq[(l + N - 1) % N], seq[l]) += Scalar(1);
  return PairFrequency<Scalar>(counts / Scalar(N));
}

/// Level-2 rate function S2(nu | P) = sum_ij nu_ij log(nu_ij / (nu_i. P_ij))
/// with the 0 log 0 := 0 convention.  Pairs carrying frequency where the
/// kernel forbids the transition raise SupportViolation.
template <typename Scalar>
Scalar pair_rate(const PairFrequency<Scalar>& nu, const MarkovKernel<Scalar>& P) {
  const Eigen::Index n = nu.states();
  if (P.states() != n) throw DimensionMismatch("pair_rate: state counts differ");
  const Vector<Scalar> rows = nu.marginal();
  Scalar out = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const Scalar nij = nu.matrix()(i, j);
      if (nij == Scalar(0)) continue;
      if (P.matrix()(i, j) <= Scalar(0))
        throw SupportViolation("pair_rate: frequency charges a transition the kernel forbids");
      out += nij * std::log(nij / (rows(i) * P.matrix()(i, j)));
    }
  return out;
}

/// Principal eigenvalue data of the tilted kernel M = P o exp(u): the log of
/// the Perron root together with the positive left and right eigenvectors,
/// normalized so the right one sums to one and <left, right> = 1.
template <typename Scalar = double>
struct SpectralPoint {
  Scalar log_lambda;
  Vector<Scalar> left;   // v, scaled so that sum_k v_k w_k = 1
  Vector<Scalar> right;  // w, unit sum
  int iterations;        // power iteration steps, -1 when the dense fallback decided
};

namespace detail {

// Power iteration on M and M^T from a positive start, with a dense
// eigensolver fallback for n <= 50 when convergence stalls.  The tilt is
// shifted by max(u) before exponentiation so large tilts cannot overflow;
// the shift is added back to the returned log eigenvalue.
template <typename Scalar>
SpectralPoint<Scalar> spectral_point(const TiltMatrix<Scalar>& u, const MarkovKernel<Scalar>& P) {
  const Eigen::Index n = P.states();
  if (u.states() != n) throw DimensionMismatch("tilted spectral problem: state counts differ");
  const Scalar shift = u.matrix().maxCoeff();
  const Matrix<Scalar> M = P.matrix().array() * (u.matrix().array() - shift).exp();

  Vector<Scalar> w = Vector<Scalar>::Constant(n, Scalar(1) / Scalar(n));
  Vector<Scalar> v = w;
  Scalar lambda = 0;
  const Scalar rel_tol = Scalar(1e-13);
  const int max_iter = 200000;
  bool converged = false;
  int used = 0;
  for (int it = 1; it <= max_iter; ++it) {
    const Vector<Scalar> Mw = M * w;
    const Vector<Scalar> Mtv = M.transpose() * v;
    const Scalar vw = v.dot(w);
    const Scalar rayleigh = v.dot(Mw) / vw;
    const Scalar res_r = (Mw - rayleigh * w).template lpNorm<Eigen::Infinity>();
    const Scalar res_l = (Mtv - rayleigh * v).template lpNorm<Eigen::Infinity>();
    const Scalar scale = rayleigh * std::max(w.template lpNorm<Eigen::Infinity>(),
                                             v.template lpNorm<Eigen::Infinity>());
    w = Mw / Mw.sum();
    v = Mtv / Mtv.sum();
    used = it;
    if (std::abs(rayleigh - lambda) <= rel_tol * std::abs(rayleigh) &&
        res_r <= rel_tol * scale && res_l <= rel_tol * scale) {
      lambda = rayleigh;
      converged = true;
      break;
    }
    lambda = rayleigh;
  }

  if (!converged) {
    if (n > 50)
      throw NonPrimitive("tilted spectral problem: power iteration stalled and the dense "
                         "fallback is capped at n = 50");
    // Dense fallback: take the eigenvalue of largest modulus; for a primitive
    // nonnegative matrix this is the simple positive Perron root.
    Eigen::EigenSolver<Matrix<Scalar>> es(M);
    Eigen::Index best = 0;
    es.eigenvalues().cwiseAbs().maxCoeff(&best);
    lambda = es.eigenvalues()(best).real();
    Vector<Scalar> wr = es.eigenvectors().col(best).real();
    if (wr.sum() < Scalar(0)) wr = -wr;
    Eigen::EigenSolver<Matrix<Scalar>> esT(Matrix<Scalar>(M.transpose()));
    Eigen::Index bestT = 0;
    esT.eigenvalues().cwiseAbs().maxCoeff(&bestT);
    Vector<Scalar> vl = esT.eigenvectors().col(bestT).real();
    if (vl.sum() < Scalar(0)) vl = -vl;
    w = wr;
    v = vl;
    used = -1;
  }

  w /= w.sum();
  v /= v.dot(w);
  return {std::log(lambda) + shift, std::move(v), std::move(w), used};
}

}  // namespace detail

/// Perron data of the tilted kernel, exposed for diagnostics and testing.
template <typename Scalar>
SpectralPoint<Scalar> markov_spectral(const TiltMatrix<Scalar>& u, const MarkovKernel<Scalar>& P) {
  return detail::spectral_point(u, P);
}

/// Tilted free energy F2(u | P) = log lambda_max(P o exp(u)): the scaled
/// cumulant generating function of pair observables along the chain.
template <typename Scalar>
Scalar markov_free_energy(const TiltMatrix<Scalar>& u, const MarkovKernel<Scalar>& P) {
  return detail::spectral_point(u, P).log_lambda;
}

/// Gradient of F2 in the tilt: the pair frequency
/// nu_ij = P_ij exp(u_ij) v_i w_j / lambda at the Perron data of the tilted
/// kernel.  Its marginals obey sum_i nu_ik = v_k w_k = sum_j nu_kj.
template <typename Scalar>
PairFrequency<Scalar> markov_gradient(const TiltMatrix<Scalar>& u, const MarkovKernel<Scalar>& P) {
  const auto sp = detail::spectral_point(u, P);
  const Eigen::Index n = P.states();
  const Scalar shift = u.matrix().maxCoeff();
  const Scalar lambda_shifted = std::exp(sp.log_lambda - shift);
  Matrix<Scalar> nu(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      nu(i, j) = P.matrix()(i, j) * std::exp(u.matrix()(i, j) - shift) * sp.left(i) *
                 sp.right(j) / lambda_shifted;
  return PairFrequency<Scalar>(std::move(nu));
}

/// Stationary pair measure pi_i P_ij, obtained as the zero-tilt gradient.
template <typename Scalar>
PairFrequency<Scalar> stationary_pair(const MarkovKernel<Scalar>& P) {
  return markov_gradient(TiltMatrix<Scalar>::zero(P.states()), P);
}

/// Stationary distribution of the kernel (marginal of the stationary pair
/// measure).
template <typename Scalar>
ProbabilityVector<Scalar> stationary_distribution(const MarkovKernel<Scalar>& P) {
  return ProbabilityVector<Scalar>(stationary_pair(P).marginal());
}

}  // namespace ldgeom
