#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "ldgeom/contraction.hpp"
#include "ldgeom/errors.hpp"
#include "ldgeom/markov.hpp"
#include "ldgeom/types.hpp"

// Monte Carlo and exact-enumeration verification of rate function
// predictions.  Reproducibility is part of the external contract, so the
// generator and the seed derivation are fixed and documented here rather than
// delegated to implementation-defined standard library distributions.

namespace ldgeom {

/// SplitMix64: state advances by the golden-ratio increment and is scrambled
/// by the finalizer below.  Identity (part of the reproducibility contract):
///   state_{t+1} = state_t + 0x9E3779B97F4A7C15
///   output_t    = mix(state_{t+1})
///   mix(z): z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
///           z ^= z >> 27; z *= 0x94D049BB133111EB; z ^= z >> 31
/// Uniform doubles take the top 53 bits: (output >> 11) * 2^-53.
struct SplitMix64 {
  std::uint64_t state;

  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
  }
  std::uint64_t next() {
    state += 0x9E3779B97F4A7C15ULL;
    return mix(state);
  }
  double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
};

/// Replica substream derivation (also part of the reproducibility contract):
/// substream k of master seed s starts at state mix(s + (k+1) * C) with
/// C = 0xD1B54A32D192ED03.  Streams derived this way are scrambled apart, so
/// replicas can run in any order or in parallel with identical results.
inline SplitMix64 substream(std::uint64_t master, std::uint64_t k) {
  return SplitMix64{SplitMix64::mix(master + (k + 1) * 0xD1B54A32D192ED03ULL)};
}

namespace detail {

// Inverse-CDF categorical draw over fixed cumulative weights; one uniform per
// draw, scanned in state order.
template <typename Scalar>
int categorical(const Vector<Scalar>& cumulative, SplitMix64& rng) {
  const Scalar u = static_cast<Scalar>(rng.next_double());
  const Eigen::Index n = cumulative.size();
  for (Eigen::Index i = 0; i < n - 1; ++i)
    if (u < cumulative(i)) return static_cast<int>(i);
  return static_cast<int>(n - 1);
}

template <typename Scalar>
Vector<Scalar> cumulative_of(const Vector<Scalar>& w) {
  Vector<Scalar> c(w.size());
  Scalar acc = 0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    acc += w(i);
    c(i) = acc;
  }
  return c;
}

}  // namespace detail

/// Draw N i.i.d. states from p using the given substream.  Consumes exactly
/// one uniform per draw.
template <typename Scalar>
std::vector<int> sample_iid(const ProbabilityVector<Scalar>& p, long N, SplitMix64& rng) {
  if (N < 1) throw DimensionMismatch("sample_iid: need N >= 1");
  const Vector<Scalar> cum = detail::cumulative_of(p.values());
  std::vector<int> seq(static_cast<std::size_t>(N));
  for (long t = 0; t < N; ++t) seq[static_cast<std::size_t>(t)] = detail::categorical(cum, rng);
  return seq;
}

template <typename Scalar>
std::vector<int> sample_iid(const ProbabilityVector<Scalar>& p, long N, std::uint64_t seed) {
  SplitMix64 rng{seed};
  return sample_iid(p, N, rng);
}

/// Tag for starting a chain from its stationary distribution.
struct StationaryStart {};

/// Sample a length-N trajectory of the chain.  A fixed initial state consumes
/// no randomness for the start; StationaryStart draws the initial state from
/// the stationary distribution first.  One uniform per transition afterwards.
template <typename Scalar>
std::vector<int> sample_markov(const MarkovKernel<Scalar>& P, long N,
                               const std::variant<int, StationaryStart>& initial,
                               SplitMix64& rng) {
  if (N < 1) throw DimensionMismatch("sample_markov: need N >= 1");
  const Eigen::Index n = P.states();
  int state;
  if (std::holds_alternative<int>(initial)) {
    state = std::get<int>(initial);
    if (state < 0 || state >= n)
      throw DimensionMismatch("sample_markov: initial state out of range");
  } else {
    const Vector<Scalar> cum = detail::cumulative_of(stationary_distribution(P).values());
    state = detail::categorical(cum, rng);
  }
  std::vector<Vector<Scalar>> row_cum;
  row_cum.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    row_cum.push_back(detail::cumulative_of(Vector<Scalar>(P.matrix().row(i).transpose())));
  std::vector<int> seq(static_cast<std::size_t>(N));
  seq[0] = state;
  for (long t = 1; t < N; ++t) {
    state = detail::categorical(row_cum[static_cast<std::size_t>(state)], rng);
    seq[static_cast<std::size_t>(t)] = state;
  }
  return seq;
}

template <typename Scalar>
std::vector<int> sample_markov(const MarkovKernel<Scalar>& P, long N,
                               const std::variant<int, StationaryStart>& initial,
                               std::uint64_t seed) {
  SplitMix64 rng{seed};
  return sample_markov(P, N, initial, rng);
}

/// Occupation counts of a sequence over n states.
inline Eigen::VectorXi state_counts(const std::vector<int>& seq, Eigen::Index n) {
  if (seq.empty()) throw DimensionMismatch("state_counts: empty sequence");
  Eigen::VectorXi c = Eigen::VectorXi::Zero(n);
  for (int s : seq) {
    if (s < 0 || s >= n) throw DimensionMismatch("state_counts: state index out of range");
    c(s) += 1;
  }
  return c;
}

/// Report returned instead of a frequency when some state was never seen: the
/// empirical point sits on the simplex boundary, which the open-simplex types
/// cannot represent.  Not an error.
struct BoundaryReport {
  Eigen::VectorXi counts;
  std::vector<int> unseen_states;
};

/// Empirical frequency of a sequence, or a BoundaryReport when a state count
/// is zero.
template <typename Scalar = double>
std::variant<EmpiricalFrequency<Scalar>, BoundaryReport> empirical_frequency(
    const std::vector<int>& seq, Eigen::Index n) {
  const Eigen::VectorXi c = state_counts(seq, n);
  if ((c.array() == 0).any()) {
    BoundaryReport report{c, {}};
    for (Eigen::Index i = 0; i < n; ++i)
      if (c(i) == 0) report.unseen_states.push_back(static_cast<int>(i));
    return report;
  }
  return EmpiricalFrequency<Scalar>(c.template cast<Scalar>() /
                                    static_cast<Scalar>(seq.size()));
}

/// One cell of the exact multinomial law: occupation counts and their
/// probability.  Counts use a fixed-capacity array (the enumeration is capped
/// at n <= 5 states).
template <typename Scalar = double>
struct ExactCell {
  std::array<int, 5> counts{};
  Scalar probability;
};

template <typename Scalar = double>
struct ExactDistribution {
  Eigen::Index n;
  long N;
  std::vector<ExactCell<Scalar>> cells;
};

/// Exact multinomial distribution of occupation counts for N i.i.d. draws
/// from p, enumerated over all compositions of N into n parts.  Capped at
/// n <= 5, N <= 60.  Cell probabilities are evaluated in log space.
template <typename Scalar>
ExactDistribution<Scalar> exact_frequency_distribution(const ProbabilityVector<Scalar>& p, long N) {
  const Eigen::Index n = p.size();
  if (n > 5 || N > 60)
    throw CapExceeded("exact_frequency_distribution: enumeration capped at n <= 5, N <= 60");
  if (N < 1) throw DimensionMismatch("exact_frequency_distribution: need N >= 1");
  ExactDistribution<Scalar> dist{n, N, {}};
  const Vector<Scalar> logp = p.values().array().log();
  std::array<int, 5> counts{};
  const Scalar lgN = std::lgamma(static_cast<Scalar>(N + 1));
  // Recursive enumeration in lexicographic count order.
  std::function<void(Eigen::Index, long)> rec = [&](Eigen::Index i, long left) {
    if (i == n - 1) {
      counts[static_cast<std::size_t>(i)] = static_cast<int>(left);
      Scalar logprob = lgN;
      for (Eigen::Index j = 0; j < n; ++j) {
        const int c = counts[static_cast<std::size_t>(j)];
        logprob += static_cast<Scalar>(c) * logp(j) - std::lgamma(static_cast<Scalar>(c + 1));
      }
      dist.cells.push_back({counts, std::exp(logprob)});
      return;
    }
    for (long c = 0; c <= left; ++c) {
      counts[static_cast<std::size_t>(i)] = static_cast<int>(c);
      rec(i + 1, left - c);
    }
  };
  rec(0, N);
  return dist;
}

/// The ball membership predicate shared by the Monte Carlo and the exact
/// paths: the frequency counts/N lies in the closed infinity-norm ball of
/// radius delta around the center.  Both paths evaluate the same floating
/// point expression, so boundary cells are classified consistently.
template <typename Scalar>
bool in_frequency_ball(const Eigen::VectorXi& counts, long N, const Vector<Scalar>& center,
                       Scalar delta) {
  Scalar worst = 0;
  for (Eigen::Index i = 0; i < counts.size(); ++i) {
    const Scalar f = static_cast<Scalar>(counts(i)) / static_cast<Scalar>(N);
    worst = std::max(worst, std::abs(f - center(i)));
  }
  return worst <= delta;
}

/// Same predicate in moment coordinates: |X (counts/N) - center|_inf <= delta.
template <typename Scalar>
bool in_moment_ball(const Eigen::VectorXi& counts, long N, const ObservableMatrix<Scalar>& X,
                    const Vector<Scalar>& center, Scalar delta) {
  const Vector<Scalar> f = counts.template cast<Scalar>() / static_cast<Scalar>(N);
  return ((X.matrix() * f) - center).template lpNorm<Eigen::Infinity>() <= delta;
}

/// Exact probability of the frequency ball under the enumerated law.
template <typename Scalar>
Scalar ball_probability(const ExactDistribution<Scalar>& dist, const Vector<Scalar>& center,
                        Scalar delta) {
  if (center.size() != dist.n)
    throw DimensionMismatch("ball_probability: center length does not match the state count");
  Scalar out = 0;
  Eigen::VectorXi c(dist.n);
  for (const auto& cell : dist.cells) {
    for (Eigen::Index i = 0; i < dist.n; ++i) c(i) = cell.counts[static_cast<std::size_t>(i)];
    if (in_frequency_ball(c, dist.N, center, delta)) out += cell.probability;
  }
  return out;
}

enum class TargetKind { Frequency, Moment };

/// What to sample and which rare event to count.
template <typename Scalar = double>
struct SampleSpec {
  std::optional<ProbabilityVector<Scalar>> prior;  // exactly one of prior ...
  std::optional<MarkovKernel<Scalar>> kernel;      // ... or kernel
  std::variant<int, StationaryStart> initial = 0;  // chain start (kernel case)
  std::vector<long> sample_sizes;                  // the N ladder
  long replicas = 0;                               // R per rung
  std::uint64_t master_seed = 0;
  TargetKind target = TargetKind::Frequency;
  Vector<Scalar> center;                                 // ball center (nu or x)
  Scalar delta = 0;                                      // ball radius, infinity norm
  std::optional<ObservableMatrix<Scalar>> observable;    // needed for Moment targets
  int threads = 1;
};

/// Per-N Monte Carlo outcome.  The Wilson half-width is on the hit
/// proportion; the rate bounds map the Wilson interval ends through
/// -(1/N) log.  Rates are NaN when undefined (zero hits).
template <typename Scalar = double>
struct RateRung {
  long N = 0;
  long hits = 0;
  long replicas = 0;
  Scalar p_hat = 0;
  Scalar wilson_center = 0;
  Scalar wilson_halfwidth = 0;
  Scalar rate = 0;        // -(1/N) log p_hat
  Scalar rate_lower = 0;  // from the upper Wilson end
  Scalar rate_upper = 0;  // from the lower Wilson end
  bool insufficient_hits = false;  // fewer than 10 hits
};

template <typename Scalar = double>
struct RateEstimate {
  std::vector<RateRung<Scalar>> rungs;
  Scalar analytic_rate = std::numeric_limits<Scalar>::quiet_NaN();
  TargetKind target = TargetKind::Frequency;
  std::uint64_t master_seed = 0;
};

namespace detail {

template <typename Scalar>
RateRung<Scalar> make_rung(long N, long hits, long R) {
  RateRung<Scalar> rung;
  rung.N = N;
  rung.hits = hits;
  rung.replicas = R;
  const Scalar z = Scalar(1.959963984540054);  // 95% normal quantile
  const Scalar Rs = static_cast<Scalar>(R);
  const Scalar ph = static_cast<Scalar>(hits) / Rs;
  rung.p_hat = ph;
  const Scalar denom = Scalar(1) + z * z / Rs;
  rung.wilson_center = (ph + z * z / (2 * Rs)) / denom;
  rung.wilson_halfwidth =
      (z / denom) * std::sqrt(ph * (Scalar(1) - ph) / Rs + z * z / (4 * Rs * Rs));
  const Scalar lo = std::max(rung.wilson_center - rung.wilson_halfwidth, Scalar(0));
  const Scalar hi = std::min(rung.wilson_center + rung.wilson_halfwidth, Scalar(1));
  const Scalar nan = std::numeric_limits<Scalar>::quiet_NaN();
  rung.rate = hits > 0 ? -std::log(ph) / static_cast<Scalar>(N) : nan;
  rung.rate_lower = hi > 0 ? -std::log(hi) / static_cast<Scalar>(N) : nan;
  rung.rate_upper = lo > 0 ? -std::log(lo) / static_cast<Scalar>(N) : nan;
  rung.insufficient_hits = hits < 10;
  return rung;
}

}  // namespace detail

/// Monte Carlo estimate of the decay rate of the target ball probability.
///
/// Replica r of rung t draws its whole trajectory from
/// substream(master_seed, t * R + r), so hit counts do not depend on
/// execution order: serial and parallel runs produce identical estimates.
/// The analytic handle is evaluated once at the ball center and stored for
/// comparison.
template <typename Scalar>
RateEstimate<Scalar> estimate_rate(
    const SampleSpec<Scalar>& spec,
    const std::function<Scalar(const Vector<Scalar>&)>& analytic) {
  if (spec.prior.has_value() == spec.kernel.has_value())
    throw DimensionMismatch("estimate_rate: exactly one of prior or kernel must be given");
  if (spec.replicas < 1) throw DimensionMismatch("estimate_rate: need at least one replica");
  if (spec.sample_sizes.empty())
    throw DimensionMismatch("estimate_rate: need at least one sample size");
  if (spec.target == TargetKind::Moment && !spec.observable.has_value())
    throw DimensionMismatch("estimate_rate: moment targets need an observable matrix");
  const Eigen::Index n = spec.prior ? spec.prior->size() : spec.kernel->states();
  if (spec.target == TargetKind::Frequency && spec.center.size() != n)
    throw DimensionMismatch("estimate_rate: ball center length does not match the state count");
  if (spec.target == TargetKind::Moment &&
      spec.center.size() != spec.observable->observables())
    throw DimensionMismatch("estimate_rate: ball center length does not match the observables");

  RateEstimate<Scalar> out;
  out.target = spec.target;
  out.master_seed = spec.master_seed;
  out.analytic_rate = analytic ? analytic(spec.center) : std::numeric_limits<Scalar>::quiet_NaN();

  const long R = spec.replicas;
  const int threads = std::max(1, spec.threads);
  for (std::size_t t = 0; t < spec.sample_sizes.size(); ++t) {
    const long N = spec.sample_sizes[t];
    if (N < 1) throw DimensionMismatch("estimate_rate: sample sizes must be positive");

    auto replica_hit = [&](long r) {
      SplitMix64 rng = substream(spec.master_seed,
                                 static_cast<std::uint64_t>(t) * static_cast<std::uint64_t>(R) +
                                     static_cast<std::uint64_t>(r));
      const std::vector<int> seq = spec.prior
                                       ? sample_iid(*spec.prior, N, rng)
                                       : sample_markov(*spec.kernel, N, spec.initial, rng);
      const Eigen::VectorXi c = state_counts(seq, n);
      return spec.target == TargetKind::Frequency
                 ? in_frequency_ball(c, N, spec.center, spec.delta)
                 : in_moment_ball(c, N, *spec.observable, spec.center, spec.delta);
    };

    long hits = 0;
    if (threads == 1) {
      for (long r = 0; r < R; ++r)
        if (replica_hit(r)) ++hits;
    } else {
      // Hit counts are integers summed over disjoint replica blocks, so the
      // partition cannot change the result.
      std::vector<long> partial(static_cast<std::size_t>(threads), 0);
      std::vector<std::thread> pool;
      pool.reserve(static_cast<std::size_t>(threads));
      for (int b = 0; b < threads; ++b) {
        const long lo = R * b / threads, hi = R * (b + 1) / threads;
        pool.emplace_back([&, b, lo, hi]() {
          long local = 0;
          for (long r = lo; r < hi; ++r)
            if (replica_hit(r)) ++local;
          partial[static_cast<std::size_t>(b)] = local;
        });
      }
      for (auto& th : pool) th.join();
      for (long v : partial) hits += v;
    }
    out.rungs.push_back(detail::make_rung<Scalar>(N, hits, R));
  }
  return out;
}

}  // namespace ldgeom
