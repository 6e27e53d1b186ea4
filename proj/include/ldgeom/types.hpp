#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <utility>

#include "ldgeom/errors.hpp"

namespace ldgeom {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

namespace detail {

// Components below this floor count as having left the open simplex.
inline constexpr double kComponentFloor = 1e-300;
// Sum deviations up to here are kept as-is, ...
inline constexpr double kSumKeep = 1e-12;
// ... up to here silently renormalized, beyond rejected.
inline constexpr double kSumReject = 1e-9;

template <typename Scalar>
Vector<Scalar> validated_simplex(Vector<Scalar> w, const char* role) {
  const std::string who(role);
  if (w.size() < 2) throw DimensionMismatch(who + " needs at least two states");
  if (!w.allFinite()) throw NonFiniteValue(who + " has non-finite components");
  if ((w.array() < Scalar(kComponentFloor)).any())
    throw InvalidDistribution(who + " has components at or below the positivity floor");
  const Scalar dev = std::abs(w.sum() - Scalar(1));
  if (dev > Scalar(kSumReject))
    throw InvalidDistribution(who + " does not sum to one within tolerance");
  if (dev > Scalar(kSumKeep)) w /= w.sum();
  return w;
}

template <typename Scalar>
Vector<Scalar> validated_finite(Vector<Scalar> v, const char* role) {
  if (v.size() == 0) throw DimensionMismatch(std::string(role) + " is empty");
  if (!v.allFinite()) throw NonFiniteValue(std::string(role) + " has non-finite components");
  return v;
}

}  // namespace detail

/// A strictly positive probability vector on n >= 2 states.  Plays the role of
/// a prior or model distribution.
template <typename Scalar = double>
class ProbabilityVector {
 public:
  explicit ProbabilityVector(Vector<Scalar> w)
      : w_(detail::validated_simplex<Scalar>(std::move(w), "ProbabilityVector")) {}

  const Vector<Scalar>& values() const { return w_; }
  Eigen::Index size() const { return w_.size(); }
  Scalar operator[](Eigen::Index i) const { return w_[i]; }

  static ProbabilityVector uniform(Eigen::Index n) {
    return ProbabilityVector(Vector<Scalar>::Constant(n, Scalar(1) / Scalar(n)));
  }

 private:
  Vector<Scalar> w_;
};

/// Same geometry as ProbabilityVector but tagged as observed data: an
/// empirical frequency of samples rather than a model.
template <typename Scalar = double>
class EmpiricalFrequency {
 public:
  explicit EmpiricalFrequency(Vector<Scalar> w)
      : w_(detail::validated_simplex<Scalar>(std::move(w), "EmpiricalFrequency")) {}

  const Vector<Scalar>& values() const { return w_; }
  Eigen::Index size() const { return w_.size(); }
  Scalar operator[](Eigen::Index i) const { return w_[i]; }

  /// Reinterpret the same point of the simplex as a model distribution.
  ProbabilityVector<Scalar> as_probability() const { return ProbabilityVector<Scalar>(w_); }

 private:
  Vector<Scalar> w_;
};

/// An energy (tilt) vector, defined only up to an additive constant: mu and
/// mu + c*1 describe the same tilt direction.
template <typename Scalar = double>
class EnergyVector {
 public:
  explicit EnergyVector(Vector<Scalar> mu)
      : mu_(detail::validated_finite<Scalar>(std::move(mu), "EnergyVector")) {}

  const Vector<Scalar>& values() const { return mu_; }
  Eigen::Index size() const { return mu_.size(); }
  Scalar operator[](Eigen::Index i) const { return mu_[i]; }

 private:
  Vector<Scalar> mu_;
};

/// A real-valued observable on the state space (one value per state).
template <typename Scalar = double>
class RealObservable {
 public:
  explicit RealObservable(Vector<Scalar> f)
      : f_(detail::validated_finite<Scalar>(std::move(f), "RealObservable")) {}

  const Vector<Scalar>& values() const { return f_; }
  Eigen::Index size() const { return f_.size(); }

 private:
  Vector<Scalar> f_;
};

/// True when the two energies differ by a constant shift, i.e. represent the
/// same tilt.
template <typename Scalar>
bool gauge_equivalent(const EnergyVector<Scalar>& a, const EnergyVector<Scalar>& b,
                      Scalar tol = Scalar(1e-12)) {
  if (a.size() != b.size()) return false;
  const Vector<Scalar> d = a.values() - b.values();
  const Scalar mean = d.mean();
  return (d.array() - mean).abs().maxCoeff() <= tol;
}

}  // namespace ldgeom
