#pragma once

#include <stdexcept>
#include <string>

namespace ldgeom {

/// Base class for all library errors.  `code()` is a stable machine-readable
/// identifier; `what()` carries the human-readable detail.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

/// Input is malformed at the type level: wrong sizes, non-finite entries,
/// invalid distributions.  The CLI maps these to exit code 1.
class InputError : public Error {
 public:
  using Error::Error;
};

/// The computation left its domain of validity (boundary of the moment hull,
/// empty fiber, degenerate conditioning, ...).  The CLI maps these to exit 2.
class DomainError : public Error {
 public:
  using Error::Error;
};

struct DimensionMismatch : InputError {
  explicit DimensionMismatch(const std::string& w) : InputError("dimension_mismatch", w) {}
};

struct InvalidDistribution : InputError {
  explicit InvalidDistribution(const std::string& w) : InputError("invalid_distribution", w) {}
};

struct NonFiniteValue : InputError {
  explicit NonFiniteValue(const std::string& w) : InputError("non_finite", w) {}
};

struct LayoutMismatch : InputError {
  explicit LayoutMismatch(const std::string& w) : InputError("layout_mismatch", w) {}
};

struct OutsideDomain : DomainError {
  explicit OutsideDomain(const std::string& w) : DomainError("outside_domain", w) {}
};

struct DegenerateObservable : DomainError {
  explicit DegenerateObservable(const std::string& w) : DomainError("degenerate_observable", w) {}
};

struct FiberViolation : DomainError {
  explicit FiberViolation(const std::string& w) : DomainError("fiber_violation", w) {}
};

struct RankDeficient : DomainError {
  explicit RankDeficient(const std::string& w) : DomainError("rank_deficient", w) {}
};

struct PatchBoundary : DomainError {
  explicit PatchBoundary(const std::string& w) : DomainError("patch_boundary", w) {}
};

struct EmptyFiber : DomainError {
  explicit EmptyFiber(const std::string& w) : DomainError("empty_fiber", w) {}
};

struct CapExceeded : DomainError {
  explicit CapExceeded(const std::string& w) : DomainError("cap_exceeded", w) {}
};

struct SupportViolation : DomainError {
  explicit SupportViolation(const std::string& w) : DomainError("support_violation", w) {}
};

struct NonPrimitive : DomainError {
  explicit NonPrimitive(const std::string& w) : DomainError("non_primitive", w) {}
};

}  // namespace ldgeom
