#pragma once

#include <stdexcept>
#include <string>

namespace kle {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A parameter value lies outside the patch domain [0,1]^d.
class DomainError : public Error {
public:
  using Error::Error;
};

/// Invalid argument to a library call (bad degree, continuity, config, ...).
class InvalidArgument : public Error {
public:
  using Error::Error;
};

/// Shapes of operands do not match.
class DimensionError : public Error {
public:
  using Error::Error;
};

/// The geometric mapping degenerates (det DF <= 0) at a sampled point.
class SingularGeometryError : public Error {
public:
  using Error::Error;
};

/// A factorization failed; `index` is the 1-based pivot / leading-minor index
/// reported by the factorization routine.
class FactorizationError : public Error {
public:
  FactorizationError(const std::string& what, int index)
      : Error(what), index_(index) {}
  int index() const { return index_; }

private:
  int index_;
};

} // namespace kle
