#pragma once

#include <stdexcept>
#include <string>

namespace topoframe {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input document (JSON, PBM, CSV).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A well-formed document whose values violate a model invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Linear solve failed: singular system, mechanism, or residual too large.
class SolverError : public Error {
 public:
  using Error::Error;
};

/// Invalid geometry (collapsed member, empty structure, ...).
class GeometryError : public Error {
 public:
  using Error::Error;
};

}  // namespace topoframe
