#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vgmix {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Cholesky met a pivot below tolerance; pivot() is the 0-based row index.
class NotPositiveDefinite : public Error {
 public:
  explicit NotPositiveDefinite(std::size_t pivot)
      : Error("matrix is not positive definite (pivot " + std::to_string(pivot) + ")"),
        pivot_(pivot) {}
  std::size_t pivot() const noexcept { return pivot_; }

 private:
  std::size_t pivot_;
};

/// A mixture component collapsed during an M-step.
class DegenerateComponent : public Error {
 public:
  DegenerateComponent(std::size_t component, const std::string& why)
      : Error("component " + std::to_string(component) + " degenerate: " + why),
        component_(component) {}
  std::size_t component() const noexcept { return component_; }

 private:
  std::size_t component_;
};

class TooFewObservations : public Error {
 public:
  using Error::Error;
};

class AllStartsFailed : public Error {
 public:
  using Error::Error;
};

/// Malformed or invariant-violating model document. path() names the field.
class SchemaError : public Error {
 public:
  SchemaError(std::string path, const std::string& why)
      : Error(path + ": " + why), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace vgmix
