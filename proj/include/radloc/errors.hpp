#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace radloc {

/// Input violated a documented precondition (non-unit direction, bad index, ...).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Geometry is degenerate: coincident points, parallel lines, polar elevations.
class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A Fisher information matrix that must be inverted is (numerically) singular.
/// Carries the number of unobservable directions and their eigenvectors'
/// dominant parameter indices so callers can report what is missing.
class IdentifiabilityError : public std::runtime_error {
 public:
  IdentifiabilityError(const std::string& what, int rank_deficiency,
                       std::vector<int> weak_parameters)
      : std::runtime_error(what),
        rank_deficiency_(rank_deficiency),
        weak_parameters_(std::move(weak_parameters)) {}

  int rank_deficiency() const noexcept { return rank_deficiency_; }
  const std::vector<int>& weak_parameters() const noexcept { return weak_parameters_; }

 private:
  int rank_deficiency_;
  std::vector<int> weak_parameters_;
};

/// Malformed or out-of-schema scenario configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace radloc
