#pragma once

#include <stdexcept>
#include <string>

namespace rideshare {

// Invalid run configuration or graph.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Mathematical precondition violated (e.g. non-positive curvature).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// API misuse: empty inputs, mismatched dimensions.
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Non-finite values produced during simulation or training.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Forward-Euler step pushed a population too far below zero.
struct InstabilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace rideshare
