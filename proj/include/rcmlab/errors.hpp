#pragma once

#include <stdexcept>
#include <string>

namespace rcm {

// Malformed or inconsistent user input (bad config field, out-of-range argument).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A numerical precondition of the model does not hold, e.g. m_phi = 0 or
// a coupling pair that violates psi <= phi.
class PreconditionError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace rcm
