#pragma once

#include <stdexcept>
#include <string>

namespace edd {

// Bad arguments, inconsistent sizes, malformed configuration.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Singular or failed factorization.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Random field realisation rejected (positivity floor).
class SamplingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw InputError(what);
}

}  // namespace edd
