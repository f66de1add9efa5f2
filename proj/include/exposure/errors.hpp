#pragma once

#include <stdexcept>
#include <string>

namespace exposure {

// Input violates a schema or type invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A computation has no meaningful result (zero variance, too few samples).
class DegenerateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace exposure
