#pragma once

#include <stdexcept>
#include <string>

namespace dpgcn {

// Bad inputs: rejected parameters, malformed files, dimension mismatches.
// The CLI maps this to exit code 1.
class validation_error : public std::invalid_argument {
 public:
  explicit validation_error(const std::string& what) : std::invalid_argument(what) {}
};

// A quantity the math guarantees was observed to be false at runtime.
// Any throw of this type is an implementation bug, not a bad input.
// The CLI maps this to exit code 2.
class invariant_error : public std::runtime_error {
 public:
  explicit invariant_error(const std::string& what) : std::runtime_error(what) {}
};

// Iterative solver hit its iteration cap. Carries the best estimate so a
// caller can decide whether the partial answer is usable.
class convergence_error : public std::runtime_error {
 public:
  convergence_error(const std::string& what, double best_estimate)
      : std::runtime_error(what), best_estimate_(best_estimate) {}

  double best_estimate() const { return best_estimate_; }

 private:
  double best_estimate_;
};

}  // namespace dpgcn
