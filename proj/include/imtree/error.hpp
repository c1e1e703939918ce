#pragma once

#include <stdexcept>
#include <string>

namespace imtree {

// Raised when a request would exceed a documented desk-scale guard
// (feasible-set size, enumeration limits, block caps used as hard limits).
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised by the Jensen-optimal probability solver when the pairwise
// matrix is numerically singular.
class SingularMatrixError : public std::runtime_error {
 public:
  SingularMatrixError(const std::string& what, double condition)
      : std::runtime_error(what), condition_(condition) {}
  double condition() const noexcept { return condition_; }

 private:
  double condition_;
};

}  // namespace imtree
