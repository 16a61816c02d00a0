#ifndef BOSH_ERRORS_HPP
#define BOSH_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace bosh {

// Raised when a caller breaks a documented precondition.
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Factorization or likelihood evaluation failed. Carries the last jitter tried.
class FitError : public std::runtime_error {
 public:
  FitError(const std::string& what, double final_jitter = 0.0)
      : std::runtime_error(what), final_jitter_(final_jitter) {}
  double final_jitter() const { return final_jitter_; }

 private:
  double final_jitter_;
};

// Upper and lower kernel variances cannot be separated from the data.
class IdentifiabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The objective handed to an optimizer returned something unusable.
class OptimizationError : public std::runtime_error {
 public:
  OptimizationError(const std::string& what, std::vector<double> offending_x)
      : std::runtime_error(what), offending_x_(std::move(offending_x)) {}
  const std::vector<double>& offending_x() const { return offending_x_; }

 private:
  std::vector<double> offending_x_;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SamplingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define BOSH_EXPECT(cond, msg)                     \
  do {                                             \
    if (!(cond)) throw ::bosh::ContractViolation(msg); \
  } while (0)

}  // namespace bosh

#endif  // BOSH_ERRORS_HPP
