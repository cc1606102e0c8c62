#ifndef CALM_ERRORS_HPP_
#define CALM_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace calm {

// Precondition or schema violations. Maps to exit code 2 at the CLI.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite values, divergence, non-convergence. Maps to exit code 3.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace calm

#endif  // CALM_ERRORS_HPP_
