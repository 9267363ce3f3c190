#pragma once

#include <stdexcept>
#include <string>

namespace uae {

// Malformed user input: bad CSV, unknown column, out-of-domain literal, bad flags.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Violated API precondition (shape mismatch, non-scalar loss, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Numerically degenerate state, e.g. a distribution with no support.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace uae
