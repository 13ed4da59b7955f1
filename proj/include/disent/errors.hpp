#pragma once

#include <stdexcept>
#include <string>

namespace disent {

// Caller broke a documented precondition (shape mismatch, non-scalar output, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A NaN or Inf showed up in a forward value or a gradient.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MiningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss; the message names the component.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateSupportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SizeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace disent
