#pragma once

#include <stdexcept>
#include <string>

namespace fracinv {

// Harness exit codes map onto these three families (1, 2, 3).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GammaPoleError : ValidationError {
  using ValidationError::ValidationError;
};
struct SectorViolation : ValidationError {
  using ValidationError::ValidationError;
};
struct ShapeMismatch : ValidationError {
  using ValidationError::ValidationError;
};
struct OutOfRange : ValidationError {
  using ValidationError::ValidationError;
};
struct NonzeroInitialValue : ValidationError {
  using ValidationError::ValidationError;
};
struct OrderViolation : ValidationError {
  using ValidationError::ValidationError;
};

struct ResolutionError : NumericalError {
  using NumericalError::NumericalError;
};
struct DegenerateSource : NumericalError {
  using NumericalError::NumericalError;
};
struct WindowTooShort : NumericalError {
  using NumericalError::NumericalError;
};
struct IllConditionedBasis : NumericalError {
  using NumericalError::NumericalError;
};
struct ExtrapolationDivergence : NumericalError {
  using NumericalError::NumericalError;
};
struct InsufficientSpectrum : NumericalError {
  using NumericalError::NumericalError;
};

}  // namespace fracinv
