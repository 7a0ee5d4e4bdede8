#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rinr {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller supplied arguments that violate a precondition (shapes, ranges).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Non-finite values where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Optimization diverged. Carries the step at which the loss went non-finite.
class TrainingError : public NumericError {
 public:
  TrainingError(const std::string& what, long step)
      : NumericError(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

/// A pruning request that would leave some layer with no weights at all.
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// Malformed model or archive content.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Checksum or truncation failure while reading an archive.
class IntegrityError : public FormatError {
 public:
  IntegrityError(const std::string& what, std::ptrdiff_t record = -1)
      : FormatError(what), record_(record) {}
  /// Index of the offending record, -1 when the header itself is bad.
  std::ptrdiff_t record() const noexcept { return record_; }

 private:
  std::ptrdiff_t record_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace rinr
