#pragma once

#include <stdexcept>
#include <string>

namespace g2l {

/// Raised when an operation is called with arguments that violate its
/// documented preconditions (divisibility, ranges, shape agreement).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a file cannot be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class FormatErrorKind {
  bad_magic,
  payload_length_mismatch,
  unsupported_dtype,
  unsupported_shape,
  version_mismatch,
  malformed,
};

/// Raised when an on-disk artifact (volume, checkpoint, recipe) does not
/// match its format.
class FormatError : public std::runtime_error {
 public:
  FormatError(FormatErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  FormatErrorKind kind() const noexcept { return kind_; }

 private:
  FormatErrorKind kind_;
};

}  // namespace g2l
