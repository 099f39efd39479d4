#pragma once

#include <stdexcept>
#include <string>

namespace asdkit {

/// Broad failure class; the CLI maps it onto its exit code.
enum class ErrorKind {
  kConfig,   // bad configuration or usage
  kData,     // malformed, missing or inconsistent input data
  kNumeric,  // non-finite values or a failed numerical precondition
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorKind::kConfig, w) {}
};

struct DataError : Error {
  explicit DataError(const std::string& w) : Error(ErrorKind::kData, w) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& w) : Error(ErrorKind::kNumeric, w) {}
};

/// Malformed RIFF/WAVE container; the message names the offending chunk.
struct ParseError : DataError {
  using DataError::DataError;
};
struct UnsupportedFormatError : DataError {
  using DataError::DataError;
};
struct RateMismatchError : DataError {
  using DataError::DataError;
};
struct IoError : DataError {
  using DataError::DataError;
};
struct RangeError : DataError {
  using DataError::DataError;
};
struct DimensionError : NumericError {
  using NumericError::NumericError;
};

}  // namespace asdkit
