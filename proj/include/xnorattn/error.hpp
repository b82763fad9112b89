#pragma once

#include <stdexcept>
#include <string>

namespace xnorattn {

enum class ErrorKind {
  ShapeMismatch,
  NonFinite,
  InvalidArgument,
  ZeroDenominator,
  Io,
  OutOfMemory,
  Divergence,
};

const char* to_string(ErrorKind kind) noexcept;

/// Every failure in the library surfaces as this exception; `kind()` lets
/// callers branch without parsing the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace xnorattn
