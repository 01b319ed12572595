#pragma once

#include <stdexcept>
#include <string>

namespace ruleflow {

/// Broad failure classes. The CLI maps these onto process exit codes.
enum class ErrorKind {
  kUsage,       // bad flags, bad config
  kValidation,  // input data violates a contract
  kNumeric,     // runtime / numerical failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error UsageError(const std::string& what) {
  return Error(ErrorKind::kUsage, what);
}
inline Error ValidationError(const std::string& what) {
  return Error(ErrorKind::kValidation, what);
}
inline Error NumericError(const std::string& what) {
  return Error(ErrorKind::kNumeric, what);
}

}  // namespace ruleflow
