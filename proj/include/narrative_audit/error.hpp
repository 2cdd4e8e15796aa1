#pragma once

#include <stdexcept>
#include <string>

namespace naudit {

// Validation errors map to CLI exit code 1, runtime failures to exit code 2.
enum class ErrorKind { Validation, Runtime };

class AuditError : public std::runtime_error {
 public:
  AuditError(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ValidationError : public AuditError {
 public:
  explicit ValidationError(const std::string& what)
      : AuditError(ErrorKind::Validation, what) {}
};

class RuntimeFailure : public AuditError {
 public:
  explicit RuntimeFailure(const std::string& what)
      : AuditError(ErrorKind::Runtime, what) {}
};

}  // namespace naudit
