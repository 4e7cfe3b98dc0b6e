#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tracecurate {

// Broad failure classes. Each maps onto one CLI exit code.
enum class ErrorKind { config, dependency, backend, data };

// Exit codes used by the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitDependency = 3;
inline constexpr int kExitBackend = 4;
inline constexpr int kExitData = 5;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  int exit_code() const noexcept {
    switch (kind_) {
      case ErrorKind::config: return kExitConfig;
      case ErrorKind::dependency: return kExitDependency;
      case ErrorKind::backend: return kExitBackend;
      case ErrorKind::data: return kExitData;
    }
    return kExitData;
  }

 private:
  ErrorKind kind_;
};

inline std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return "config";
    case ErrorKind::dependency: return "dependency";
    case ErrorKind::backend: return "backend";
    case ErrorKind::data: return "data";
  }
  return "data";
}

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message)
      : Error(ErrorKind::config, message) {}
};

// A stage ran before one of the stages it depends on.
class DependencyError : public Error {
 public:
  DependencyError(std::string missing_stage, const std::string& message)
      : Error(ErrorKind::dependency, message),
        missing_stage_(std::move(missing_stage)) {}

  const std::string& missing_stage() const noexcept { return missing_stage_; }

 private:
  std::string missing_stage_;
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& message)
      : Error(ErrorKind::data, message) {}
};

// Transport or protocol failure talking to a judge, solver or grader.
// `retryable` distinguishes transient faults (timeouts, 429, 5xx) from
// permanent ones (bad credentials, malformed request).
class BackendError : public Error {
 public:
  BackendError(const std::string& message, bool retryable)
      : Error(ErrorKind::backend, message), retryable_(retryable) {}

  bool retryable() const noexcept { return retryable_; }

 private:
  bool retryable_;
};

}  // namespace tracecurate
