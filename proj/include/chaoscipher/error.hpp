#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace chaoscipher {

/// Failure categories. Each maps onto one CLI exit code.
enum class ErrorKind {
  config,      ///< invalid parameters or configuration
  divergence,  ///< non-finite or non-physical state during integration
  degenerate,  ///< input carries no usable information (flat range, one level)
  input,       ///< malformed or insufficient input data
  io,          ///< file could not be read or written
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& message,
        std::optional<std::size_t> step = std::nullopt)
      : std::runtime_error(message), kind_(kind), step_(step) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

  /// Integration step index at which a divergence was detected.
  [[nodiscard]] std::optional<std::size_t> step() const noexcept { return step_; }

  /// Same error with a pipeline-stage prefix on the message.
  [[nodiscard]] Error tagged(const std::string& stage) const {
    return Error(kind_, stage + ": " + what(), step_);
  }

private:
  ErrorKind kind_;
  std::optional<std::size_t> step_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

inline int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::config: return 2;
    case ErrorKind::io: return 2;
    case ErrorKind::divergence: return 3;
    case ErrorKind::degenerate: return 4;
    case ErrorKind::input: return 4;
  }
  return 1;
}

}  // namespace chaoscipher
