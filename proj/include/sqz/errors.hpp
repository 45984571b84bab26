#pragma once

#include <stdexcept>
#include <string>

namespace sqz {

enum class ErrorKind {
  config,
  argument,
  numeric,
  degenerate_envelope,
  empty_overlap,
  grid_mismatch,
  range,
  unphysical_delay,
  no_fold,
  fit,
  stream_alignment,
  insufficient_statistics,
  baseline,
  unsupported_input,
  io,
};

const char* to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library carries a kind so callers (and the CLI)
/// can map it to a diagnostic without parsing the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);
  ErrorKind kind() const noexcept { return kind_; }
  /// The message without the "<kind> error: " prefix that what() carries.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorKind kind_;
  std::string message_;
};

}  // namespace sqz
