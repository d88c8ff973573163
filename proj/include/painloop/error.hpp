#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace painloop {

enum class Errc {
  invalid_sample,
  empty_input,
  invalid_force,
  invalid_action,
  invalid_gain,
  invalid_pitch,
  format,
  numeric,
  distribution,
  config,
  no_reward,
  session_aborted,
  corrupt_log,
  migration,
  phase,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::invalid_sample: return "invalid-sample";
    case Errc::empty_input: return "empty-input";
    case Errc::invalid_force: return "invalid-force";
    case Errc::invalid_action: return "invalid-action";
    case Errc::invalid_gain: return "invalid-gain";
    case Errc::invalid_pitch: return "invalid-pitch";
    case Errc::format: return "format";
    case Errc::numeric: return "numeric";
    case Errc::distribution: return "distribution";
    case Errc::config: return "config";
    case Errc::no_reward: return "no-reward";
    case Errc::session_aborted: return "session-aborted";
    case Errc::corrupt_log: return "corrupt-log";
    case Errc::migration: return "migration";
    case Errc::phase: return "phase";
  }
  return "unknown";
}

// All library failures surface as this one exception type; code() tells them apart.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

// Raised by log_read; line() is 1-based and counts the header line.
class LogError : public Error {
 public:
  LogError(Errc code, std::size_t line, const std::string& what)
      : Error(code, "line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace painloop
