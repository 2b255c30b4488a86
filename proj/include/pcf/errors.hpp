#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace pcf {

// All library failures carry a stable machine-readable code. The CLI prints
// the code plus message as a single line and exits nonzero.
class Error : public std::runtime_error {
public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

  static Error dimension(const std::string& msg) { return {"DIMENSION_MISMATCH", msg}; }
  static Error argument(const std::string& msg) { return {"INVALID_ARGUMENT", msg}; }
  static Error validation(const std::string& msg) { return {"VALIDATION", msg}; }
  static Error io(const std::string& msg) { return {"IO_ERROR", msg}; }
  static Error training(const std::string& msg) { return {"TRAINING", msg}; }
  static Error degenerate_rotation(const std::string& msg) { return {"DEGENERATE_ROTATION", msg}; }

private:
  std::string code_;
};

}  // namespace pcf
