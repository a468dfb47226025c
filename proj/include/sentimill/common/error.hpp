#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace sentimill {

// Every failure surfaced by the library carries a stable, machine-readable
// code ("UnknownTable", "InvalidSpec", ...) next to the human message. The
// HTTP layer and the CLI map codes to status codes / exit codes.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  explicit Error(std::string code) : Error(code, code) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

}  // namespace sentimill
