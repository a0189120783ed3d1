#pragma once

#include <stdexcept>
#include <string>

namespace fwp {

/// Error raised by library operations. `code()` is a stable snake_case
/// identifier suitable for machine-readable reporting.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

}  // namespace fwp
