#pragma once

#include <stdexcept>
#include <string>

namespace acervo {

enum class ErrorCode {
  io,
  parse,
  invalid_argument,
  not_found,
  numeric,
  conflict,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace acervo
