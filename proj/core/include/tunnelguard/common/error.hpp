#pragma once

#include <stdexcept>
#include <string>

namespace tg {

// Exception carrying a module-specific error code enum.
template <typename Code>
class CodedError : public std::runtime_error {
 public:
  CodedError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}

  Code code() const noexcept { return code_; }

 private:
  Code code_;
};

}  // namespace tg
