#pragma once

#include <stdexcept>
#include <string>

namespace dsrdiff {

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

[[noreturn]] inline void fail(const std::string& msg) {
  throw std::runtime_error(msg);
}

}  // namespace dsrdiff
