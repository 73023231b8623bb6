#pragma once

#include <stdexcept>
#include <string>

namespace kickwave {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error("kickwave: " + what) {}
};

}  // namespace kickwave
