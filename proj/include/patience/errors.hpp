#pragma once

#include <stdexcept>
#include <string>

namespace patience {

// Base class for every error thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace patience
