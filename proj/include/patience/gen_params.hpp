#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace patience {

// Sampling parameters attached to every completion request.
struct GenParams {
  std::string model;
  double temperature = 0.7;
  int max_tokens = 1024;
  std::optional<std::int64_t> seed;

  bool operator==(const GenParams&) const = default;
};

}  // namespace patience
