#pragma once

#include <map>
#include <string>
#include <vector>

#include "knerf/tensor.hpp"

namespace knerf {

// On-disk checkpoint: a plain-text header (format version, scalar metadata,
// one `tensor <name> <dims...>` line per tensor) terminated by a blank line,
// followed by the concatenated tensor payloads as little-endian 32-bit
// floats in header order.
struct Checkpoint {
  std::map<std::string, std::string> meta;
  ParamSet<float> tensors;
};

inline constexpr int kCheckpointFormatVersion = 1;

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);

// Throws checkpoint_error naming the offending tensor on truncation, and on
// version or shape-declaration mismatches.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace knerf
