#pragma once

#include <string>

#include "knerf/tensor.hpp"

namespace knerf {

// SHA-256 hex digest of raw bytes.
std::string sha256_hex(const void* data, size_t len);

// Digest over a ParamSet's names, shapes and raw float payloads; used to
// prove parameters stayed bitwise-frozen across a training stage.
std::string param_digest(const ParamSet<float>& params);

}  // namespace knerf
