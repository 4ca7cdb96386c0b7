#include "knerf/digest.hpp"

#include <openssl/evp.h>

#include <cstring>

namespace knerf {

std::string sha256_hex(const void* data, size_t len) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int md_len = 0;
  EVP_Digest(data, len, md, &md_len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(md_len * 2);
  for (unsigned int i = 0; i < md_len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xF]);
  }
  return out;
}

std::string param_digest(const ParamSet<float>& params) {
  std::string blob;
  for (const auto& t : params.tensors) {
    blob += t.name;
    blob.push_back('\0');
    for (int d : t.shape) blob += std::to_string(d) + ",";
    blob.push_back('\0');
    size_t off = blob.size();
    blob.resize(off + t.data.size() * sizeof(float));
    std::memcpy(blob.data() + off, t.data.data(), t.data.size() * sizeof(float));
  }
  return sha256_hex(blob.data(), blob.size());
}

}  // namespace knerf
