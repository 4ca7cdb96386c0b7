#include "knerf/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace knerf {

namespace {

void put_le32(std::string& out, uint32_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

uint32_t get_le32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ostringstream header;
  header << "knerf-checkpoint " << kCheckpointFormatVersion << "\n";
  for (const auto& [k, v] : ckpt.meta) {
    KNERF_REQUIRE(k.find(' ') == std::string::npos, "checkpoint meta key contains a space");
    header << "meta " << k << " " << v << "\n";
  }
  for (const auto& t : ckpt.tensors.tensors) {
    header << "tensor " << t.name;
    for (int d : t.shape) header << " " << d;
    header << "\n";
  }
  header << "\n";

  std::string payload;
  payload.reserve(static_cast<size_t>(ckpt.tensors.total_size()) * 4);
  for (const auto& t : ckpt.tensors.tensors)
    for (float f : t.data) put_le32(payload, std::bit_cast<uint32_t>(f));

  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write checkpoint: " + path);
  out << header.str();
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw io_error("short write for checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw checkpoint_error("cannot open checkpoint: " + path);

  std::string line;
  if (!std::getline(in, line)) throw checkpoint_error("empty checkpoint: " + path);
  {
    std::istringstream ls(line);
    std::string magic;
    int version = -1;
    ls >> magic >> version;
    if (magic != "knerf-checkpoint")
      throw checkpoint_error("not a knerf checkpoint: " + path);
    if (version != kCheckpointFormatVersion)
      throw checkpoint_error("unsupported checkpoint version " + std::to_string(version) + " in " +
                             path);
  }

  Checkpoint ckpt;
  while (std::getline(in, line)) {
    if (line.empty()) break;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "meta") {
      std::string key;
      ls >> key;
      std::string value;
      std::getline(ls, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      ckpt.meta[key] = value;
    } else if (kind == "tensor") {
      std::string name;
      ls >> name;
      std::vector<int> shape;
      int d;
      while (ls >> d) shape.push_back(d);
      if (name.empty() || shape.empty())
        throw checkpoint_error("malformed tensor line in " + path + ": " + line);
      ckpt.tensors.add(name, shape);
    } else {
      throw checkpoint_error("unknown header line in " + path + ": " + line);
    }
  }

  for (auto& t : ckpt.tensors.tensors) {
    std::vector<unsigned char> buf(static_cast<size_t>(t.size()) * 4);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() != static_cast<std::streamsize>(buf.size()))
      throw checkpoint_error("truncated payload reading tensor " + t.name + " in " + path);
    for (int64_t i = 0; i < t.size(); ++i)
      t.data[static_cast<size_t>(i)] =
          std::bit_cast<float>(get_le32(buf.data() + static_cast<size_t>(i) * 4));
  }
  char extra;
  if (in.read(&extra, 1) && in.gcount() == 1)
    throw checkpoint_error("trailing bytes after declared payload in " + path);
  return ckpt;
}

}  // namespace knerf
