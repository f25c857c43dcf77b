#include "artmetric/core/hash.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "artmetric/core/rng.hpp"

namespace artmetric {

uint64_t fnv1a64(const void* bytes, size_t n, uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

std::string to_hex(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read file: " + path);
  uint64_t h = 0xcbf29ce484222325ULL;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    std::streamsize got = in.gcount();
    if (got > 0) h = fnv1a64(buf.data(), static_cast<size_t>(got), h);
  }
  return to_hex(h);
}

uint64_t derive_seed(const std::string& stage, uint64_t global_seed) {
  uint64_t h = fnv1a64(stage);
  h = fnv1a64(&global_seed, sizeof(global_seed), h);
  return h;
}

}  // namespace artmetric
