#pragma once

#include <cstdint>
#include <string>

namespace artmetric {

// FNV-1a over a byte range.
uint64_t fnv1a64(const void* bytes, size_t n, uint64_t h = 0xcbf29ce484222325ULL);
uint64_t fnv1a64(const std::string& s);

std::string to_hex(uint64_t v);

// Content hash of a file, as a 16-char hex string. Throws std::runtime_error
// if the file cannot be read.
std::string file_checksum(const std::string& path);

}  // namespace artmetric
