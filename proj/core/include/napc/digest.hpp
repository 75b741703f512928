#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "napc/errors.hpp"

namespace napc {

/// FNV-1a 64-bit over a byte range. Used for provenance digests and run
/// fingerprints; not a cryptographic hash.
inline uint64_t fnv1a64(std::span<const std::byte> bytes,
                        uint64_t h = 0xcbf29ce484222325ull) {
  for (std::byte b : bytes) {
    h ^= static_cast<uint64_t>(b);
    h *= 0x100000001b3ull;
  }
  return h;
}

inline uint64_t fnv1a64(const void* data, size_t size,
                        uint64_t h = 0xcbf29ce484222325ull) {
  return fnv1a64(std::span(static_cast<const std::byte*>(data), size), h);
}

inline std::string digest_hex(uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

inline std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file for digest: " + path.string());
  uint64_t h = 0xcbf29ce484222325ull;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h = fnv1a64(buf.data(), static_cast<size_t>(in.gcount()), h);
  }
  return digest_hex(h);
}

}  // namespace napc
