#include "orbit/hash.hpp"

#include <openssl/evp.h>

#include <array>

#include "orbit/error.hpp"

namespace orbit {

namespace {

std::array<unsigned char, 32> digest(std::string_view data) {
  std::array<unsigned char, 32> out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 || len != 32)
    fail(ErrorCode::IoError, "sha256 digest failed");
  return out;
}

}  // namespace

std::string sha256_hex(std::string_view data) {
  static const char* hex = "0123456789abcdef";
  const auto d = digest(data);
  std::string out;
  out.reserve(64);
  for (unsigned char b : d) {
    out.push_back(hex[b >> 4]);
    out.push_back(hex[b & 15]);
  }
  return out;
}

std::uint64_t sha256_u64(std::string_view data) {
  const auto d = digest(data);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | d[i];
  return v;
}

}  // namespace orbit
