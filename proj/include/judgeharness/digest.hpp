#pragma once

#include <openssl/evp.h>

#include <array>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

#include "judgeharness/error.hpp"

namespace judgeharness {

/// Incremental SHA-256 over byte strings. Used for cache keys, record
/// checksums, manifest content digests and seeded coin flips.
class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (ctx_ == nullptr || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1)
      throw Error(Errc::IoError, "sha256 init failed");
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  Sha256& update(std::string_view data) {
    EVP_DigestUpdate(ctx_, data.data(), data.size());
    return *this;
  }

  /// Length-prefixed update, so ("ab","c") and ("a","bc") hash differently.
  Sha256& field(std::string_view data) {
    const std::string len = std::to_string(data.size()) + ":";
    update(len);
    return update(data);
  }

  std::array<unsigned char, 32> finish() {
    std::array<unsigned char, 32> out{};
    unsigned int n = 0;
    EVP_DigestFinal_ex(ctx_, out.data(), &n);
    return out;
  }

  std::string hex() {
    const auto bytes = finish();
    std::string out;
    out.reserve(64);
    char buf[3];
    for (unsigned char b : bytes) {
      std::snprintf(buf, sizeof buf, "%02x", b);
      out += buf;
    }
    return out;
  }

 private:
  EVP_MD_CTX* ctx_;
};

inline std::string sha256_hex(std::string_view data) { return Sha256().update(data).hex(); }

/// Deterministic fraction in [0, 1) derived from the key.
inline double unit_hash(std::string_view key) {
  const auto bytes = Sha256().update(key).finish();
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | bytes[static_cast<std::size_t>(i)];
  return static_cast<double>(v >> 11) * 0x1.0p-53;
}

}  // namespace judgeharness
