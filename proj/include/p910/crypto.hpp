#pragma once

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "p910/error.hpp"

namespace p910::crypto {

using Digest = std::array<std::uint8_t, 32>;
using Bytes = std::vector<std::uint8_t>;

inline Digest hmac_sha256(std::string_view key, std::span<const std::uint8_t> message) {
  Digest out{};
  unsigned int len = 0;
  const unsigned char* result =
      HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), message.data(), message.size(),
           out.data(), &len);
  if (result == nullptr || len != out.size()) throw Error(ErrorCode::StorageFailure, "HMAC failed");
  return out;
}

inline Digest hmac_sha256(std::string_view key, std::string_view message) {
  return hmac_sha256(key, std::span(reinterpret_cast<const std::uint8_t*>(message.data()),
                                    message.size()));
}

inline std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xf]);
  }
  return out;
}

// Sixteen letters, no digits: numeric answers never appear verbatim in a token.
inline constexpr std::string_view kLetterAlphabet = "abcdefghijklmnop";

inline std::string to_letters(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(kLetterAlphabet[b >> 4]);
    out.push_back(kLetterAlphabet[b & 0xf]);
  }
  return out;
}

inline Bytes from_letters(std::string_view text) {
  if (text.size() % 2 != 0) throw Error(ErrorCode::MalformedToken, "odd token length");
  Bytes out;
  out.reserve(text.size() / 2);
  auto nibble = [](char c) -> int {
    if (c < 'a' || c > 'p') throw Error(ErrorCode::MalformedToken, "invalid token character");
    return c - 'a';
  };
  for (std::size_t i = 0; i < text.size(); i += 2) {
    out.push_back(static_cast<std::uint8_t>((nibble(text[i]) << 4) | nibble(text[i + 1])));
  }
  return out;
}

inline bool constant_time_equal(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  return CRYPTO_memcmp(a.data(), b.data(), a.size()) == 0;
}

}  // namespace p910::crypto
