#pragma once

#include <string>
#include <string_view>

#include "p910/crypto.hpp"
#include "p910/error.hpp"

namespace p910 {

/// Printable code length: 24 hex digits, 96 bits of MAC.
inline constexpr std::size_t kVerificationCodeChars = 24;

/// Keyed MAC over the submission id. Any holder of the signing secret can
/// check a code offline.
inline std::string issue_verification_code(std::string_view submission_id, std::string_view secret) {
  if (secret.empty()) throw Error(ErrorCode::EmptySecret);
  const auto mac = crypto::hmac_sha256(secret, "verification:" + std::string(submission_id));
  return crypto::to_hex(mac).substr(0, kVerificationCodeChars);
}

inline bool verify_code(std::string_view code, std::string_view submission_id, std::string_view secret) {
  if (code.size() != kVerificationCodeChars || secret.empty()) return false;
  return crypto::constant_time_equal(code, issue_verification_code(submission_id, secret));
}

}  // namespace p910
