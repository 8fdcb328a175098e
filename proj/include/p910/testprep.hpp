#pragma once

// Offline test preparation: trapping-clip manifests, per-session playlists
// with embedded gold/trapping items, answer-key obfuscation for the client
// bundle and the crowdsourcing-platform batch file.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "p910/core.hpp"
#include "p910/crypto.hpp"
#include "p910/csv.hpp"
#include "p910/error.hpp"
#include "p910/random.hpp"
#include "p910/serialization.hpp"

namespace p910 {

// ---------------------------------------------------------------------------
// Trapping clips

struct TrappingManifest {
  std::string source_clip_id;
  Millis insert_at_ms = 0;
  Millis display_ms = 0;
  std::string message_text;
  int expected_rating = 0;
  std::string output_clip_id;
  /// External transcoder invocation with {input}/{output} placeholders.
  std::string command_template;
  bool operator==(const TrappingManifest&) const = default;
};

/// How long the instruction stays on screen (capped by the clip end).
inline constexpr Millis kTrappingDisplayMs = 3000;

inline std::string render_message(std::string text, int rating) {
  static constexpr std::string_view kPlaceholder = "{rating}";
  for (auto pos = text.find(kPlaceholder); pos != std::string::npos; pos = text.find(kPlaceholder)) {
    text.replace(pos, kPlaceholder.size(), std::to_string(rating));
  }
  return text;
}

namespace detail {

inline std::string drawtext_escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    if (c == '\'' || c == ':' || c == '\\' || c == '%' || c == ',') out += '\\';
    out += c;
  }
  return out;
}

inline std::string seconds(Millis ms) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%lld.%03lld", static_cast<long long>(ms / 1000),
                static_cast<long long>(ms % 1000));
  return buf;
}

inline std::string rating_tag(int rating) {
  return rating < 0 ? "m" + std::to_string(-rating) : std::to_string(rating);
}

}  // namespace detail

/// Command template mirroring the re-encoding recipe (H.264, CRF 17, one
/// second GOP at 24 fps) with a centered text overlay.
inline std::string transcoder_command(const TrappingManifest& m) {
  return "ffmpeg -i {input} -y -vf \"drawtext=text='" + detail::drawtext_escape(m.message_text) +
         "':fontcolor=white:fontsize=h/14:box=1:boxcolor=black@0.85:boxborderw=20"
         ":x=(w-text_w)/2:y=(h-text_h)/2:enable='between(t\\," +
         detail::seconds(m.insert_at_ms) + "\\," + detail::seconds(m.insert_at_ms + m.display_ms) +
         ")'\" -preset veryslow -keyint_min 2 -g 24 -sc_threshold 0 -c:v libx264 -pix_fmt yuv420p "
         "-crf 17 {output}";
}

/// One manifest per candidate. The message lands at the temporal midpoint
/// +-10% of the midpoint and the required rating is drawn from the configured templates.
inline std::vector<TrappingManifest> build_trapping_manifests(const std::vector<Clip>& candidates,
                                                              const std::vector<TrappingMessage>& messages,
                                                              RatingRange range, std::uint64_t seed) {
  if (candidates.empty()) throw Error(ErrorCode::NoCandidates);
  if (messages.empty()) throw Error(ErrorCode::NoMessages);
  for (const auto& msg : messages) {
    if (!range.contains(msg.rating)) {
      throw Error(ErrorCode::ConfigInvalid, "trapping rating " + std::to_string(msg.rating) + " outside scale");
    }
  }

  std::vector<TrappingManifest> out;
  out.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const Clip& clip = candidates[i];
    if (clip.duration_ms < 20) {
      throw Error(ErrorCode::ConfigInvalid, "clip too short for trapping: " + clip.clip_id);
    }
    Rng rng(derive_seed(seed, i));
    const TrappingMessage& msg = messages[rng.below(messages.size())];
    const Millis mid = clip.duration_ms / 2;
    const Millis spread = mid / 10;

    TrappingManifest m;
    m.source_clip_id = clip.clip_id;
    m.insert_at_ms = mid + rng.between(-spread, spread);
    m.display_ms = std::min(kTrappingDisplayMs, clip.duration_ms - m.insert_at_ms);
    m.expected_rating = msg.rating;
    m.message_text = render_message(msg.text, msg.rating);
    m.output_clip_id = clip.clip_id + "_trap_" + detail::rating_tag(msg.rating);
    m.command_template = transcoder_command(m);
    out.push_back(std::move(m));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Session plans

struct PlanItem {
  std::string clip_id;
  ClipRole role = ClipRole::Test;
  int position = 0;
  /// DCR/CCR: the explicit reference shown with this clip.
  std::optional<std::string> reference_clip_id;
  /// CCR: whether the reference plays first in this trial.
  bool reference_first = true;
  bool operator==(const PlanItem&) const = default;
};

struct SessionPlan {
  std::string session_plan_id;
  std::string created_for_config;
  std::uint64_t rng_seed = 0;
  std::vector<PlanItem> ordered_items;
  bool operator==(const SessionPlan&) const = default;

  const PlanItem* item_with_role(ClipRole role) const {
    for (const auto& it : ordered_items) {
      if (it.role == role) return &it;
    }
    return nullptr;
  }
};

inline std::string plan_id(const std::string& test_id, std::size_t index) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%05zu", index);
  return test_id + "-s" + buf;
}

namespace detail {

// Reorders `seq` so that every consecutive block of `block` entries holds
// distinct values. Only swaps, so the multiset of appearances is unchanged.
inline bool spread_duplicates(std::vector<std::size_t>& seq, std::size_t block) {
  const std::size_t blocks = seq.size() / block;
  auto block_has = [&](std::size_t b, std::size_t value, std::size_t skip) {
    for (std::size_t i = b * block; i < (b + 1) * block; ++i) {
      if (i != skip && seq[i] == value) return true;
    }
    return false;
  };
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t begin = b * block;
    const std::size_t end = begin + block;
    std::set<std::size_t> present;
    for (std::size_t j = begin; j < end; ++j) {
      if (present.insert(seq[j]).second) continue;
      bool fixed = false;
      for (std::size_t k = end; k < seq.size() && !fixed; ++k) {
        if (present.count(seq[k]) == 0) {
          std::swap(seq[j], seq[k]);
          fixed = true;
        }
      }
      // Tail block: trade with an earlier block that lacks the duplicate.
      for (std::size_t k = 0; k < begin && !fixed; ++k) {
        if (present.count(seq[k]) == 0 && !block_has(k / block, seq[j], k) &&
            !std::any_of(seq.begin() + static_cast<std::ptrdiff_t>(j + 1),
                         seq.begin() + static_cast<std::ptrdiff_t>(end),
                         [&](std::size_t v) { return v == seq[k]; })) {
          std::swap(seq[j], seq[k]);
          fixed = true;
        }
      }
      if (!fixed) return false;
      present.insert(seq[j]);
    }
  }
  return true;
}

}  // namespace detail

/// Partitions the rated clips into sessions so every clip is planned
/// votes_target times (one extra for some clips when the total does not
/// divide evenly), then inserts one gold and one trapping clip per session.
inline std::vector<SessionPlan> plan_sessions(const TestConfig& config, std::uint64_t seed) {
  const auto errors = validate_config(config);
  if (!errors.empty()) throw Error(ErrorCode::ConfigInvalid, describe(errors.front()));

  const auto rated = config.rated_clips();
  const auto golds = config.clips_with_role(ClipRole::Gold);
  const auto traps = config.clips_with_role(ClipRole::Trapping);
  const auto block = static_cast<std::size_t>(config.session_size);
  if (rated.size() < block) {
    throw Error(ErrorCode::InsufficientClips,
                std::to_string(rated.size()) + " rated clips for session size " + std::to_string(block));
  }
  if (golds.empty() || traps.empty()) throw Error(ErrorCode::InsufficientGoldOrTrapping);

  Rng rng(seed);
  const std::size_t m = rated.size();
  const std::size_t total = m * static_cast<std::size_t>(config.votes_target);
  const std::size_t plans = (total + block - 1) / block;
  std::vector<std::size_t> seq;
  seq.reserve(plans * block);
  std::vector<std::size_t> perm(m);
  while (seq.size() < plans * block) {
    for (std::size_t i = 0; i < m; ++i) perm[i] = i;
    rng.shuffle(perm);
    const std::size_t take = std::min(m, plans * block - seq.size());
    seq.insert(seq.end(), perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(take));
  }
  if (!detail::spread_duplicates(seq, block)) throw Error(ErrorCode::InsufficientClips, "cannot balance plans");

  auto make_item = [&](const Clip& clip, ClipRole role) {
    PlanItem item;
    item.clip_id = clip.clip_id;
    item.role = role;
    if (config.method.paired() && clip.reference_id) item.reference_clip_id = clip.reference_id;
    return item;
  };

  std::vector<SessionPlan> out;
  out.reserve(plans);
  for (std::size_t p = 0; p < plans; ++p) {
    SessionPlan plan;
    plan.session_plan_id = plan_id(config.test_id, p);
    plan.created_for_config = config.test_id;
    plan.rng_seed = derive_seed(seed, p, 1);
    Rng plan_rng(plan.rng_seed);

    std::vector<PlanItem> tests;
    for (std::size_t i = p * block; i < (p + 1) * block; ++i) {
      tests.push_back(make_item(*rated[seq[i]], rated[seq[i]]->role));
    }
    // Position 0 is always a rated clip; the rest is a uniform shuffle.
    const std::size_t lead = plan_rng.below(tests.size());
    std::swap(tests[0], tests[lead]);
    std::vector<PlanItem> rest(tests.begin() + 1, tests.end());
    rest.push_back(make_item(*golds[p % golds.size()], ClipRole::Gold));
    rest.push_back(make_item(*traps[p % traps.size()], ClipRole::Trapping));
    plan_rng.shuffle(rest);

    plan.ordered_items.push_back(tests[0]);
    plan.ordered_items.insert(plan.ordered_items.end(), rest.begin(), rest.end());
    for (std::size_t pos = 0; pos < plan.ordered_items.size(); ++pos) {
      auto& item = plan.ordered_items[pos];
      item.position = static_cast<int>(pos);
      if (config.method.kind == MethodKind::CCR && config.method.randomize_ccr_order) {
        item.reference_first = plan_rng.coin();
      }
    }
    out.push_back(std::move(plan));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Answer-key obfuscation

namespace detail {

inline constexpr std::size_t kNonceBytes = 16;
inline constexpr std::size_t kTagBytes = 16;

inline crypto::Bytes keystream(std::string_view secret, std::span<const std::uint8_t> nonce, std::size_t n) {
  crypto::Bytes out;
  out.reserve(n + 32);
  for (std::uint32_t counter = 0; out.size() < n; ++counter) {
    crypto::Bytes block{'k', 's'};
    block.insert(block.end(), nonce.begin(), nonce.end());
    for (int s = 24; s >= 0; s -= 8) block.push_back(static_cast<std::uint8_t>(counter >> s));
    const auto d = crypto::hmac_sha256(secret, block);
    out.insert(out.end(), d.begin(), d.end());
  }
  out.resize(n);
  return out;
}

inline crypto::Digest token_tag(std::string_view secret, std::span<const std::uint8_t> nonce_and_ct) {
  crypto::Bytes msg{'t', 'a', 'g'};
  msg.insert(msg.end(), nonce_and_ct.begin(), nonce_and_ct.end());
  return crypto::hmac_sha256(secret, msg);
}

}  // namespace detail

/// Hides answer keys shipped to the browser so they are not readable in page
/// source. This is obfuscation for online feedback only: every check is
/// re-evaluated on the server during post-processing.
///
/// Token layout (letter-encoded): nonce(16) | plaintext XOR keystream | tag(16).
/// The nonce is derived from the plaintext so equal inputs give equal tokens.
inline std::string obfuscate_answer_key(std::string_view truth, std::string_view secret) {
  if (secret.empty()) throw Error(ErrorCode::EmptySecret);
  const auto nonce_digest = crypto::hmac_sha256(secret, "nonce:" + std::string(truth));
  crypto::Bytes token(nonce_digest.begin(), nonce_digest.begin() + detail::kNonceBytes);
  const auto ks = detail::keystream(secret, std::span(token.data(), detail::kNonceBytes), truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    token.push_back(static_cast<std::uint8_t>(truth[i]) ^ ks[i]);
  }
  const auto tag = detail::token_tag(secret, token);
  token.insert(token.end(), tag.begin(), tag.begin() + detail::kTagBytes);
  return crypto::to_letters(token);
}

inline std::string deobfuscate_answer_key(std::string_view token, std::string_view secret) {
  if (secret.empty()) throw Error(ErrorCode::EmptySecret);
  const crypto::Bytes raw = crypto::from_letters(token);
  if (raw.size() < detail::kNonceBytes + detail::kTagBytes) {
    throw Error(ErrorCode::MalformedToken, "token too short");
  }
  const std::size_t body = raw.size() - detail::kTagBytes;
  const auto tag = detail::token_tag(secret, std::span(raw.data(), body));
  if (CRYPTO_memcmp(tag.data(), raw.data() + body, detail::kTagBytes) != 0) {
    throw Error(ErrorCode::MalformedToken, "tag mismatch");
  }
  const std::size_t n = body - detail::kNonceBytes;
  const auto ks = detail::keystream(secret, std::span(raw.data(), detail::kNonceBytes), n);
  std::string out(n, '\0');
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<char>(raw[detail::kNonceBytes + i] ^ ks[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Platform batch

struct PlatformBatch {
  std::string csv;
  std::string description;
};

inline std::string percent_encode(std::string_view s) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out += static_cast<char>(c);
    } else {
      out += '%';
      out += kHex[c >> 4];
      out += kHex[c & 0xf];
    }
  }
  return out;
}

inline std::string percent_decode(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && i + 2 < s.size()) {
      out += static_cast<char>(std::stoi(std::string(s.substr(i + 1, 2)), nullptr, 16));
      i += 2;
    } else if (s[i] == '+') {
      out += ' ';
    } else {
      out += s[i];
    }
  }
  return out;
}

inline std::string session_url(std::string_view base_url, std::string_view plan_id) {
  const char sep = base_url.find('?') == std::string_view::npos ? '?' : '&';
  return std::string(base_url) + sep + "plan=" + percent_encode(plan_id);
}

/// Plan id embedded in a session URL, if any.
inline std::optional<std::string> plan_from_url(std::string_view url) {
  const auto q = url.find('?');
  if (q == std::string_view::npos) return std::nullopt;
  std::string_view query = url.substr(q + 1);
  while (!query.empty()) {
    const auto amp = query.find('&');
    const std::string_view pair = query.substr(0, amp);
    if (pair.substr(0, 5) == "plan=") return percent_decode(pair.substr(5));
    if (amp == std::string_view::npos) break;
    query = query.substr(amp + 1);
  }
  return std::nullopt;
}

inline PlatformBatch export_platform_batch(const std::vector<SessionPlan>& plans, std::string_view base_url,
                                           std::string_view test_id = "") {
  if (plans.empty()) throw Error(ErrorCode::EmptyPlanSet);
  PlatformBatch batch;
  batch.csv = csv::format_row({"session_url"});
  for (const auto& plan : plans) batch.csv += csv::format_row({session_url(base_url, plan.session_plan_id)});

  Json d;
  d["schema_version"] = kSchemaVersion;
  d["test_id"] = std::string(test_id);
  d["title"] = "Rate the quality of short video clips";
  d["description"] =
      "Watch short video clips in full screen and rate their quality. The task starts with a short "
      "screening of your vision and your display setup. Use a PC or laptop, sit 50 to 75 cm from the "
      "screen, and do not take part if you have a color vision deficiency.";
  d["keywords"] = {"video", "quality", "rating", "perception"};
  d["question_type"] = "external";
  d["url_column"] = "session_url";
  d["assignments"] = plans.size();
  batch.description = dump(d);
  return batch;
}

// ---------------------------------------------------------------------------
// JSON for plans and manifests

inline void to_json(Json& j, const PlanItem& it) {
  j = Json{{"clip_id", it.clip_id}, {"role", it.role}, {"position", it.position}};
  detail::put_opt(j, "reference_clip_id", it.reference_clip_id);
  if (it.reference_clip_id) j["reference_first"] = it.reference_first;
}
inline void from_json(const Json& j, PlanItem& it) {
  j.at("clip_id").get_to(it.clip_id);
  j.at("role").get_to(it.role);
  j.at("position").get_to(it.position);
  detail::get_opt(j, "reference_clip_id", it.reference_clip_id);
  it.reference_first = true;
  detail::get_or(j, "reference_first", it.reference_first);
}

inline void to_json(Json& j, const SessionPlan& p) {
  j = Json{{"session_plan_id", p.session_plan_id},
           {"created_for_config", p.created_for_config},
           {"rng_seed", p.rng_seed},
           {"ordered_items", p.ordered_items}};
}
inline void from_json(const Json& j, SessionPlan& p) {
  j.at("session_plan_id").get_to(p.session_plan_id);
  j.at("created_for_config").get_to(p.created_for_config);
  j.at("rng_seed").get_to(p.rng_seed);
  j.at("ordered_items").get_to(p.ordered_items);
}

inline void to_json(Json& j, const TrappingManifest& m) {
  j = Json{{"source_clip_id", m.source_clip_id},
           {"insert_at_ms", m.insert_at_ms},
           {"display_ms", m.display_ms},
           {"message_text", m.message_text},
           {"expected_rating", m.expected_rating},
           {"output_clip_id", m.output_clip_id},
           {"command_template", m.command_template}};
}
inline void from_json(const Json& j, TrappingManifest& m) {
  j.at("source_clip_id").get_to(m.source_clip_id);
  j.at("insert_at_ms").get_to(m.insert_at_ms);
  detail::get_or(j, "display_ms", m.display_ms);
  j.at("message_text").get_to(m.message_text);
  j.at("expected_rating").get_to(m.expected_rating);
  j.at("output_clip_id").get_to(m.output_clip_id);
  detail::get_or(j, "command_template", m.command_template);
}

inline Json plan_set_json(const std::string& test_id, std::uint64_t seed, const std::vector<SessionPlan>& plans) {
  return Json{{"schema_version", kSchemaVersion}, {"test_id", test_id}, {"seed", seed}, {"plans", plans}};
}

inline std::vector<SessionPlan> load_plan_set(const std::string& path) {
  const Json j = parse_json(read_text_file(path), path);
  try {
    return j.at("plans").get<std::vector<SessionPlan>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedInput, path + ": " + e.what());
  }
}

}  // namespace p910
