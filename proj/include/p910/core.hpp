#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "p910/qualification.hpp"

namespace p910 {

inline constexpr int kSchemaVersion = 1;

enum class MethodKind { ACR, ACR_HR, DCR, CCR };

constexpr std::string_view to_string(MethodKind k) {
  switch (k) {
    case MethodKind::ACR: return "ACR";
    case MethodKind::ACR_HR: return "ACR-HR";
    case MethodKind::DCR: return "DCR";
    case MethodKind::CCR: return "CCR";
  }
  return "?";
}

struct RatingRange {
  int lo = 1;
  int hi = 5;
  bool contains(int r) const { return r >= lo && r <= hi; }
};

struct TestMethod {
  MethodKind kind = MethodKind::ACR;
  int scale_points = 5;
  // CCR only. Whether the processed clip may be shown first is not settled
  // by the method itself; randomized unless configured otherwise.
  bool randomize_ccr_order = true;
  bool operator==(const TestMethod&) const = default;

  /// CCR is stored on a centered scale, e.g. -2..+2 for five points.
  RatingRange rating_range() const {
    if (kind == MethodKind::CCR) {
      const int half = (scale_points - 1) / 2;
      return {-half, half};
    }
    return {1, scale_points};
  }
  bool paired() const { return kind == MethodKind::DCR || kind == MethodKind::CCR; }
};

enum class ClipRole { Test, Reference, Gold, Trapping, Training };

constexpr std::string_view to_string(ClipRole r) {
  switch (r) {
    case ClipRole::Test: return "test";
    case ClipRole::Reference: return "reference";
    case ClipRole::Gold: return "gold";
    case ClipRole::Trapping: return "trapping";
    case ClipRole::Training: return "training";
  }
  return "?";
}

struct Clip {
  std::string clip_id;
  std::string url;
  ClipRole role = ClipRole::Test;
  Millis duration_ms = 0;
  std::string source_id;
  std::optional<std::string> hrc_id;
  /// Hidden reference (ACR-HR) or explicit reference (DCR/CCR).
  std::optional<std::string> reference_id;
  /// Gold and trapping clips only.
  std::optional<int> expected_rating;
  /// Accepted distance from expected_rating for gold clips.
  int gold_tolerance = 1;
  /// Training clips: the quality end of the scale this clip anchors.
  std::optional<int> anchor_rating;
  int native_width = 0;
  int native_height = 0;
  bool operator==(const Clip&) const = default;
};

enum class DeviceKind { Mobile, PC };

struct DevicePolicy {
  std::set<DeviceKind> allowed_devices{DeviceKind::PC};
  int min_width = 1280;
  int min_height = 720;
  double min_refresh_hz = 30.0;
  bool operator==(const DevicePolicy&) const = default;
};

/// Answer keys for the screening and setup items. Plate semantics live only
/// in configuration.
struct QualificationAssets {
  IshiharaKey ishihara_key;
  double card_width_mm = kIdCardWidthMm;
  double viewing_distance_cm = kMinViewingDistanceCm;
  double required_acuity = kRequiredAcuity;
  int required_correct = kDefaultRequiredCorrect;
  std::uint64_t matrix1_seed = 1;
  std::uint64_t matrix2_seed = 2;
  /// Side with the undistorted image for each of the three distance pairs.
  std::vector<DistanceAnswer> distance_key{DistanceAnswer::LeftBetter, DistanceAnswer::RightBetter,
                                           DistanceAnswer::LeftBetter};
  int matrix1_retries = 3;
  bool operator==(const QualificationAssets&) const = default;
};

/// Data-cleansing thresholds. Only the playback ratio comes from published
/// measurements; the rest are defaults open to calibration.
struct Thresholds {
  /// Overrides every gold clip's own tolerance when set.
  std::optional<int> gold_tolerance;
  double playback_ratio = 1.15;
  int straightliner_run = 8;
  double low_variance_sd = 0.25;
  /// Make acuity and viewing-distance outcomes blocking.
  bool strict = false;
  bool operator==(const Thresholds&) const = default;
};

struct BonusTier {
  int min_accepted_sessions = 1;
  double amount = 0.0;
  std::string reason;
  bool operator==(const BonusTier&) const = default;
};

struct TrappingMessage {
  int rating = 1;
  std::string text;
  bool operator==(const TrappingMessage&) const = default;
};

struct TestConfig {
  int schema_version = kSchemaVersion;
  std::string test_id;
  TestMethod method;
  std::vector<Clip> clips;
  int session_size = 10;
  int votes_target = 30;
  DevicePolicy device_policy;
  std::vector<std::string> training_clip_ids;
  QualificationAssets qualification_assets;
  int retraining_interval_min = 60;
  int setup_interval_min = 60;
  std::vector<std::string> scale_labels;
  Thresholds thresholds;
  std::vector<BonusTier> bonus_policy;
  /// Source clips for trapping generation plus per-rating message templates.
  std::vector<std::string> trapping_candidate_ids;
  std::vector<TrappingMessage> trapping_messages;
  bool operator==(const TestConfig&) const = default;

  const Clip* find_clip(std::string_view id) const {
    for (const auto& c : clips) {
      if (c.clip_id == id) return &c;
    }
    return nullptr;
  }

  /// Clips that receive votes in the rating section. Hidden references are
  /// rated like any other clip under ACR-HR.
  std::vector<const Clip*> rated_clips() const {
    std::vector<const Clip*> out;
    for (const auto& c : clips) {
      if (c.role == ClipRole::Test ||
          (method.kind == MethodKind::ACR_HR && c.role == ClipRole::Reference)) {
        out.push_back(&c);
      }
    }
    std::sort(out.begin(), out.end(),
              [](const Clip* a, const Clip* b) { return a->clip_id < b->clip_id; });
    return out;
  }

  std::vector<const Clip*> clips_with_role(ClipRole role) const {
    std::vector<const Clip*> out;
    for (const auto& c : clips) {
      if (c.role == role) out.push_back(&c);
    }
    std::sort(out.begin(), out.end(),
              [](const Clip* a, const Clip* b) { return a->clip_id < b->clip_id; });
    return out;
  }
};

struct Vote {
  std::string clip_id;
  int rating = 0;
  int playback_count = 0;
  std::optional<Millis> playback_total_ms;
  Millis cast_at = 0;
  bool operator==(const Vote&) const = default;
};

struct DeviceSnapshot {
  int width = 0;
  int height = 0;
  double refresh_hz_estimate = 0.0;
  std::string user_agent;
  bool operator==(const DeviceSnapshot&) const = default;
};

struct Submission {
  std::string submission_id;
  std::string test_id;
  std::string worker_id;
  std::optional<std::string> assignment_id;
  std::string session_plan_id;
  QualificationRecord qualification;
  SetupRecord setup;
  std::vector<Vote> votes;
  DeviceSnapshot device_snapshot;
  std::string verification_code;
  Millis started_at = 0;
  Millis finished_at = 0;
  bool operator==(const Submission&) const = default;
};

// ---------------------------------------------------------------------------
// Config validation

enum class ConfigErrorKind {
  InvalidScale,
  InvalidSessionSize,
  InvalidVotesTarget,
  InvalidSchemaVersion,
  DuplicateClipId,
  NonPositiveDuration,
  MissingReference,
  UnresolvedReference,
  UnexpectedExpectedRating,
  MissingExpectedRating,
  ExpectedRatingOutOfScale,
  UnknownTrainingClip,
  TrainingRangeNotSpanned,
  ScaleLabelCount,
};

constexpr std::string_view to_string(ConfigErrorKind k) {
  switch (k) {
    case ConfigErrorKind::InvalidScale: return "InvalidScale";
    case ConfigErrorKind::InvalidSessionSize: return "InvalidSessionSize";
    case ConfigErrorKind::InvalidVotesTarget: return "InvalidVotesTarget";
    case ConfigErrorKind::InvalidSchemaVersion: return "InvalidSchemaVersion";
    case ConfigErrorKind::DuplicateClipId: return "DuplicateClipId";
    case ConfigErrorKind::NonPositiveDuration: return "NonPositiveDuration";
    case ConfigErrorKind::MissingReference: return "MissingReference";
    case ConfigErrorKind::UnresolvedReference: return "UnresolvedReference";
    case ConfigErrorKind::UnexpectedExpectedRating: return "UnexpectedExpectedRating";
    case ConfigErrorKind::MissingExpectedRating: return "MissingExpectedRating";
    case ConfigErrorKind::ExpectedRatingOutOfScale: return "ExpectedRatingOutOfScale";
    case ConfigErrorKind::UnknownTrainingClip: return "UnknownTrainingClip";
    case ConfigErrorKind::TrainingRangeNotSpanned: return "TrainingRangeNotSpanned";
    case ConfigErrorKind::ScaleLabelCount: return "ScaleLabelCount";
  }
  return "?";
}

struct ConfigError {
  ConfigErrorKind kind;
  std::string subject;  // clip id, when the error concerns one clip
  auto operator<=>(const ConfigError&) const = default;
};

inline std::string describe(const ConfigError& e) {
  std::string s(to_string(e.kind));
  if (!e.subject.empty()) s += "(" + e.subject + ")";
  return s;
}

/// Returns every violated invariant; empty means the config is usable.
/// The result is sorted, so it does not depend on clip order.
inline std::vector<ConfigError> validate_config(const TestConfig& config) {
  std::vector<ConfigError> errors;
  auto add = [&](ConfigErrorKind k, std::string subject = {}) {
    errors.push_back({k, std::move(subject)});
  };

  if (config.schema_version != kSchemaVersion) add(ConfigErrorKind::InvalidSchemaVersion);
  const int points = config.method.scale_points;
  const bool scale_ok = points == 5 || points == 9;
  if (!scale_ok) add(ConfigErrorKind::InvalidScale);
  if (config.session_size < 1) add(ConfigErrorKind::InvalidSessionSize);
  if (config.votes_target < 1) add(ConfigErrorKind::InvalidVotesTarget);
  if (!config.scale_labels.empty() && static_cast<int>(config.scale_labels.size()) != points) {
    add(ConfigErrorKind::ScaleLabelCount);
  }

  std::map<std::string, int> id_count;
  for (const auto& c : config.clips) ++id_count[c.clip_id];
  for (const auto& [id, n] : id_count) {
    if (n > 1) add(ConfigErrorKind::DuplicateClipId, id);
  }

  const RatingRange range = config.method.rating_range();
  const bool needs_reference = config.method.kind != MethodKind::ACR;
  for (const auto& c : config.clips) {
    if (c.duration_ms <= 0) add(ConfigErrorKind::NonPositiveDuration, c.clip_id);

    const bool scored = c.role == ClipRole::Gold || c.role == ClipRole::Trapping;
    if (scored && !c.expected_rating) add(ConfigErrorKind::MissingExpectedRating, c.clip_id);
    if (!scored && c.expected_rating) add(ConfigErrorKind::UnexpectedExpectedRating, c.clip_id);
    if (c.expected_rating && scale_ok && !range.contains(*c.expected_rating)) {
      add(ConfigErrorKind::ExpectedRatingOutOfScale, c.clip_id);
    }

    if (c.role == ClipRole::Test && needs_reference) {
      if (!c.reference_id) {
        add(ConfigErrorKind::MissingReference, c.clip_id);
      } else {
        const Clip* ref = config.find_clip(*c.reference_id);
        if (ref == nullptr || ref->role != ClipRole::Reference) {
          add(ConfigErrorKind::UnresolvedReference, c.clip_id);
        }
      }
    } else if (c.reference_id && config.find_clip(*c.reference_id) == nullptr) {
      add(ConfigErrorKind::UnresolvedReference, c.clip_id);
    }
  }

  if (!config.training_clip_ids.empty()) {
    bool has_min = false;
    bool has_max = false;
    for (const auto& id : config.training_clip_ids) {
      const Clip* c = config.find_clip(id);
      if (c == nullptr) {
        add(ConfigErrorKind::UnknownTrainingClip, id);
        continue;
      }
      const std::optional<int> anchor = c->anchor_rating ? c->anchor_rating : c->expected_rating;
      if (anchor && *anchor == range.lo) has_min = true;
      if (anchor && *anchor == range.hi) has_max = true;
    }
    if (!has_min || !has_max) add(ConfigErrorKind::TrainingRangeNotSpanned);
  }

  std::sort(errors.begin(), errors.end());
  return errors;
}

}  // namespace p910
