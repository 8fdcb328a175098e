#pragma once

// Shared fixtures: synthetic test configurations and simulated raters that
// produce Submission payloads without a browser.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "p910/core.hpp"
#include "p910/qualification.hpp"
#include "p910/random.hpp"
#include "p910/testprep.hpp"
#include "p910/verification.hpp"

namespace p910::testing {

inline constexpr const char* kSecret = "unit-test-signing-secret";

inline std::string seq_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "seq%03zu", i);
  return buf;
}

struct ConfigShape {
  MethodKind method = MethodKind::ACR;
  std::size_t sequences = 144;
  std::size_t hrcs = 16;
  int session_size = 10;
  int votes_target = 30;
  Millis duration_ms = 8000;
  std::size_t golds = 6;
  std::size_t traps = 6;
};

/// Test clips seq000..; source = i / hrcs, HRC = i % hrcs. Paired methods
/// and ACR-HR get one reference clip per source.
inline TestConfig make_config(const ConfigShape& shape = {}) {
  TestConfig c;
  c.test_id = "t1";
  c.method.kind = shape.method;
  c.session_size = shape.session_size;
  c.votes_target = shape.votes_target;
  const bool refs = shape.method != MethodKind::ACR;
  const std::size_t sources = (shape.sequences + shape.hrcs - 1) / shape.hrcs;
  for (std::size_t s = 0; s < sources && refs; ++s) {
    Clip r;
    r.clip_id = "ref" + std::to_string(s);
    r.url = "clips/" + r.clip_id + ".mp4";
    r.role = ClipRole::Reference;
    r.duration_ms = shape.duration_ms;
    r.source_id = "src" + std::to_string(s);
    r.hrc_id = "REF";
    c.clips.push_back(r);
  }
  for (std::size_t i = 0; i < shape.sequences; ++i) {
    Clip t;
    t.clip_id = seq_id(i);
    t.url = "clips/" + t.clip_id + ".mp4";
    t.role = ClipRole::Test;
    t.duration_ms = shape.duration_ms;
    t.source_id = "src" + std::to_string(i / shape.hrcs);
    t.hrc_id = "hrc" + std::to_string(i % shape.hrcs);
    if (refs) t.reference_id = "ref" + std::to_string(i / shape.hrcs);
    c.clips.push_back(t);
  }
  const RatingRange range = c.method.rating_range();
  for (std::size_t g = 0; g < shape.golds; ++g) {
    Clip gold;
    gold.clip_id = "gold" + std::to_string(g);
    gold.url = "clips/" + gold.clip_id + ".mp4";
    gold.role = ClipRole::Gold;
    gold.duration_ms = shape.duration_ms;
    gold.source_id = "gsrc" + std::to_string(g);
    gold.expected_rating = g % 2 == 0 ? range.hi : range.lo;
    if (refs) gold.reference_id = "ref0";
    c.clips.push_back(gold);
  }
  for (std::size_t k = 0; k < shape.traps; ++k) {
    Clip trap;
    trap.clip_id = "trap" + std::to_string(k);
    trap.url = "clips/" + trap.clip_id + ".mp4";
    trap.role = ClipRole::Trapping;
    trap.duration_ms = shape.duration_ms;
    trap.source_id = "tsrc" + std::to_string(k);
    trap.expected_rating = range.lo + static_cast<int>(k % static_cast<std::size_t>(range.hi - range.lo + 1));
    if (refs) trap.reference_id = "ref0";
    c.clips.push_back(trap);
  }
  for (int r = range.lo; r <= range.hi; ++r) {
    Clip tr;
    tr.clip_id = "train" + std::to_string(r - range.lo);
    tr.url = "clips/" + tr.clip_id + ".mp4";
    tr.role = ClipRole::Training;
    tr.duration_ms = shape.duration_ms;
    tr.source_id = "trsrc";
    tr.anchor_rating = r;
    if (refs) tr.reference_id = "ref0";
    c.clips.push_back(tr);
    c.training_clip_ids.push_back(tr.clip_id);
  }
  c.qualification_assets.ishihara_key = {{"plate3", "6"}, {"plate4", "73"}};
  c.bonus_policy = {{1, 0.10, "completed one accepted session"}, {3, 0.50, "three or more accepted sessions"}};
  c.trapping_messages = {{2, "Attention check: please select the answer {rating} for this clip."}};
  c.trapping_candidate_ids = {seq_id(0), seq_id(1)};
  return c;
}

/// Qualification and setup answers that pass every check.
inline QualificationRecord honest_qualification(const TestConfig& c) {
  QualificationRecord q;
  for (const auto& [plate, value] : c.qualification_assets.ishihara_key) q.ishihara_answers.push_back({plate, value});
  q.acuity.adjusted_card_width_px = 323.5;
  q.acuity.pixel_pitch_mm = pixel_pitch_from_card(q.acuity.adjusted_card_width_px);
  const auto g = landolt_geometry(q.acuity.pixel_pitch_mm, c.qualification_assets.viewing_distance_cm,
                                  c.qualification_assets.required_acuity);
  const Direction dirs[] = {Direction::N, Direction::E, Direction::S, Direction::W, Direction::NE};
  for (Direction d : dirs) q.acuity.ring_trials.push_back({d, d, g.gap_px, g.diameter_px});
  return q;
}

inline SetupRecord honest_setup(const TestConfig& c) {
  const auto& a = c.qualification_assets;
  SetupRecord s;
  s.matrix1.truth = generate_matrix(a.matrix1_seed).truth_counts;
  s.matrix1.reported = s.matrix1.truth;
  s.matrix2.truth = generate_matrix(a.matrix2_seed).truth_counts;
  s.matrix2.reported = s.matrix2.truth;
  // Expected distance: the first pair looks identical, the others are seen.
  s.distance_answers = {DistanceAnswer::Same, a.distance_key[1], a.distance_key[2]};
  s.distance_class = DistanceClass::Expected;
  return s;
}

inline int clamp_rating(double v, RatingRange r) {
  return std::clamp(static_cast<int>(std::lround(v)), r.lo, r.hi);
}

enum class Behavior { Reliable, RandomClicker, Straightliner, GoldViolator, InflatedPlayback };

/// Builds the submission a rater of the given behavior would send for `plan`.
/// `truth` holds the latent quality of every rated clip.
inline Submission simulate_submission(const TestConfig& c, const SessionPlan& plan, const std::string& worker,
                                      const std::map<std::string, double>& truth, Behavior behavior, Rng& rng,
                                      double sigma = 0.8, Millis start = 1'700'000'000'000) {
  const RatingRange range = c.method.rating_range();
  Submission s;
  s.test_id = c.test_id;
  s.worker_id = worker;
  s.assignment_id = "A-" + plan.session_plan_id + "-" + worker;
  s.session_plan_id = plan.session_plan_id;
  s.submission_id = plan.session_plan_id + ":" + worker;
  s.qualification = honest_qualification(c);
  s.setup = honest_setup(c);
  s.device_snapshot = {1920, 1080, 60.0, "Mozilla/5.0 (X11; Linux x86_64)"};
  s.started_at = start;

  const int flat = rng.between(range.lo, range.hi);
  Millis t = start + 120'000;
  for (const auto& item : plan.ordered_items) {
    const Clip& clip = *c.find_clip(item.clip_id);
    Vote v;
    v.clip_id = clip.clip_id;
    double latent = 0.0;
    if (clip.expected_rating) {
      latent = *clip.expected_rating;
    } else {
      latent = truth.at(clip.clip_id);
    }
    switch (behavior) {
      case Behavior::Reliable:
      case Behavior::InflatedPlayback:
        v.rating = clip.role == ClipRole::Trapping ? *clip.expected_rating
                                                   : clamp_rating(latent + sigma * rng.normal(), range);
        break;
      case Behavior::RandomClicker: v.rating = rng.between(range.lo, range.hi); break;
      case Behavior::Straightliner: v.rating = flat; break;
      case Behavior::GoldViolator:
        if (clip.role == ClipRole::Gold) {
          v.rating = *clip.expected_rating == range.hi ? range.lo : range.hi;
        } else if (clip.role == ClipRole::Trapping) {
          v.rating = *clip.expected_rating;
        } else {
          v.rating = clamp_rating(latent + sigma * rng.normal(), range);
        }
        break;
    }
    Millis nominal = clip.duration_ms;
    if (c.method.paired() && clip.reference_id) nominal += c.find_clip(*clip.reference_id)->duration_ms;
    v.playback_count = 1;
    v.playback_total_ms = nominal + rng.between(0, 150);
    if (behavior == Behavior::InflatedPlayback) {
      v.playback_count = 2;
      v.playback_total_ms = 2 * nominal + rng.between(0, 150);
    }
    t += *v.playback_total_ms + 3000;
    v.cast_at = t;
    s.votes.push_back(v);
  }
  s.finished_at = t;
  s.verification_code = issue_verification_code(s.submission_id, kSecret);
  return s;
}

/// Latent quality per rated clip, uniform on the scale.
inline std::map<std::string, double> random_truth(const TestConfig& c, std::uint64_t seed) {
  Rng rng(seed);
  const RatingRange r = c.method.rating_range();
  std::map<std::string, double> out;
  for (const Clip* clip : c.rated_clips()) out[clip->clip_id] = r.lo + (r.hi - r.lo) * rng.unit();
  return out;
}

struct Population {
  TestConfig config;
  std::vector<Submission> subs;
};

/// Mixed behaviours plus random damage that individual checks must catch.
inline Population random_population(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  Population p;
  p.config = make_config({MethodKind::ACR, 24, 4, 8, 3, 8000, 3, 3});
  const auto plans = plan_sessions(p.config, seed);
  const auto truth = random_truth(p.config, seed + 1);
  const Behavior kinds[] = {Behavior::Reliable, Behavior::Reliable, Behavior::Reliable, Behavior::RandomClicker,
                            Behavior::Straightliner, Behavior::GoldViolator, Behavior::InflatedPlayback};
  for (std::size_t i = 0; i < n; ++i) {
    const auto& plan = plans[rng.below(plans.size())];
    auto s = simulate_submission(p.config, plan, "w" + std::to_string(i), truth, kinds[rng.below(7)], rng,
                                 0.3 + rng.unit());
    switch (rng.below(8)) {
      case 0: s.verification_code[3] = s.verification_code[3] == 'a' ? 'b' : 'a'; break;
      case 1: s.votes[rng.below(s.votes.size())].playback_total_ms = std::nullopt; break;
      case 2: s.setup.matrix2.reported.circles += 1; break;
      case 3: s.setup.distance_answers[1] = DistanceAnswer::Same; break;
      case 4:
        for (std::size_t k = 0; k < 3; ++k) s.qualification.acuity.ring_trials[k].gap_direction_reported = Direction::SW;
        break;
      default: break;
    }
    p.subs.push_back(std::move(s));
  }
  return p;
}

/// Fresh path under the build tree's temp area.
inline std::filesystem::path temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "p910-tests";
  std::filesystem::create_directories(dir);
  auto p = dir / name;
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace p910::testing
