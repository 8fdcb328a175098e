#pragma once

// Post-processing quality control: every submission is checked against each
// criterion independently and the outcomes are kept per criterion so
// ablation reports can group submissions by what they failed.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "p910/core.hpp"
#include "p910/csv.hpp"
#include "p910/error.hpp"
#include "p910/qualification.hpp"
#include "p910/stats.hpp"
#include "p910/verification.hpp"

namespace p910 {

enum class Check {
  Gold,
  Trapping,
  PlaybackDuration,
  BrightnessMatrix2,
  LowVariance,
  Straightliner,
  VerificationCode,
  QualificationReplay,
  SetupReplay,
};

inline constexpr std::array kAllChecks = {
    Check::Gold,          Check::Trapping,         Check::PlaybackDuration,
    Check::BrightnessMatrix2, Check::LowVariance,  Check::Straightliner,
    Check::VerificationCode, Check::QualificationReplay, Check::SetupReplay,
};

constexpr std::string_view to_string(Check c) {
  switch (c) {
    case Check::Gold: return "gold";
    case Check::Trapping: return "trapping";
    case Check::PlaybackDuration: return "playback_duration";
    case Check::BrightnessMatrix2: return "brightness_matrix2";
    case Check::LowVariance: return "low_variance";
    case Check::Straightliner: return "straightliner";
    case Check::VerificationCode: return "verification_code";
    case Check::QualificationReplay: return "qualification_replay";
    case Check::SetupReplay: return "setup_replay";
  }
  return "?";
}

struct CheckResult {
  bool pass = true;
  std::string detail;
  /// Failure caused by missing client telemetry rather than rater behaviour.
  bool soft = false;
};

struct Verdict {
  std::string submission_id;
  std::string worker_id;
  std::optional<std::string> assignment_id;
  std::map<Check, CheckResult> checks;
  bool accepted = false;
  // Recorded for ablation grouping; blocking only in strict mode.
  bool acuity_passed = false;
  DistanceClass distance_class = DistanceClass::Unknown;

  bool failed(Check c) const {
    auto it = checks.find(c);
    return it != checks.end() && !it->second.pass;
  }
  std::vector<Check> failures() const {
    std::vector<Check> out;
    for (const auto& [c, r] : checks) {
      if (!r.pass) out.push_back(c);
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// Individual checks

namespace detail {

inline const Vote& single_vote_for(const std::vector<Vote>& votes, const Clip& clip, ErrorCode missing) {
  const Vote* found = nullptr;
  for (const auto& v : votes) {
    if (v.clip_id != clip.clip_id) continue;
    if (found != nullptr) throw Error(missing, "more than one vote for " + clip.clip_id);
    found = &v;
  }
  if (found == nullptr) throw Error(missing, clip.clip_id);
  return *found;
}

}  // namespace detail

inline bool check_gold(const std::vector<Vote>& votes, const Clip& gold_clip,
                       std::optional<int> tolerance_override = std::nullopt) {
  const Vote& v = detail::single_vote_for(votes, gold_clip, ErrorCode::MissingGoldVote);
  const int tolerance = tolerance_override.value_or(gold_clip.gold_tolerance);
  return std::abs(v.rating - gold_clip.expected_rating.value_or(v.rating)) <= tolerance;
}

/// The trapping message names one score, so there is no tolerance.
inline bool check_trapping(const std::vector<Vote>& votes, const Clip& trapping_clip) {
  const Vote& v = detail::single_vote_for(votes, trapping_clip, ErrorCode::MissingTrappingVote);
  return trapping_clip.expected_rating && v.rating == *trapping_clip.expected_rating;
}

struct PlaybackOutcome {
  bool pass = true;
  double ratio = 0.0;
  std::vector<std::string> not_fully_watched;
};

/// Nominal playback of one trial. Paired methods play reference and
/// processed clip; the gray interstitial is not counted.
inline Millis nominal_duration(const Clip& clip, const TestConfig& config) {
  Millis d = clip.duration_ms;
  if (config.method.paired() && clip.reference_id) {
    if (const Clip* ref = config.find_clip(*clip.reference_id)) d += ref->duration_ms;
  }
  return d;
}

/// Fails when the session's total playback exceeds `max_ratio` times the
/// nominal duration, or when any clip was not watched to the end.
inline PlaybackOutcome check_playback(const std::vector<Vote>& votes, const TestConfig& config,
                                      double max_ratio = 1.15) {
  PlaybackOutcome out;
  Millis played = 0;
  Millis nominal = 0;
  for (const auto& v : votes) {
    if (!v.playback_total_ms) throw Error(ErrorCode::MissingTelemetry, v.clip_id);
    const Clip* clip = config.find_clip(v.clip_id);
    if (clip == nullptr) throw Error(ErrorCode::ConfigMismatch, "unknown clip " + v.clip_id);
    const Millis expected = nominal_duration(*clip, config);
    played += *v.playback_total_ms;
    nominal += expected;
    if (*v.playback_total_ms < expected || v.playback_count < 1) out.not_fully_watched.push_back(v.clip_id);
  }
  out.ratio = nominal > 0 ? static_cast<double>(played) / static_cast<double>(nominal) : 0.0;
  out.pass = out.not_fully_watched.empty() && static_cast<double>(played) <= max_ratio * static_cast<double>(nominal);
  return out;
}

struct VarianceOutcome {
  bool low_variance_pass = true;
  bool straightliner_pass = true;
  double test_sd = 0.0;
  int longest_run = 0;
};

inline int longest_identical_run(const std::vector<int>& ratings) {
  int best = 0;
  int run = 0;
  for (std::size_t i = 0; i < ratings.size(); ++i) {
    run = (i > 0 && ratings[i] == ratings[i - 1]) ? run + 1 : 1;
    best = std::max(best, run);
  }
  return best;
}

/// `test_ratings` are the rated clips only; `session_ratings` are all items
/// (test, gold, trapping) in presentation order.
inline VarianceOutcome check_variance(const std::vector<int>& test_ratings, const std::vector<int>& session_ratings,
                                      int straightliner_run = 8, double min_sd = 0.25) {
  if (test_ratings.size() < 2) throw Error(ErrorCode::TooFewVotes, std::to_string(test_ratings.size()));
  VarianceOutcome out;
  const std::vector<double> xs(test_ratings.begin(), test_ratings.end());
  out.test_sd = stats::stddev(xs);
  out.low_variance_pass = !(out.test_sd < min_sd);
  const auto& seq = session_ratings.empty() ? test_ratings : session_ratings;
  out.longest_run = longest_identical_run(seq);
  const bool all_same = std::all_of(seq.begin(), seq.end(), [&](int r) { return r == seq.front(); });
  out.straightliner_pass = !all_same && out.longest_run < straightliner_run;
  return out;
}

inline bool check_code(std::string_view submitted_code, std::string_view submission_id, std::string_view secret) {
  return verify_code(submitted_code, submission_id, secret);
}

struct ReplayOutcome {
  bool ishihara_pass = false;
  bool acuity_pass = false;
  bool matrix2_pass = false;
  DistanceClass distance_class = DistanceClass::Unknown;
  bool qualification_pass = false;
  bool setup_pass = false;
};

/// Authoritative server-side re-run of every screening and setup item.
/// Matrix 2 truth comes from the configured seed, never from the client.
inline ReplayOutcome replay_qualification_and_setup(const Submission& s, const TestConfig& config,
                                                    bool strict = false) {
  const auto& assets = config.qualification_assets;
  if (s.qualification.ishihara_answers.empty()) throw Error(ErrorCode::MissingAnswers, "ishihara");
  if (s.qualification.acuity.ring_trials.empty()) throw Error(ErrorCode::MissingAnswers, "acuity");
  if (s.setup.distance_answers.size() != 3) throw Error(ErrorCode::MissingAnswers, "viewing distance");

  ReplayOutcome r;
  r.ishihara_pass = evaluate_ishihara(s.qualification.ishihara_answers, assets.ishihara_key);
  r.acuity_pass = s.qualification.acuity.pixel_pitch_mm > 0.0 &&
                  s.qualification.acuity.ring_trials.size() <= static_cast<std::size_t>(kMaxLandoltTrials) &&
                  evaluate_acuity(s.qualification.acuity.ring_trials, assets.required_correct);
  const ShapeCounts truth = generate_matrix(assets.matrix2_seed).truth_counts;
  r.matrix2_pass = score_matrix(s.setup.matrix2.reported, truth);
  r.distance_class = classify_viewing_distance(s.setup.distance_answers, assets.distance_key);
  r.qualification_pass = r.ishihara_pass && (!strict || r.acuity_pass);
  r.setup_pass = !strict || r.distance_class == DistanceClass::Expected;
  return r;
}

// ---------------------------------------------------------------------------
// Whole-population cleansing

struct CleansingSummary {
  std::size_t total = 0;
  std::size_t accepted = 0;
  double pass_rate = 0.0;
  std::map<Check, std::size_t> failures;
};

struct CleansingResult {
  std::vector<Verdict> verdicts;  // sorted by submission_id
  CleansingSummary summary;
};

namespace detail {

template <class F>
CheckResult guarded(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    CheckResult r;
    r.pass = false;
    r.detail = e.what();
    r.soft = e.code() == ErrorCode::MissingTelemetry;
    return r;
  }
}

inline CheckResult outcome(bool pass, std::string detail = {}) { return CheckResult{pass, std::move(detail), false}; }

}  // namespace detail

inline Verdict evaluate_submission(const Submission& s, const TestConfig& config, std::string_view secret) {
  const Thresholds& th = config.thresholds;
  Verdict v;
  v.submission_id = s.submission_id;
  v.worker_id = s.worker_id;
  v.assignment_id = s.assignment_id;

  std::vector<const Clip*> golds;
  std::vector<const Clip*> traps;
  std::vector<int> test_ratings;
  std::vector<int> session_ratings;
  for (const auto& vote : s.votes) {
    const Clip* clip = config.find_clip(vote.clip_id);
    session_ratings.push_back(vote.rating);
    if (clip == nullptr) continue;
    if (clip->role == ClipRole::Gold) golds.push_back(clip);
    else if (clip->role == ClipRole::Trapping) traps.push_back(clip);
    else test_ratings.push_back(vote.rating);
  }

  v.checks[Check::Gold] = detail::guarded([&] {
    if (golds.size() != 1) throw Error(ErrorCode::MissingGoldVote, std::to_string(golds.size()) + " gold votes");
    return detail::outcome(check_gold(s.votes, *golds.front(), th.gold_tolerance));
  });
  v.checks[Check::Trapping] = detail::guarded([&] {
    if (traps.size() != 1) {
      throw Error(ErrorCode::MissingTrappingVote, std::to_string(traps.size()) + " trapping votes");
    }
    return detail::outcome(check_trapping(s.votes, *traps.front()));
  });
  v.checks[Check::PlaybackDuration] = detail::guarded([&] {
    const auto p = check_playback(s.votes, config, th.playback_ratio);
    std::string d = "ratio=" + csv::fixed(p.ratio, 3);
    if (!p.not_fully_watched.empty()) d += " not_fully_watched=" + std::to_string(p.not_fully_watched.size());
    return detail::outcome(p.pass, d);
  });
  {
    const auto var = detail::guarded([&] {
      const auto o = check_variance(test_ratings, session_ratings, th.straightliner_run, th.low_variance_sd);
      v.checks[Check::Straightliner] =
          detail::outcome(o.straightliner_pass, "longest_run=" + std::to_string(o.longest_run));
      return detail::outcome(o.low_variance_pass, "sd=" + csv::fixed(o.test_sd, 3));
    });
    v.checks[Check::LowVariance] = var;
    if (!v.checks.count(Check::Straightliner)) v.checks[Check::Straightliner] = var;
  }
  v.checks[Check::VerificationCode] = detail::outcome(check_code(s.verification_code, s.submission_id, secret));

  std::optional<ReplayOutcome> replay;
  const auto replay_failure = detail::guarded([&] {
    replay = replay_qualification_and_setup(s, config, th.strict);
    return detail::outcome(true);
  });
  if (replay) {
    v.acuity_passed = replay->acuity_pass;
    v.distance_class = replay->distance_class;
    v.checks[Check::BrightnessMatrix2] = detail::outcome(replay->matrix2_pass);
    v.checks[Check::QualificationReplay] = detail::outcome(
        replay->qualification_pass, std::string("ishihara=") + (replay->ishihara_pass ? "pass" : "fail") +
                                        " acuity=" + (replay->acuity_pass ? "pass" : "fail"));
    v.checks[Check::SetupReplay] =
        detail::outcome(replay->setup_pass, "distance=" + std::string(to_string(replay->distance_class)));
  } else {
    v.checks[Check::BrightnessMatrix2] = replay_failure;
    v.checks[Check::QualificationReplay] = replay_failure;
    v.checks[Check::SetupReplay] = replay_failure;
  }

  v.accepted = std::all_of(v.checks.begin(), v.checks.end(), [](const auto& kv) { return kv.second.pass; });
  return v;
}

inline CleansingResult cleanse(const std::vector<Submission>& submissions, const TestConfig& config,
                               std::string_view secret) {
  CleansingResult out;
  out.verdicts.reserve(submissions.size());
  for (const auto& s : submissions) out.verdicts.push_back(evaluate_submission(s, config, secret));
  std::sort(out.verdicts.begin(), out.verdicts.end(),
            [](const Verdict& a, const Verdict& b) { return a.submission_id < b.submission_id; });

  auto& sum = out.summary;
  sum.total = out.verdicts.size();
  for (Check c : kAllChecks) sum.failures[c] = 0;
  for (const auto& v : out.verdicts) {
    sum.accepted += v.accepted ? 1 : 0;
    for (Check c : v.failures()) ++sum.failures[c];
  }
  sum.pass_rate = sum.total > 0 ? static_cast<double>(sum.accepted) / static_cast<double>(sum.total) : 0.0;
  return out;
}

inline std::string verdicts_csv(const std::vector<Verdict>& verdicts) {
  csv::Row header{"submission_id", "worker_id", "assignment_id"};
  for (Check c : kAllChecks) header.emplace_back(to_string(c));
  header.insert(header.end(), {"accepted", "acuity", "distance_class", "reasons"});
  std::string out = csv::format_row(header);
  for (const auto& v : verdicts) {
    csv::Row row{v.submission_id, v.worker_id, v.assignment_id.value_or("")};
    std::string reasons;
    for (Check c : kAllChecks) {
      auto it = v.checks.find(c);
      const bool pass = it == v.checks.end() || it->second.pass;
      row.emplace_back(pass ? "pass" : "fail");
      if (!pass) {
        if (!reasons.empty()) reasons += "; ";
        reasons += std::string(to_string(c));
        if (!it->second.detail.empty()) reasons += " (" + it->second.detail + ")";
      }
    }
    row.emplace_back(v.accepted ? "true" : "false");
    row.emplace_back(v.acuity_passed ? "pass" : "fail");
    row.emplace_back(to_string(v.distance_class));
    row.push_back(reasons);
    out += csv::format_row(row);
  }
  return out;
}

}  // namespace p910
