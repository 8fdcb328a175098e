#pragma once

// Result parser back end: turns cleansing verdicts into the accept / reject /
// extend lists, bonus payouts and score tables, and reads/writes the score
// files used by the comparison and bootstrap commands.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "p910/aggregate.hpp"
#include "p910/cleansing.hpp"
#include "p910/core.hpp"
#include "p910/csv.hpp"
#include "p910/serialization.hpp"

namespace p910 {

/// Written by `prepare`, read by `parse`. The secret itself stays in its own
/// file; only the path is recorded here.
struct ParserConfig {
  int schema_version = kSchemaVersion;
  TestConfig config;
  std::string secret_file;
};

inline void to_json(Json& j, const ParserConfig& p) {
  j = Json{{"schema_version", p.schema_version}, {"secret_file", p.secret_file}, {"config", p.config}};
}
inline void from_json(const Json& j, ParserConfig& p) {
  j.at("schema_version").get_to(p.schema_version);
  j.at("secret_file").get_to(p.secret_file);
  j.at("config").get_to(p.config);
}

enum class Decision { Accept, Reject, Extend };

constexpr std::string_view to_string(Decision d) {
  switch (d) {
    case Decision::Accept: return "accept";
    case Decision::Reject: return "reject";
    case Decision::Extend: return "extend";
  }
  return "?";
}

/// Accept when every check passes; extend when every failure is soft
/// (missing telemetry); reject otherwise.
inline Decision decide(const Verdict& v) {
  if (v.accepted) return Decision::Accept;
  const bool all_soft =
      std::all_of(v.checks.begin(), v.checks.end(), [](const auto& kv) { return kv.second.pass || kv.second.soft; });
  return all_soft ? Decision::Extend : Decision::Reject;
}

struct ListEntry {
  std::string submission_id;
  std::string assignment_id;
  std::string worker_id;
  std::string reasons;
};

struct BonusEntry {
  std::string worker_id;
  double amount = 0.0;
  std::string reason;
};

struct ScoreRow {
  MosEstimate estimate;
  std::string hrc_id;
};

struct HrcRow {
  HrcEstimate estimate;
};

struct ReportBundle {
  std::vector<ListEntry> accept_list;
  std::vector<ListEntry> reject_list;
  std::vector<ListEntry> extend_list;
  std::vector<BonusEntry> bonus_list;
  std::vector<ScoreRow> sequence_scores;  // MOS (ACR, ACR-HR, DCR) or CMOS (CCR)
  std::vector<HrcRow> hrc_scores;
  std::vector<ScoreRow> dmos_scores;  // ACR-HR only
  std::vector<HrcRow> dmos_hrc_scores;
  std::vector<std::string> sequences_without_votes;
  CleansingResult cleansing;
  std::vector<Submission> accepted_submissions;
};

inline std::string failure_reasons(const Verdict& v) {
  std::string out;
  for (Check c : v.failures()) {
    if (!out.empty()) out += "; ";
    out += std::string(to_string(c));
  }
  return out;
}

/// Each worker earns the highest tier whose session count they reached.
inline std::vector<BonusEntry> compute_bonuses(const std::vector<Verdict>& verdicts,
                                               const std::vector<BonusTier>& tiers) {
  std::map<std::string, int> accepted;
  for (const auto& v : verdicts) {
    if (v.accepted) ++accepted[v.worker_id];
  }
  std::vector<BonusEntry> out;
  for (const auto& [worker, count] : accepted) {
    const BonusTier* best = nullptr;
    for (const auto& t : tiers) {
      if (count >= t.min_accepted_sessions && (!best || t.min_accepted_sessions > best->min_accepted_sessions)) {
        best = &t;
      }
    }
    if (best && best->amount > 0.0) out.push_back({worker, best->amount, best->reason});
  }
  return out;
}

namespace detail {

inline std::vector<HrcRow> rollup_rows(const std::vector<ScoreRow>& rows) {
  std::vector<MosEstimate> mapped;
  std::map<std::string, std::string> hrc_of;
  for (const auto& r : rows) {
    if (r.hrc_id.empty()) continue;
    mapped.push_back(r.estimate);
    hrc_of[r.estimate.target_id] = r.hrc_id;
  }
  std::vector<HrcRow> out;
  for (auto& h : hrc_rollup(mapped, hrc_of)) out.push_back({std::move(h)});
  return out;
}

}  // namespace detail

/// Cleansing, the three-way split, bonuses and aggregation of accepted votes.
inline ReportBundle build_report(const std::vector<Submission>& submissions, const TestConfig& config,
                                 std::string_view secret) {
  for (const auto& s : submissions) {
    if (!s.test_id.empty() && s.test_id != config.test_id) {
      throw Error(ErrorCode::ConfigMismatch, s.submission_id + " belongs to " + s.test_id);
    }
  }
  ReportBundle b;
  b.cleansing = cleanse(submissions, config, secret);

  std::map<std::string, const Submission*> by_id;
  for (const auto& s : submissions) by_id[s.submission_id] = &s;

  for (const auto& v : b.cleansing.verdicts) {
    ListEntry e{v.submission_id, v.assignment_id.value_or(""), v.worker_id, failure_reasons(v)};
    switch (decide(v)) {
      case Decision::Accept:
        b.accept_list.push_back(std::move(e));
        b.accepted_submissions.push_back(*by_id.at(v.submission_id));
        break;
      case Decision::Reject: b.reject_list.push_back(std::move(e)); break;
      case Decision::Extend: b.extend_list.push_back(std::move(e)); break;
    }
  }
  b.bonus_list = compute_bonuses(b.cleansing.verdicts, config.bonus_policy);

  std::map<std::string, std::vector<RaterVote>> votes;
  for (const auto& s : b.accepted_submissions) {
    for (const auto& v : s.votes) votes[v.clip_id].push_back({s.submission_id, v.rating});
  }

  const bool ccr = config.method.kind == MethodKind::CCR;
  for (const Clip* clip : config.rated_clips()) {
    auto it = votes.find(clip->clip_id);
    if (it == votes.end()) {
      b.sequences_without_votes.push_back(clip->clip_id);
      continue;
    }
    std::vector<int> ratings;
    for (const auto& v : it->second) ratings.push_back(v.rating);
    b.sequence_scores.push_back(
        {ccr ? cmos(clip->clip_id, ratings) : mos(clip->clip_id, ratings), clip->hrc_id.value_or("")});

    if (config.method.kind == MethodKind::ACR_HR && clip->role == ClipRole::Test && clip->reference_id) {
      auto ref = votes.find(*clip->reference_id);
      if (ref == votes.end()) continue;
      b.dmos_scores.push_back({dmos(clip->clip_id, it->second, ref->second, config.method.rating_range().hi),
                               clip->hrc_id.value_or("")});
    }
  }

  std::vector<ScoreRow> test_rows;
  for (const auto& r : b.sequence_scores) {
    const Clip* c = config.find_clip(r.estimate.target_id);
    if (c && c->role == ClipRole::Test) test_rows.push_back(r);
  }
  b.hrc_scores = detail::rollup_rows(test_rows);
  b.dmos_hrc_scores = detail::rollup_rows(b.dmos_scores);
  return b;
}

// ---------------------------------------------------------------------------
// Writers

inline std::string list_csv(const std::vector<ListEntry>& list) {
  std::string out = csv::format_row({"assignment_id", "submission_id", "worker_id", "reasons"});
  for (const auto& e : list) out += csv::format_row({e.assignment_id, e.submission_id, e.worker_id, e.reasons});
  return out;
}

inline std::string bonus_csv(const std::vector<BonusEntry>& list) {
  std::string out = csv::format_row({"worker_id", "amount", "reason"});
  for (const auto& e : list) out += csv::format_row({e.worker_id, csv::fixed(e.amount, 2), e.reason});
  return out;
}

inline std::string scores_csv(const std::vector<ScoreRow>& rows) {
  std::string out =
      csv::format_row({"target_id", "hrc_id", "kind", "mean", "ci95_half_width", "n", "reference_fallbacks"});
  for (const auto& r : rows) {
    const auto& e = r.estimate;
    out += csv::format_row({e.target_id, r.hrc_id, std::string(to_string(e.kind)), csv::number(e.mean),
                            e.ci95_half_width ? csv::number(*e.ci95_half_width) : "", std::to_string(e.n),
                            std::to_string(e.reference_fallbacks)});
  }
  return out;
}

inline std::string hrc_csv(const std::vector<HrcRow>& rows) {
  std::string out = csv::format_row(
      {"target_id", "kind", "mean", "ci95_half_width", "n", "sequences", "vote_weighted_mean"});
  for (const auto& r : rows) {
    const auto& e = r.estimate.estimate;
    out += csv::format_row({e.target_id, std::string(to_string(e.kind)), csv::number(e.mean),
                            e.ci95_half_width ? csv::number(*e.ci95_half_width) : "", std::to_string(e.n),
                            std::to_string(r.estimate.sequences), csv::number(r.estimate.vote_weighted_mean)});
  }
  return out;
}

inline std::string accepted_votes_csv(const std::vector<Submission>& accepted, const TestConfig& config) {
  std::string out = csv::format_row({"submission_id", "worker_id", "clip_id", "rating"});
  std::set<std::string> rated;
  for (const Clip* c : config.rated_clips()) rated.insert(c->clip_id);
  for (const auto& s : accepted) {
    for (const auto& v : s.votes) {
      if (rated.count(v.clip_id)) out += csv::format_row({s.submission_id, s.worker_id, v.clip_id, std::to_string(v.rating)});
    }
  }
  return out;
}

inline Json summary_json(const ReportBundle& b, const TestConfig& config) {
  const auto& sum = b.cleansing.summary;
  Json failures = Json::object();
  for (const auto& [check, n] : sum.failures) failures[std::string(to_string(check))] = n;
  Json j{{"schema_version", kSchemaVersion},
         {"test_id", config.test_id},
         {"method", config.method.kind},
         {"submissions", sum.total},
         {"accepted", b.accept_list.size()},
         {"rejected", b.reject_list.size()},
         {"extended", b.extend_list.size()},
         {"pass_rate", sum.pass_rate},
         {"failures", failures},
         {"sequences_scored", b.sequence_scores.size()},
         {"sequences_without_votes", b.sequences_without_votes}};
  if (!b.dmos_scores.empty()) {
    std::size_t fallbacks = 0;
    for (const auto& r : b.dmos_scores) fallbacks += r.estimate.reference_fallbacks;
    j["dmos_reference_fallbacks"] = fallbacks;
  }
  return j;
}

// ---------------------------------------------------------------------------
// Score files for comparison and bootstrap

struct ScoreTable {
  std::map<std::string, double> mean;          // target_id -> score
  std::map<std::string, std::string> hrc_of;  // only rows with an hrc_id
};

/// Reads any table with `target_id` and `mean` columns (an optional `hrc_id`
/// column enables HRC-level comparison).
inline ScoreTable read_score_table(std::string_view text) {
  const csv::Table t(text);
  if (!t.has("target_id") || !t.has("mean")) {
    throw Error(ErrorCode::MalformedInput, "score table needs target_id and mean columns");
  }
  ScoreTable out;
  for (std::size_t r = 0; r < t.size(); ++r) {
    const std::string id = t.at(r, "target_id");
    if (!out.mean.emplace(id, t.number_at(r, "mean")).second) {
      throw Error(ErrorCode::MalformedInput, "duplicate target_id " + id);
    }
    if (t.has("hrc_id") && !t.at(r, "hrc_id").empty()) out.hrc_of[id] = t.at(r, "hrc_id");
  }
  return out;
}

enum class CompareLevel { Sequence, Hrc };

inline CompareLevel parse_level(std::string_view s) {
  if (s == "sequence") return CompareLevel::Sequence;
  if (s == "hrc") return CompareLevel::Hrc;
  throw Error(ErrorCode::UnknownLevel, std::string(s));
}

namespace detail {

inline std::map<std::string, double> to_hrc_level(const ScoreTable& t) {
  std::map<std::string, std::vector<double>> groups;
  for (const auto& [id, m] : t.mean) {
    auto it = t.hrc_of.find(id);
    if (it == t.hrc_of.end()) throw Error(ErrorCode::UnmappedSequence, id);
    groups[it->second].push_back(m);
  }
  std::map<std::string, double> out;
  for (const auto& [hrc, ms] : groups) out[hrc] = stats::mean(ms);
  return out;
}

}  // namespace detail

struct AlignedScores {
  std::vector<std::string> ids;
  std::vector<double> a;
  std::vector<double> b;
};

/// Both tables must cover exactly the same ids at the requested level. At the
/// HRC level, the HRC map of `a` is used for `b` rows that carry none.
inline AlignedScores align_scores(const ScoreTable& a, ScoreTable b, CompareLevel level) {
  std::map<std::string, double> ma = a.mean;
  std::map<std::string, double> mb = b.mean;
  if (level == CompareLevel::Hrc) {
    for (const auto& [id, h] : a.hrc_of) b.hrc_of.emplace(id, h);
    ScoreTable a2 = a;
    for (const auto& [id, h] : b.hrc_of) a2.hrc_of.emplace(id, h);
    ma = detail::to_hrc_level(a2);
    mb = detail::to_hrc_level(b);
  }
  AlignedScores out;
  for (const auto& [id, v] : ma) {
    auto it = mb.find(id);
    if (it == mb.end()) throw Error(ErrorCode::Misaligned, id + " missing from second table");
    out.ids.push_back(id);
    out.a.push_back(v);
    out.b.push_back(it->second);
  }
  if (mb.size() != ma.size()) {
    for (const auto& [id, v] : mb) {
      if (!ma.count(id)) throw Error(ErrorCode::Misaligned, id + " missing from first table");
    }
  }
  return out;
}

inline std::string comparison_csv(const stats::ComparisonReport& r, CompareLevel level) {
  std::string out = csv::format_row({"level", "n", "pcc", "srcc", "rmse", "rmse_fom", "fom_intercept", "fom_slope"});
  out += csv::format_row({level == CompareLevel::Sequence ? "sequence" : "hrc", std::to_string(r.n),
                          csv::fixed(r.pcc, 4), csv::fixed(r.srcc, 4), csv::fixed(r.rmse, 4),
                          csv::fixed(r.rmse_fom, 4), csv::fixed(r.mapping.intercept, 4),
                          csv::fixed(r.mapping.slope, 4)});
  return out;
}

struct VoteTable {
  std::vector<std::string> ids;
  std::vector<std::vector<int>> votes;
};

/// Reads `clip_id,rating` rows (for example accepted_votes.csv), grouped by clip.
inline VoteTable read_vote_table(std::string_view text) {
  const csv::Table t(text);
  if (!t.has("clip_id") || !t.has("rating")) throw Error(ErrorCode::MalformedInput, "vote table needs clip_id and rating");
  std::map<std::string, std::vector<int>> grouped;
  for (std::size_t r = 0; r < t.size(); ++r) {
    grouped[t.at(r, "clip_id")].push_back(static_cast<int>(t.number_at(r, "rating")));
  }
  VoteTable out;
  for (auto& [id, vs] : grouped) {
    out.ids.push_back(id);
    out.votes.push_back(std::move(vs));
  }
  return out;
}

inline std::string bootstrap_csv(const BootstrapCurve& c) {
  std::string out = csv::format_row({"votes", "pcc_mean", "pcc_lo", "pcc_hi", "srcc_mean", "srcc_lo", "srcc_hi",
                                     "rmse_mean", "rmse_lo", "rmse_hi", "valid_repetitions"});
  auto num = [](double v) { return std::isnan(v) ? std::string() : csv::fixed(v, 6); };
  for (const auto& p : c.points) {
    out += csv::format_row({std::to_string(p.votes), num(p.pcc.mean), num(p.pcc.lo), num(p.pcc.hi), num(p.srcc.mean),
                            num(p.srcc.lo), num(p.srcc.hi), num(p.rmse.mean), num(p.rmse.lo), num(p.rmse.hi),
                            std::to_string(p.valid_repetitions)});
  }
  return out;
}

inline std::string correlation_matrix_csv(const CorrelationMatrix& m, const std::vector<std::string>& names) {
  csv::Row header{"run"};
  header.insert(header.end(), names.begin(), names.end());
  std::string out = csv::format_row(header);
  for (std::size_t i = 0; i < m.k; ++i) {
    csv::Row row{names[i]};
    for (std::size_t j = 0; j < m.k; ++j) row.push_back(m.at(i, j) ? csv::fixed(*m.at(i, j), 4) : "");
    out += csv::format_row(row);
  }
  return out;
}

}  // namespace p910
