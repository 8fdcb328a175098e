#pragma once

// Score aggregation: MOS / DMOS / CMOS per sequence, HRC roll-ups, the
// vote-count bootstrap and the run-vs-run correlation matrix.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "p910/error.hpp"
#include "p910/random.hpp"
#include "p910/stats.hpp"

namespace p910 {

enum class ScoreKind { MOS, DMOS, CMOS };

constexpr std::string_view to_string(ScoreKind k) {
  switch (k) {
    case ScoreKind::MOS: return "MOS";
    case ScoreKind::DMOS: return "DMOS";
    case ScoreKind::CMOS: return "CMOS";
  }
  return "?";
}

struct MosEstimate {
  std::string target_id;
  ScoreKind kind = ScoreKind::MOS;
  double mean = 0.0;
  /// Undefined for a single vote.
  std::optional<double> ci95_half_width;
  std::size_t n = 0;
  /// DMOS only: votes whose differential used the mean reference score
  /// because the rater had no same-session reference vote.
  std::size_t reference_fallbacks = 0;
};

namespace detail {

inline MosEstimate summarize(std::string target, ScoreKind kind, std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::NoVotes, target);
  MosEstimate e;
  e.target_id = std::move(target);
  e.kind = kind;
  e.n = values.size();
  e.mean = stats::mean(values);
  if (e.n > 1) {
    e.ci95_half_width =
        stats::t_critical_95(static_cast<double>(e.n - 1)) * stats::stddev(values) / std::sqrt(static_cast<double>(e.n));
  }
  return e;
}

inline std::vector<double> to_doubles(std::span<const int> xs) { return {xs.begin(), xs.end()}; }

}  // namespace detail

inline MosEstimate mos(std::string target, std::span<const int> votes) {
  return detail::summarize(std::move(target), ScoreKind::MOS, detail::to_doubles(votes));
}

/// Centered-scale comparison votes; 0 means parity.
inline MosEstimate cmos(std::string target, std::span<const int> votes) {
  return detail::summarize(std::move(target), ScoreKind::CMOS, detail::to_doubles(votes));
}

/// A vote tagged with the session that cast it, used to pair processed and
/// reference ratings from the same rater.
struct RaterVote {
  std::string session_key;
  int rating = 0;
};

/// Differential MOS for ACR-HR: DV = V(PVS) - V(REF) + scale_max per rater.
/// Raters without a same-session reference vote fall back to the mean
/// reference rating.
inline MosEstimate dmos(std::string target, const std::vector<RaterVote>& pvs_votes,
                        const std::vector<RaterVote>& ref_votes, int scale_max) {
  if (ref_votes.empty()) throw Error(ErrorCode::NoReferenceVotes, target);
  if (pvs_votes.empty()) throw Error(ErrorCode::NoVotes, target);
  std::map<std::string, int> ref_by_session;
  std::vector<double> ref_values;
  for (const auto& v : ref_votes) {
    ref_by_session[v.session_key] = v.rating;
    ref_values.push_back(v.rating);
  }
  const double ref_mean = stats::mean(ref_values);
  std::vector<double> dvs;
  std::size_t fallbacks = 0;
  for (const auto& v : pvs_votes) {
    auto it = ref_by_session.find(v.session_key);
    if (it != ref_by_session.end()) {
      dvs.push_back(static_cast<double>(v.rating - it->second + scale_max));
    } else {
      dvs.push_back(static_cast<double>(v.rating) - ref_mean + scale_max);
      ++fallbacks;
    }
  }
  auto e = detail::summarize(std::move(target), ScoreKind::DMOS, dvs);
  e.reference_fallbacks = fallbacks;
  return e;
}

struct HrcEstimate {
  MosEstimate estimate;  // mean = unweighted mean of sequence means
  double vote_weighted_mean = 0.0;
  std::size_t sequences = 0;
};

/// Rolls sequence scores up to their HRC. The primary mean averages sequence
/// means without weights; the vote-weighted mean is reported alongside.
inline std::vector<HrcEstimate> hrc_rollup(const std::vector<MosEstimate>& per_sequence,
                                           const std::map<std::string, std::string>& hrc_of) {
  struct Acc {
    std::vector<double> means;
    double weighted = 0.0;
    std::size_t n = 0;
    ScoreKind kind = ScoreKind::MOS;
  };
  std::map<std::string, Acc> groups;
  for (const auto& s : per_sequence) {
    auto it = hrc_of.find(s.target_id);
    if (it == hrc_of.end()) throw Error(ErrorCode::UnmappedSequence, s.target_id);
    auto& g = groups[it->second];
    g.means.push_back(s.mean);
    g.weighted += s.mean * static_cast<double>(s.n);
    g.n += s.n;
    g.kind = s.kind;
  }
  std::vector<HrcEstimate> out;
  for (auto& [hrc, g] : groups) {
    HrcEstimate h;
    h.estimate.target_id = hrc;
    h.estimate.kind = g.kind;
    h.estimate.mean = stats::mean(g.means);
    h.estimate.n = g.n;
    if (g.means.size() > 1) {
      h.estimate.ci95_half_width = stats::t_critical_95(static_cast<double>(g.means.size() - 1)) *
                                   stats::stddev(g.means) / std::sqrt(static_cast<double>(g.means.size()));
    }
    h.vote_weighted_mean = g.n > 0 ? g.weighted / static_cast<double>(g.n) : NAN;
    h.sequences = g.means.size();
    out.push_back(std::move(h));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bootstrap over the number of votes

struct IntervalSummary {
  double mean = NAN;
  double lo = NAN;  // 2.5th percentile over repetitions
  double hi = NAN;  // 97.5th percentile
};

struct BootstrapPoint {
  int votes = 0;
  IntervalSummary pcc;
  IntervalSummary srcc;
  IntervalSummary rmse;
  /// Repetitions where correlations were defined (resampled MOS not constant).
  int valid_repetitions = 0;
};

struct BootstrapCurve {
  std::vector<BootstrapPoint> points;
  int repetitions = 200;
  std::uint64_t seed = 0;
};

inline constexpr int kDefaultBootstrapRepetitions = 200;

inline std::vector<int> default_vote_counts(int n_max = 60) {
  std::vector<int> out;
  for (int n = 1; n <= n_max; ++n) out.push_back(n);
  return out;
}

namespace detail {

inline IntervalSummary interval(const std::vector<double>& xs) {
  IntervalSummary s;
  if (xs.empty()) return s;
  s.mean = stats::mean(xs);
  s.lo = stats::percentile(xs, 0.025);
  s.hi = stats::percentile(xs, 0.975);
  return s;
}

}  // namespace detail

/// For every N: draw N votes per sequence with replacement, average them, and
/// compare the resulting MOS vector with `reference`. Each (N, repetition)
/// uses its own substream of `seed`, so results do not depend on evaluation order.
inline BootstrapCurve bootstrap_votes(const std::vector<std::vector<int>>& votes,
                                      const std::vector<double>& reference, const std::vector<int>& vote_counts,
                                      int repetitions, std::uint64_t seed) {
  if (votes.empty()) throw Error(ErrorCode::EmptyVotes);
  if (reference.size() != votes.size()) throw Error(ErrorCode::MissingReference);
  for (const auto& v : votes) {
    if (v.empty()) throw Error(ErrorCode::EmptyVotes, "sequence without votes");
  }
  for (std::size_t i = 1; i < vote_counts.size(); ++i) {
    if (vote_counts[i] <= vote_counts[i - 1]) throw Error(ErrorCode::MalformedInput, "vote counts must increase");
  }

  BootstrapCurve curve;
  curve.repetitions = repetitions;
  curve.seed = seed;
  std::vector<double> sample(votes.size());
  for (int n : vote_counts) {
    BootstrapPoint point;
    point.votes = n;
    std::vector<double> pccs, srccs, rmses;
    for (int rep = 0; rep < repetitions; ++rep) {
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(rep)));
      for (std::size_t s = 0; s < votes.size(); ++s) {
        double acc = 0.0;
        for (int k = 0; k < n; ++k) acc += votes[s][rng.below(votes[s].size())];
        sample[s] = acc / n;
      }
      rmses.push_back(stats::rmse(sample, reference));
      try {
        const double p = stats::pearson(sample, reference);
        const double r = stats::spearman(sample, reference);
        pccs.push_back(p);
        srccs.push_back(r);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::ZeroVariance && e.code() != ErrorCode::TooFewSamples) throw;
      }
    }
    point.valid_repetitions = static_cast<int>(pccs.size());
    point.pcc = detail::interval(pccs);
    point.srcc = detail::interval(srccs);
    point.rmse = detail::interval(rmses);
    curve.points.push_back(point);
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Run-vs-run correlation matrix

/// k x k layout: PCC above the diagonal, SRCC below, diagonal empty.
struct CorrelationMatrix {
  std::size_t k = 0;
  std::vector<std::optional<double>> cells;

  const std::optional<double>& at(std::size_t row, std::size_t col) const { return cells[row * k + col]; }
};

inline CorrelationMatrix compare_runs(const std::vector<std::vector<double>>& runs) {
  if (runs.size() < 2) throw Error(ErrorCode::Misaligned, "need at least two runs");
  for (const auto& r : runs) {
    if (r.size() != runs.front().size()) throw Error(ErrorCode::Misaligned, "runs differ in length");
  }
  CorrelationMatrix m;
  m.k = runs.size();
  m.cells.assign(m.k * m.k, std::nullopt);
  for (std::size_t i = 0; i < m.k; ++i) {
    for (std::size_t j = i + 1; j < m.k; ++j) {
      m.cells[i * m.k + j] = stats::pearson(runs[i], runs[j]);
      m.cells[j * m.k + i] = stats::spearman(runs[i], runs[j]);
    }
  }
  return m;
}

}  // namespace p910
