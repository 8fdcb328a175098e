#pragma once

// Comparison statistics between two score sets: correlations, RMSE, first
// order mapping (P.1401 style linear fit), Fisher-z comparison of two
// correlations and per-sequence Welch t-tests with Bonferroni correction.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "p910/error.hpp"

namespace p910::stats {

/// Neumaier-compensated sum.
inline double sum(std::span<const double> xs) {
  double s = 0.0;
  double c = 0.0;
  for (double x : xs) {
    const double t = s + x;
    c += std::abs(s) >= std::abs(x) ? (s - t) + x : (x - t) + s;
    s = t;
  }
  return s + c;
}

inline double mean(std::span<const double> xs) { return sum(xs) / static_cast<double>(xs.size()); }

/// Sample variance (n - 1 denominator), two-pass.
inline double variance(std::span<const double> xs) {
  const double m = mean(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - m) * (x - m);
  return acc / static_cast<double>(xs.size() - 1);
}

inline double stddev(std::span<const double> xs) { return std::sqrt(variance(xs)); }

/// Two-sided 95% Student-t critical value for `dof` degrees of freedom.
inline double t_critical_95(double dof) {
  boost::math::students_t dist(dof);
  return boost::math::quantile(dist, 0.975);
}

/// P(T > |t|) * 2 for Student-t with `dof` degrees of freedom.
inline double t_two_sided_p(double t, double dof) {
  boost::math::students_t dist(dof);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

inline double normal_upper_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

namespace detail {

inline void check_pair(std::span<const double> x, std::span<const double> y, std::size_t min_n = 3) {
  if (x.size() != y.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(x.size()) + " vs " + std::to_string(y.size()));
  }
  if (x.size() < min_n) throw Error(ErrorCode::TooFewSamples, std::to_string(x.size()));
}

}  // namespace detail

inline double pearson(std::span<const double> x, std::span<const double> y) {
  detail::check_pair(x, y);
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::ZeroVariance);
  const double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

/// 1-based ranks with ties sharing their average rank.
inline std::vector<double> fractional_ranks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

inline double spearman(std::span<const double> x, std::span<const double> y) {
  detail::check_pair(x, y);
  const auto rx = fractional_ranks(x);
  const auto ry = fractional_ranks(y);
  return pearson(rx, ry);
}

inline double rmse(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::LengthMismatch);
  if (x.empty()) throw Error(ErrorCode::TooFewSamples, "0");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += (x[i] - y[i]) * (x[i] - y[i]);
  return std::sqrt(acc / static_cast<double>(x.size()));
}

struct MappingCoefficients {
  double intercept = 0.0;
  double slope = 1.0;

  double apply(double v) const { return intercept + slope * v; }
};

/// Ordinary least squares for ref ~ intercept + slope * src.
inline MappingCoefficients fom_fit(std::span<const double> src, std::span<const double> ref) {
  detail::check_pair(src, ref);
  const double ms = mean(src);
  const double mr = mean(ref);
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    sxy += (src[i] - ms) * (ref[i] - mr);
    sxx += (src[i] - ms) * (src[i] - ms);
  }
  if (sxx == 0.0) throw Error(ErrorCode::DegenerateFit, "source has zero variance");
  MappingCoefficients m;
  m.slope = sxy / sxx;
  m.intercept = mr - m.slope * ms;
  return m;
}

inline std::vector<double> apply_mapping(const MappingCoefficients& m, std::span<const double> src) {
  std::vector<double> out(src.size());
  std::transform(src.begin(), src.end(), out.begin(), [&](double v) { return m.apply(v); });
  return out;
}

inline double rmse_after_fom(std::span<const double> src, std::span<const double> ref) {
  const auto mapped = apply_mapping(fom_fit(src, ref), src);
  return rmse(mapped, ref);
}

/// Everything reported when two score sets over the same items are compared.
/// `src` is the set being mapped (e.g. crowdsourced), `ref` the ground truth.
struct ComparisonReport {
  std::size_t n = 0;
  double pcc = 0.0;
  double srcc = 0.0;
  double rmse = 0.0;
  double rmse_fom = 0.0;
  MappingCoefficients mapping;
};

inline ComparisonReport compare(std::span<const double> src, std::span<const double> ref) {
  ComparisonReport r;
  r.n = src.size();
  r.pcc = pearson(src, ref);
  r.srcc = spearman(src, ref);
  r.rmse = rmse(src, ref);
  r.mapping = fom_fit(src, ref);
  r.rmse_fom = rmse(apply_mapping(r.mapping, src), ref);
  return r;
}

struct FisherZResult {
  double z = 0.0;
  double p_one_sided = 0.5;
};

/// Compares two correlations from independent samples: is r1 larger than r2?
inline FisherZResult fisher_z_compare(double r1, std::size_t n1, double r2, std::size_t n2) {
  if (!(std::abs(r1) < 1.0) || !(std::abs(r2) < 1.0)) throw Error(ErrorCode::DegenerateR);
  if (n1 < 4 || n2 < 4) throw Error(ErrorCode::TooFewSamples);
  FisherZResult out;
  const double se = std::sqrt(1.0 / static_cast<double>(n1 - 3) + 1.0 / static_cast<double>(n2 - 3));
  out.z = (std::atanh(r1) - std::atanh(r2)) / se;
  out.p_one_sided = normal_upper_tail(out.z);
  return out;
}

struct WelchResult {
  double t = 0.0;
  double dof = 0.0;
  double p_two_sided = 1.0;
  bool significant = false;
};

/// Welch's unequal-variance t statistic with Welch-Satterthwaite dof.
/// Two samples with zero variance and equal means give t = 0, p = 1.
inline WelchResult welch_t(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw Error(ErrorCode::TooFewVotes);
  const double va = variance(a) / static_cast<double>(a.size());
  const double vb = variance(b) / static_cast<double>(b.size());
  const double diff = mean(a) - mean(b);
  WelchResult r;
  const double se2 = va + vb;
  if (se2 == 0.0) {
    r.t = diff == 0.0 ? 0.0 : std::copysign(INFINITY, diff);
    r.dof = static_cast<double>(a.size() + b.size() - 2);
    r.p_two_sided = diff == 0.0 ? 1.0 : 0.0;
    return r;
  }
  r.t = diff / std::sqrt(se2);
  const double na1 = static_cast<double>(a.size() - 1);
  const double nb1 = static_cast<double>(b.size() - 1);
  r.dof = se2 * se2 / (va * va / na1 + vb * vb / nb1);
  r.p_two_sided = t_two_sided_p(r.t, r.dof);
  return r;
}

struct WelchBonferroni {
  std::vector<WelchResult> per_sequence;
  double corrected_alpha = 0.0;
  double fraction_significant = 0.0;
};

/// One Welch test per sequence; a sequence is flagged when p < alpha / m.
inline WelchBonferroni welch_t_bonferroni(const std::vector<std::vector<double>>& groups_a,
                                          const std::vector<std::vector<double>>& groups_b,
                                          double alpha = 0.05) {
  if (groups_a.size() != groups_b.size()) throw Error(ErrorCode::LengthMismatch);
  if (groups_a.empty()) throw Error(ErrorCode::TooFewVotes, "no sequences");
  WelchBonferroni out;
  out.corrected_alpha = alpha / static_cast<double>(groups_a.size());
  std::size_t flagged = 0;
  for (std::size_t i = 0; i < groups_a.size(); ++i) {
    WelchResult r = welch_t(groups_a[i], groups_b[i]);
    r.significant = r.p_two_sided < out.corrected_alpha;
    flagged += r.significant ? 1 : 0;
    out.per_sequence.push_back(r);
  }
  out.fraction_significant = static_cast<double>(flagged) / static_cast<double>(groups_a.size());
  return out;
}

/// Linear-interpolated percentile (q in [0, 1]) of unsorted data.
inline double percentile(std::vector<double> xs, double q) {
  if (xs.empty()) return NAN;
  std::sort(xs.begin(), xs.end());
  const double pos = q * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

}  // namespace p910::stats
