#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>

#include "oracle.hpp"
#include "p910/random.hpp"
#include "p910/stats.hpp"

using namespace p910;
using V = std::vector<double>;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::IoFailure;
}

V random_vector(Rng& rng, std::size_t n, double lo, double hi) {
  V out(n);
  for (auto& x : out) x = lo + (hi - lo) * rng.unit();
  return out;
}

}  // namespace

TEST(Pearson, Examples) {
  EXPECT_DOUBLE_EQ(stats::pearson(V{1, 2, 3, 4}, V{1, 2, 3, 4}), 1.0);
  EXPECT_DOUBLE_EQ(stats::pearson(V{1, 2, 3, 4}, V{-1, -2, -3, -4}), -1.0);
  EXPECT_NEAR(stats::pearson(V{1, 2, 3}, V{1, 2, 4}), 0.9820, 5e-5);
  EXPECT_NEAR(stats::pearson(V{1, 2, 3}, V{1, 2, 4}), static_cast<double>(oracle::hp_pearson({1, 2, 3}, {1, 2, 4})),
              1e-15);
}

TEST(Pearson, Errors) {
  EXPECT_EQ(code_of([] { stats::pearson(V{1, 2, 3}, V{1, 2}); }), ErrorCode::LengthMismatch);
  EXPECT_EQ(code_of([] { stats::pearson(V{1, 1, 1}, V{1, 2, 3}); }), ErrorCode::ZeroVariance);
  EXPECT_EQ(code_of([] { stats::pearson(V{1, 2}, V{1, 2}); }), ErrorCode::TooFewSamples);
}

TEST(Spearman, Examples) {
  EXPECT_DOUBLE_EQ(stats::spearman(V{1, 2, 3, 4}, V{1, 8, 27, 64}), 1.0);
  EXPECT_DOUBLE_EQ(stats::spearman(V{1, 2, 3, 4}, V{4, 3, 2, 1}), -1.0);
  EXPECT_NEAR(stats::spearman(V{1, 2, 2, 3}, V{1, 2, 3, 4}), 0.9487, 5e-5);
}

TEST(Spearman, FractionalRanksAverageTies) {
  EXPECT_EQ(stats::fractional_ranks(V{10, 20, 20, 30}), (V{1, 2.5, 2.5, 4}));
  EXPECT_EQ(stats::fractional_ranks(V{5, 5, 5}), (V{2, 2, 2}));
}

TEST(Fom, Examples) {
  auto m = stats::fom_fit(V{1, 2, 3, 4}, V{1, 2, 3, 4});
  EXPECT_NEAR(m.intercept, 0.0, 1e-12);
  EXPECT_NEAR(m.slope, 1.0, 1e-12);
  m = stats::fom_fit(V{0, 1, 2, 3}, V{1, 2, 3, 4});
  EXPECT_NEAR(m.intercept, 1.0, 1e-12);
  EXPECT_NEAR(m.slope, 1.0, 1e-12);
  EXPECT_NEAR(stats::rmse_after_fom(V{0, 1, 2, 3}, V{1, 2, 3, 4}), 0.0, 1e-12);
  m = stats::fom_fit(V{1, 2, 3}, V{2, 4, 6});
  EXPECT_NEAR(m.intercept, 0.0, 1e-12);
  EXPECT_NEAR(m.slope, 2.0, 1e-12);
  EXPECT_NEAR(stats::rmse_after_fom(V{1, 2, 3}, V{2, 4, 6}), 0.0, 1e-12);
  EXPECT_EQ(code_of([] { stats::fom_fit(V{2, 2, 2}, V{1, 2, 3}); }), ErrorCode::DegenerateFit);
  EXPECT_EQ(code_of([] { stats::rmse(V{1, 2, 3}, V{1, 2}); }), ErrorCode::LengthMismatch);
}

TEST(FisherZ, Examples) {
  auto r = stats::fisher_z_compare(0.7, 50, 0.7, 80);
  EXPECT_DOUBLE_EQ(r.z, 0.0);
  EXPECT_DOUBLE_EQ(r.p_one_sided, 0.5);

  r = stats::fisher_z_compare(0.9, 103, 0.6, 103);
  EXPECT_NEAR(r.z, 5.509, 5e-4);
  EXPECT_NEAR(r.z, static_cast<double>(oracle::hp_fisher_z(0.9, 103, 0.6, 103).z), 1e-12);
  // The smaller-sample variant that lands on z = 3.90.
  EXPECT_NEAR(stats::fisher_z_compare(0.9, 53, 0.6, 53).z, 3.895, 5e-4);

  EXPECT_EQ(code_of([] { stats::fisher_z_compare(1.0, 10, 0.5, 10); }), ErrorCode::DegenerateR);
  EXPECT_EQ(code_of([] { stats::fisher_z_compare(-1.0, 10, 0.5, 10); }), ErrorCode::DegenerateR);
  EXPECT_EQ(code_of([] { stats::fisher_z_compare(0.5, 3, 0.5, 10); }), ErrorCode::TooFewSamples);
}

TEST(Welch, IdenticalGroupsNeverSignificant) {
  std::vector<V> a, b;
  Rng rng(3);
  for (int s = 0; s < 144; ++s) {
    V v;
    for (int i = 0; i < 30; ++i) v.push_back(static_cast<double>(rng.between(1, 5)));
    a.push_back(v);
    std::reverse(v.begin(), v.end());
    b.push_back(v);
  }
  const auto r = stats::welch_t_bonferroni(a, b);
  EXPECT_DOUBLE_EQ(r.fraction_significant, 0.0);
  EXPECT_DOUBLE_EQ(r.corrected_alpha, 0.05 / 144);
  for (const auto& s : r.per_sequence) EXPECT_NEAR(s.t, 0.0, 1e-12);
}

TEST(Welch, ShiftedSequenceIsFlagged) {
  Rng rng(17);
  std::vector<V> a, b;
  for (int s = 0; s < 144; ++s) {
    V x, y;
    for (int i = 0; i < 30; ++i) {
      x.push_back(3.0 + 0.5 * rng.normal());
      y.push_back(3.0 + 0.5 * rng.normal() + (s == 77 ? 3.0 : 0.0));
    }
    a.push_back(x);
    b.push_back(y);
  }
  const auto r = stats::welch_t_bonferroni(a, b);
  EXPECT_TRUE(r.per_sequence[77].significant);
  EXPECT_GT(std::abs(r.per_sequence[77].t), 15.0);
  EXPECT_LE(r.fraction_significant, 3.0 / 144);
}

TEST(Welch, DoublingSequenceCountNeverGrowsFlaggedSet) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<V> a, b;
    for (int s = 0; s < 20; ++s) {
      const double shift = rng.unit() * 1.5;
      a.push_back(random_vector(rng, 12, 1, 5));
      V y = random_vector(rng, 12, 1, 5);
      for (auto& v : y) v += shift;
      b.push_back(y);
    }
    const auto small = stats::welch_t_bonferroni(a, b);
    auto a2 = a, b2 = b;
    a2.insert(a2.end(), a.begin(), a.end());
    b2.insert(b2.end(), b.begin(), b.end());
    const auto big = stats::welch_t_bonferroni(a2, b2);
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (big.per_sequence[i].significant) {
        EXPECT_TRUE(small.per_sequence[i].significant);
      }
    }
  }
}

TEST(Welch, Errors) {
  EXPECT_EQ(code_of([] { stats::welch_t(V{1}, V{1, 2}); }), ErrorCode::TooFewVotes);
  EXPECT_EQ(code_of([] { stats::welch_t_bonferroni({V{1, 2}}, {}); }), ErrorCode::LengthMismatch);
  const auto r = stats::welch_t(V{3, 3, 3}, V{3, 3});
  EXPECT_DOUBLE_EQ(r.t, 0.0);
  EXPECT_DOUBLE_EQ(r.p_two_sided, 1.0);
}

TEST(Properties, AffineInvariance) {
  Rng rng(8);
  for (int i = 0; i < 300; ++i) {
    const std::size_t n = 3 + rng.below(40);
    const V x = random_vector(rng, n, -5, 5), y = random_vector(rng, n, -5, 5);
    const double a = rng.unit() * 10 - 5, b = 0.1 + rng.unit() * 5;
    V xt(n), xm(n);
    for (std::size_t k = 0; k < n; ++k) {
      xt[k] = a + b * x[k];
      xm[k] = std::exp(x[k]);
    }
    const double p = stats::pearson(x, y);
    EXPECT_NEAR(stats::pearson(xt, y), p, 1e-12);
    EXPECT_NEAR(stats::spearman(xm, y), stats::spearman(x, y), 1e-12);
  }
}

TEST(Properties, FomNeverWorseAndKeepsOrder) {
  Rng rng(21);
  for (int i = 0; i < 2000; ++i) {
    const std::size_t n = 3 + rng.below(60);
    const V src = random_vector(rng, n, 1, 5), ref = random_vector(rng, n, 1, 5);
    EXPECT_LE(stats::rmse_after_fom(src, ref), stats::rmse(src, ref) + 1e-12);
    const auto m = stats::fom_fit(src, ref);
    if (m.slope > 0) {
      const auto mapped = stats::apply_mapping(m, src);
      EXPECT_EQ(stats::fractional_ranks(mapped), stats::fractional_ranks(src));
    }
  }
}

TEST(Oracle, SpotChecksAgainstHighPrecision) {
  Rng rng(1234);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 4 + rng.below(100);
    V x = random_vector(rng, n, 1, 5), y = random_vector(rng, n, 1, 5);
    for (auto& v : y) v = std::round(v);
    worst = std::max(worst, oracle::rel_error(stats::pearson(x, y), oracle::hp_pearson(x, y)));
    worst = std::max(worst, oracle::rel_error(stats::spearman(x, y), oracle::hp_spearman(x, y)));
    worst = std::max(worst, oracle::rel_error(stats::rmse(x, y), oracle::hp_rmse(x, y)));
    const auto fit = stats::fom_fit(x, y);
    const auto hp = oracle::hp_fom(x, y);
    worst = std::max(worst, oracle::rel_error(fit.slope, hp.slope));
    worst = std::max(worst, oracle::rel_error(stats::rmse_after_fom(x, y), oracle::hp_rmse_after_fom(x, y)));
    const auto w = stats::welch_t(x, y);
    const auto hw = oracle::hp_welch(x, y);
    worst = std::max(worst, oracle::rel_error(w.t, hw.t));
    worst = std::max(worst, oracle::rel_error(w.dof, hw.dof));
    worst = std::max(worst, oracle::rel_error(w.p_two_sided, hw.p));
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(Percentile, Interpolates) {
  EXPECT_DOUBLE_EQ(stats::percentile(V{1, 2, 3, 4, 5}, 0.5), 3.0);
  EXPECT_DOUBLE_EQ(stats::percentile(V{4, 1, 3, 2}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(stats::percentile(V{7}, 0.975), 7.0);
  EXPECT_TRUE(std::isnan(stats::percentile(V{}, 0.5)));
}
