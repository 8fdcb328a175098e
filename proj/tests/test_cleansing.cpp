#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <set>

#include "p910/cleansing.hpp"
#include "p910/testprep.hpp"
#include "support.hpp"

using namespace p910;
using namespace p910::testing;

namespace {

Clip gold_clip(int expected, int tolerance = 1) {
  Clip c;
  c.clip_id = "g";
  c.role = ClipRole::Gold;
  c.expected_rating = expected;
  c.gold_tolerance = tolerance;
  return c;
}

Clip trap_clip(int expected) {
  Clip c;
  c.clip_id = "t";
  c.role = ClipRole::Trapping;
  c.expected_rating = expected;
  return c;
}

Vote vote(std::string clip, int rating) {
  Vote v;
  v.clip_id = std::move(clip);
  v.rating = rating;
  v.playback_count = 1;
  return v;
}

std::set<std::string> accepted_ids(const CleansingResult& r) {
  std::set<std::string> out;
  for (const auto& v : r.verdicts) {
    if (v.accepted) out.insert(v.submission_id);
  }
  return out;
}

}  // namespace

TEST(Gold, ToleranceBand) {
  EXPECT_TRUE(check_gold({vote("g", 4)}, gold_clip(5)));
  EXPECT_FALSE(check_gold({vote("g", 3)}, gold_clip(5)));
  EXPECT_TRUE(check_gold({vote("g", 1)}, gold_clip(1)));
  EXPECT_TRUE(check_gold({vote("g", 3)}, gold_clip(5), 2));
  try {
    check_gold({vote("x", 3)}, gold_clip(5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingGoldVote);
  }
}

TEST(Trapping, ExactMatch) {
  EXPECT_TRUE(check_trapping({vote("t", 2)}, trap_clip(2)));
  EXPECT_FALSE(check_trapping({vote("t", 3)}, trap_clip(2)));
  try {
    check_trapping({vote("x", 2)}, trap_clip(2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingTrappingVote);
  }
}

TEST(Playback, RatioAndFullWatch) {
  TestConfig c = make_config({MethodKind::ACR, 12, 2, 10, 1, 9000, 1, 1});
  std::vector<Vote> votes;
  for (int i = 0; i < 10; ++i) {
    votes.push_back(vote(seq_id(static_cast<std::size_t>(i)), 3));
    votes.back().playback_total_ms = 10'000;
  }
  auto p = check_playback(votes, c);
  EXPECT_TRUE(p.pass);
  EXPECT_NEAR(p.ratio, 100.0 / 90.0, 1e-12);

  for (auto& v : votes) v.playback_total_ms = 10'400;
  EXPECT_FALSE(check_playback(votes, c).pass);

  for (auto& v : votes) v.playback_total_ms = 9'000;
  votes[3].playback_total_ms = 4'000;
  votes[4].playback_total_ms = 14'000;
  p = check_playback(votes, c);
  EXPECT_FALSE(p.pass);
  EXPECT_EQ(p.not_fully_watched, std::vector<std::string>{seq_id(3)});

  votes[3].playback_total_ms = std::nullopt;
  try {
    check_playback(votes, c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingTelemetry);
  }
}

TEST(Playback, PairedMethodsCountBothClips) {
  TestConfig c = make_config({MethodKind::DCR, 12, 2, 10, 1, 8000, 1, 1});
  const Clip* clip = c.find_clip(seq_id(0));
  ASSERT_TRUE(clip->reference_id);
  EXPECT_EQ(nominal_duration(*clip, c), 16'000);
  Vote v = vote(clip->clip_id, 3);
  v.playback_total_ms = 16'500;
  EXPECT_TRUE(check_playback({v}, c).pass);
  v.playback_total_ms = 12'000;
  EXPECT_FALSE(check_playback({v}, c).pass);
}

TEST(Variance, Straightliners) {
  auto o = check_variance(std::vector<int>(10, 3), std::vector<int>(12, 3));
  EXPECT_FALSE(o.straightliner_pass);
  EXPECT_FALSE(o.low_variance_pass);

  o = check_variance({1, 5, 3, 2, 4, 5, 1, 3, 2, 4}, {});
  EXPECT_TRUE(o.straightliner_pass);
  EXPECT_TRUE(o.low_variance_pass);
  EXPECT_NEAR(o.test_sd, 1.5, 0.1);

  o = check_variance({3, 3, 3, 3, 3, 3, 3, 3, 2, 4}, {});
  EXPECT_EQ(o.longest_run, 8);
  EXPECT_FALSE(o.straightliner_pass);
  o = check_variance({3, 3, 3, 3, 3, 3, 3, 2, 4, 3}, {});
  EXPECT_EQ(o.longest_run, 7);
  EXPECT_TRUE(o.straightliner_pass);

  try {
    check_variance({3}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooFewVotes);
  }
}

TEST(Code, IssuedMutatedEmpty) {
  const auto code = issue_verification_code("sub-1", "k");
  EXPECT_TRUE(check_code(code, "sub-1", "k"));
  std::string bad = code;
  bad.back() = bad.back() == 'A' ? 'B' : 'A';
  EXPECT_FALSE(check_code(bad, "sub-1", "k"));
  EXPECT_FALSE(check_code("", "sub-1", "k"));
  EXPECT_FALSE(check_code(code, "sub-2", "k"));
}

TEST(Replay, Examples) {
  const auto c = make_config();
  const auto plans = plan_sessions(c, 1);
  Rng rng(1);
  auto s = simulate_submission(c, plans[0], "w", random_truth(c, 1), Behavior::Reliable, rng);
  auto r = replay_qualification_and_setup(s, c);
  EXPECT_TRUE(r.ishihara_pass);
  EXPECT_TRUE(r.acuity_pass);
  EXPECT_TRUE(r.matrix2_pass);
  EXPECT_EQ(r.distance_class, DistanceClass::Expected);

  // Reported counts off by one triangle fail the brightness check.
  auto wrong = s;
  wrong.setup.matrix2.reported.triangles -= 1;
  EXPECT_FALSE(replay_qualification_and_setup(wrong, c).matrix2_pass);
  EXPECT_FALSE(evaluate_submission(wrong, c, kSecret).accepted);
  EXPECT_TRUE(evaluate_submission(wrong, c, kSecret).failed(Check::BrightnessMatrix2));

  // (wrong, wrong, correct) distance answers: recorded as too far, still accepted.
  auto far = s;
  const auto& key = c.qualification_assets.distance_key;
  far.setup.distance_answers = {DistanceAnswer::Same, DistanceAnswer::Same, key[2]};
  r = replay_qualification_and_setup(far, c);
  EXPECT_EQ(r.distance_class, DistanceClass::TooFar);
  Rng exact(2);
  const auto truth = random_truth(c, 1);
  far = simulate_submission(c, plans[0], "w", truth, Behavior::Reliable, exact, 0.0);
  far.setup.distance_answers = {DistanceAnswer::Same, DistanceAnswer::Same, key[2]};
  const auto v = evaluate_submission(far, c, kSecret);
  EXPECT_EQ(v.distance_class, DistanceClass::TooFar);
  EXPECT_TRUE(v.accepted);

  auto strict_cfg = c;
  strict_cfg.thresholds.strict = true;
  EXPECT_FALSE(evaluate_submission(far, strict_cfg, kSecret).accepted);

  auto missing = s;
  missing.qualification.ishihara_answers.clear();
  try {
    replay_qualification_and_setup(missing, c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingAnswers);
  }
}

TEST(Cleanse, HonestPopulationFullyAccepted) {
  const auto c = make_config();
  const auto plans = plan_sessions(c, 4);
  const auto truth = random_truth(c, 4);
  Rng rng(4);
  std::vector<Submission> subs;
  for (std::size_t i = 0; i < 60; ++i) {
    subs.push_back(simulate_submission(c, plans[i], "w" + std::to_string(i), truth, Behavior::Reliable, rng, 0.0));
  }
  const auto r = cleanse(subs, c, kSecret);
  EXPECT_EQ(r.summary.total, 60u);
  EXPECT_EQ(r.summary.accepted, 60u);
  EXPECT_DOUBLE_EQ(r.summary.pass_rate, 1.0);
}

TEST(Cleanse, RandomClickersAreCaughtWithReasons) {
  const auto c = make_config();
  const auto plans = plan_sessions(c, 5);
  const auto truth = random_truth(c, 5);
  Rng rng(5);
  std::vector<Submission> subs;
  for (std::size_t i = 0; i < 100; ++i) {
    const auto b = i % 5 == 0 ? Behavior::RandomClicker : Behavior::Reliable;
    subs.push_back(simulate_submission(c, plans[i], "w" + std::to_string(i), truth, b, rng, 0.0));
  }
  const auto r = cleanse(subs, c, kSecret);
  EXPECT_LT(r.summary.accepted, 100u);
  for (const auto& v : r.verdicts) {
    if (!v.accepted) {
      EXPECT_FALSE(v.failures().empty());
    }
    EXPECT_EQ(v.accepted, v.failures().empty());
  }
  EXPECT_TRUE(std::is_sorted(r.verdicts.begin(), r.verdicts.end(),
                             [](const Verdict& a, const Verdict& b) { return a.submission_id < b.submission_id; }));
}

TEST(Cleanse, EmptyInput) {
  const auto r = cleanse({}, make_config(), kSecret);
  EXPECT_TRUE(r.verdicts.empty());
  EXPECT_EQ(r.summary.total, 0u);
  EXPECT_EQ(r.summary.accepted, 0u);
  EXPECT_DOUBLE_EQ(r.summary.pass_rate, 0.0);
  for (Check c : kAllChecks) EXPECT_EQ(r.summary.failures.at(c), 0u);
}

TEST(Cleanse, MissingTelemetryIsSoft) {
  const auto c = make_config();
  const auto plans = plan_sessions(c, 6);
  Rng rng(6);
  auto s = simulate_submission(c, plans[0], "w", random_truth(c, 6), Behavior::Reliable, rng, 0.0);
  s.votes[2].playback_total_ms = std::nullopt;
  const auto v = evaluate_submission(s, c, kSecret);
  EXPECT_FALSE(v.accepted);
  EXPECT_EQ(v.failures(), std::vector<Check>{Check::PlaybackDuration});
  EXPECT_TRUE(v.checks.at(Check::PlaybackDuration).soft);
}

TEST(Cleanse, RelaxingAnyThresholdNeverShrinksAcceptedSet) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    auto p = random_population(seed, 40);
    p.config.thresholds.strict = true;
    const auto base = accepted_ids(cleanse(p.subs, p.config, kSecret));
    const std::vector<std::function<void(Thresholds&)>> relaxations{
        [](Thresholds& t) { t.gold_tolerance = 2; },
        [](Thresholds& t) { t.playback_ratio = 2.5; },
        [](Thresholds& t) { t.straightliner_run = 12; },
        [](Thresholds& t) { t.low_variance_sd = 0.0; },
        [](Thresholds& t) { t.strict = false; },
    };
    for (const auto& relax : relaxations) {
      auto cfg = p.config;
      relax(cfg.thresholds);
      const auto relaxed = accepted_ids(cleanse(p.subs, cfg, kSecret));
      EXPECT_TRUE(std::includes(relaxed.begin(), relaxed.end(), base.begin(), base.end())) << seed;
    }
  }
}

TEST(Cleanse, PermutationEquivariantAndDeterministic) {
  for (std::uint64_t seed = 100; seed < 130; ++seed) {
    auto p = random_population(seed, 30);
    const auto a = verdicts_csv(cleanse(p.subs, p.config, kSecret).verdicts);
    Rng rng(seed);
    rng.shuffle(p.subs);
    const auto b = verdicts_csv(cleanse(p.subs, p.config, kSecret).verdicts);
    EXPECT_EQ(a, b);
    EXPECT_EQ(verdicts_csv(cleanse(p.subs, p.config, kSecret).verdicts), b);
  }
}

TEST(Cleanse, VerdictCsvLayout) {
  auto p = random_population(7, 5);
  const auto rows = csv::parse(verdicts_csv(cleanse(p.subs, p.config, kSecret).verdicts));
  ASSERT_EQ(rows.size(), 6u);
  const csv::Row expected_head{"submission_id", "worker_id", "assignment_id", "gold", "trapping",
                               "playback_duration", "brightness_matrix2", "low_variance", "straightliner",
                               "verification_code", "qualification_replay", "setup_replay", "accepted",
                               "acuity", "distance_class", "reasons"};
  EXPECT_EQ(rows[0], expected_head);
}
