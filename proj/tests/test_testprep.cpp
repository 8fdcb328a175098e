#include <gtest/gtest.h>

#include <map>
#include <set>

#include "p910/testprep.hpp"
#include "support.hpp"

using namespace p910;
using p910::testing::ConfigShape;
using p910::testing::make_config;

namespace {

Clip candidate(const std::string& id, Millis duration) {
  Clip c;
  c.clip_id = id;
  c.url = id + ".mp4";
  c.duration_ms = duration;
  return c;
}

void expect_composition(const TestConfig& c, const std::vector<SessionPlan>& plans) {
  for (const auto& p : plans) {
    std::map<ClipRole, int> roles;
    std::set<std::string> ids;
    for (std::size_t i = 0; i < p.ordered_items.size(); ++i) {
      const auto& item = p.ordered_items[i];
      ++roles[item.role];
      EXPECT_TRUE(ids.insert(item.clip_id).second) << "duplicate clip in " << p.session_plan_id;
      EXPECT_EQ(item.position, static_cast<int>(i));
      EXPECT_EQ(c.find_clip(item.clip_id)->role, item.role);
    }
    EXPECT_EQ(roles[ClipRole::Gold], 1);
    EXPECT_EQ(roles[ClipRole::Trapping], 1);
    EXPECT_EQ(roles[ClipRole::Test] + roles[ClipRole::Reference], c.session_size);
    EXPECT_NE(p.ordered_items.front().role, ClipRole::Gold);
    EXPECT_NE(p.ordered_items.front().role, ClipRole::Trapping);
  }
}

std::map<std::string, int> appearances(const std::vector<SessionPlan>& plans) {
  std::map<std::string, int> out;
  for (const auto& p : plans) {
    for (const auto& item : p.ordered_items) {
      if (item.role == ClipRole::Test || item.role == ClipRole::Reference) ++out[item.clip_id];
    }
  }
  return out;
}

}  // namespace

TEST(Trapping, InsertPointNearMidpoint) {
  const std::vector<TrappingMessage> msgs{{2, "Please select {rating}"}};
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto m = build_trapping_manifests({candidate("c", 8000)}, msgs, {1, 5}, seed);
    ASSERT_EQ(m.size(), 1u);
    EXPECT_GE(m[0].insert_at_ms, 3600);
    EXPECT_LE(m[0].insert_at_ms, 4400);
    EXPECT_EQ(m[0].expected_rating, 2);
    EXPECT_EQ(m[0].message_text, "Please select 2");
    EXPECT_EQ(m[0].display_ms, kTrappingDisplayMs);
  }
}

TEST(Trapping, RatingsStayInScaleAndAreDeterministic) {
  std::vector<TrappingMessage> msgs;
  for (int r = 1; r <= 5; ++r) msgs.push_back({r, "Select {rating} now"});
  std::vector<Clip> cands;
  for (int i = 0; i < 30; ++i) cands.push_back(candidate("c" + std::to_string(i), 5000 + 100 * i));
  const auto a = build_trapping_manifests(cands, msgs, {1, 5}, 11);
  const auto b = build_trapping_manifests(cands, msgs, {1, 5}, 11);
  EXPECT_EQ(a, b);
  std::set<std::string> outputs;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_GE(a[i].expected_rating, 1);
    EXPECT_LE(a[i].expected_rating, 5);
    EXPECT_GT(a[i].insert_at_ms, 0);
    EXPECT_LT(a[i].insert_at_ms, cands[i].duration_ms);
    EXPECT_TRUE(outputs.insert(a[i].output_clip_id).second);
    const auto& cmd = a[i].command_template;
    EXPECT_NE(cmd.find("{input}"), std::string::npos);
    EXPECT_NE(cmd.find("{output}"), std::string::npos);
    EXPECT_NE(cmd.find("-crf 17"), std::string::npos);
  }
  EXPECT_NE(build_trapping_manifests(cands, msgs, {1, 5}, 12), a);
}

TEST(Trapping, Errors) {
  const std::vector<TrappingMessage> msgs{{2, "x"}};
  auto code_of = [](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::IoFailure;
  };
  EXPECT_EQ(code_of([&] { build_trapping_manifests({}, msgs, {1, 5}, 1); }), ErrorCode::NoCandidates);
  EXPECT_EQ(code_of([&] { build_trapping_manifests({candidate("c", 8000)}, {}, {1, 5}, 1); }), ErrorCode::NoMessages);
  EXPECT_EQ(code_of([&] { build_trapping_manifests({candidate("c", 8000)}, {{7, "x"}}, {1, 5}, 1); }),
            ErrorCode::ConfigInvalid);
}

TEST(PlanSessions, PaperConfiguration) {
  const auto c = make_config();
  const auto plans = plan_sessions(c, 7);
  ASSERT_EQ(plans.size(), 432u);
  expect_composition(c, plans);
  const auto counts = appearances(plans);
  ASSERT_EQ(counts.size(), 144u);
  for (const auto& [id, n] : counts) EXPECT_EQ(n, 30) << id;
  std::set<std::string> ids;
  for (const auto& p : plans) EXPECT_TRUE(ids.insert(p.session_plan_id).second);
}

TEST(PlanSessions, MinimalCase) {
  const auto c = make_config({MethodKind::ACR, 1, 1, 1, 1, 8000, 1, 1});
  const auto plans = plan_sessions(c, 3);
  ASSERT_EQ(plans.size(), 1u);
  ASSERT_EQ(plans[0].ordered_items.size(), 3u);
  EXPECT_EQ(plans[0].ordered_items[0].role, ClipRole::Test);
}

TEST(PlanSessions, Deterministic) {
  const auto c = make_config();
  EXPECT_EQ(plan_sessions(c, 99), plan_sessions(c, 99));
  EXPECT_NE(plan_sessions(c, 99), plan_sessions(c, 100));
}

TEST(PlanSessions, BalanceOnRandomConfigs) {
  Rng rng(31);
  for (int trial = 0; trial < 150; ++trial) {
    ConfigShape shape;
    const MethodKind kinds[] = {MethodKind::ACR, MethodKind::ACR_HR, MethodKind::DCR, MethodKind::CCR};
    shape.method = kinds[rng.below(4)];
    shape.sequences = static_cast<std::size_t>(rng.between(1, 60));
    shape.hrcs = static_cast<std::size_t>(rng.between(1, 8));
    shape.session_size = static_cast<int>(rng.between(1, 12));
    shape.votes_target = static_cast<int>(rng.between(1, 20));
    shape.golds = static_cast<std::size_t>(rng.between(1, 3));
    shape.traps = static_cast<std::size_t>(rng.between(1, 3));
    const auto c = make_config(shape);
    if (!validate_config(c).empty()) continue;
    if (c.rated_clips().size() < static_cast<std::size_t>(shape.session_size)) {
      try {
        plan_sessions(c, 1);
        FAIL();
      } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InsufficientClips);
      }
      continue;
    }
    const auto plans = plan_sessions(c, rng.next());
    expect_composition(c, plans);
    const auto counts = appearances(plans);
    ASSERT_EQ(counts.size(), c.rated_clips().size());
    int lo = 1 << 30, hi = 0;
    for (const auto& [id, n] : counts) {
      lo = std::min(lo, n);
      hi = std::max(hi, n);
    }
    EXPECT_LE(hi - lo, 1);
    EXPECT_GE(lo, shape.votes_target);
    if (c.method.paired()) {
      for (const auto& p : plans) {
        for (const auto& item : p.ordered_items) EXPECT_EQ(item.reference_clip_id, c.find_clip(item.clip_id)->reference_id);
      }
    }
  }
}

TEST(PlanSessions, GoldAndTrappingRoundRobin) {
  const auto c = make_config();
  const auto plans = plan_sessions(c, 5);
  std::map<std::string, int> gold, trap;
  for (const auto& p : plans) {
    ++gold[p.item_with_role(ClipRole::Gold)->clip_id];
    ++trap[p.item_with_role(ClipRole::Trapping)->clip_id];
  }
  for (const auto& [id, n] : gold) EXPECT_EQ(n, 72) << id;
  for (const auto& [id, n] : trap) EXPECT_EQ(n, 72) << id;
}

TEST(PlanSessions, Errors) {
  auto c = make_config({MethodKind::ACR, 5, 1, 10, 1, 8000, 1, 1});
  try {
    plan_sessions(c, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientClips);
  }
  c = make_config({MethodKind::ACR, 12, 1, 10, 1, 8000, 0, 1});
  try {
    plan_sessions(c, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_TRUE(e.code() == ErrorCode::InsufficientGoldOrTrapping || e.code() == ErrorCode::ConfigInvalid);
  }
  c = make_config();
  c.method.scale_points = 7;
  EXPECT_THROW(plan_sessions(c, 1), Error);
}

TEST(PlanSessions, CcrOrderRandomizedOnlyWhenEnabled) {
  auto c = make_config({MethodKind::CCR, 40, 4, 10, 5, 8000, 2, 2});
  auto plans = plan_sessions(c, 2);
  int first = 0, total = 0;
  for (const auto& p : plans) {
    for (const auto& item : p.ordered_items) {
      first += item.reference_first ? 1 : 0;
      ++total;
    }
  }
  EXPECT_GT(first, total / 4);
  EXPECT_LT(first, 3 * total / 4);
  c.method.randomize_ccr_order = false;
  for (const auto& p : plan_sessions(c, 2)) {
    for (const auto& item : p.ordered_items) EXPECT_TRUE(item.reference_first);
  }
}

TEST(Obfuscation, RoundTrip) {
  Rng rng(4);
  for (int i = 0; i < 300; ++i) {
    std::string truth;
    for (std::uint64_t k = 0, n = rng.below(40); k < n; ++k) truth.push_back(static_cast<char>(rng.between(1, 255)));
    const auto token = obfuscate_answer_key(truth, "s3cret");
    EXPECT_EQ(deobfuscate_answer_key(token, "s3cret"), truth);
  }
}

TEST(Obfuscation, TokenHidesPlaintext) {
  for (const std::string truth : {"14", "4,10", "73", "6", "left_better", "12"}) {
    const auto token = obfuscate_answer_key(truth, "k");
    EXPECT_EQ(token.find(truth), std::string::npos) << truth;
    EXPECT_EQ(token.find_first_of("0123456789"), std::string::npos);
  }
}

TEST(Obfuscation, WrongSecretNeverSilentlySucceeds) {
  const auto token = obfuscate_answer_key("14", "right");
  try {
    const auto plain = deobfuscate_answer_key(token, "wrong");
    EXPECT_NE(plain, "14");
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedToken);
  }
  std::string tampered = token;
  tampered[tampered.size() / 2] = tampered[tampered.size() / 2] == 'a' ? 'b' : 'a';
  EXPECT_THROW(deobfuscate_answer_key(tampered, "right"), Error);
  EXPECT_THROW(deobfuscate_answer_key("xyz!", "right"), Error);
  try {
    obfuscate_answer_key("14", "");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptySecret);
  }
}

TEST(PlatformBatch, OneRowPerPlan) {
  const auto c = make_config();
  const auto plans = plan_sessions(c, 7);
  const auto batch = export_platform_batch(plans, "https://host/rate", c.test_id);
  const auto rows = csv::parse(batch.csv);
  ASSERT_EQ(rows.size(), 433u);
  EXPECT_EQ(rows[0], csv::Row{"session_url"});
  for (std::size_t k = 0; k < plans.size(); ++k) {
    EXPECT_EQ(plan_from_url(rows[k + 1][0]), plans[k].session_plan_id);
  }
  EXPECT_EQ(export_platform_batch(plans, "https://host/rate", c.test_id).csv, batch.csv);
  EXPECT_EQ(export_platform_batch(plans, "https://host/rate", c.test_id).description, batch.description);
  EXPECT_THROW(export_platform_batch({}, "https://host/rate"), Error);
}

TEST(PlatformBatch, UrlEncodingRoundTrip) {
  for (const std::string id : {"t1-s00001", "a b&c=d", "ü/ß?#", "%41"}) {
    EXPECT_EQ(plan_from_url(session_url("https://h/x", id)), id);
    EXPECT_EQ(plan_from_url(session_url("https://h/x?lang=en", id)), id);
  }
  EXPECT_EQ(session_url("https://h/x?lang=en", "p1"), "https://h/x?lang=en&plan=p1");
  EXPECT_FALSE(plan_from_url("https://h/x?lang=en").has_value());
}

TEST(PlanSet, JsonRoundTrip) {
  const auto c = make_config({MethodKind::DCR, 20, 4, 5, 3, 8000, 2, 2});
  const auto plans = plan_sessions(c, 8);
  const auto path = p910::testing::temp_path("plans.json");
  write_text_file(path.string(), dump(plan_set_json(c.test_id, 8, plans)));
  EXPECT_EQ(load_plan_set(path.string()), plans);
}
