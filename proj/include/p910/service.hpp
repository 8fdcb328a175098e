#pragma once

// The study server: decides which section a worker sees next, gates devices,
// leases session plans and persists finished submissions.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "p910/core.hpp"
#include "p910/csv.hpp"
#include "p910/error.hpp"
#include "p910/serialization.hpp"
#include "p910/store.hpp"
#include "p910/testprep.hpp"
#include "p910/verification.hpp"

namespace p910 {

inline constexpr Millis kMinuteMs = 60'000;

enum class Section { Instructions, Qualification, Calibration, Setup, Training, Rating, Done };

constexpr std::string_view to_string(Section s) {
  switch (s) {
    case Section::Instructions: return "instructions";
    case Section::Qualification: return "qualification";
    case Section::Calibration: return "calibration";
    case Section::Setup: return "setup";
    case Section::Training: return "training";
    case Section::Rating: return "rating";
    case Section::Done: return "done";
  }
  return "?";
}

inline std::optional<Section> section_from_string(std::string_view s) {
  for (Section x : {Section::Instructions, Section::Qualification, Section::Calibration, Section::Setup,
                    Section::Training, Section::Rating, Section::Done}) {
    if (to_string(x) == s) return x;
  }
  return std::nullopt;
}

enum class QualificationStatus { None, Passed, Failed };

struct WorkerState {
  std::string worker_id;
  QualificationStatus qualification_status = QualificationStatus::None;
  std::optional<Millis> qualification_at;
  bool calibration_done = false;
  std::optional<Millis> calibration_at;
  std::optional<Millis> last_setup_at;
  std::optional<Millis> last_training_at;
  int sessions_completed = 0;
  // Progress inside the current session.
  bool instructions_done = false;
  bool rating_done = false;
  bool operator==(const WorkerState&) const = default;
};

namespace detail {

inline bool interval_elapsed(const std::optional<Millis>& last, Millis now, int interval_min) {
  return !last || now - *last >= static_cast<Millis>(interval_min) * kMinuteMs;
}

}  // namespace detail

/// Instructions and rating appear in every session; qualification and
/// calibration once per test; setup and training whenever their interval has
/// elapsed.
inline Section next_section(const WorkerState& w, Millis now, const TestConfig& config) {
  if (w.qualification_status == QualificationStatus::Failed) throw Error(ErrorCode::WorkerDisqualified, w.worker_id);
  if (!w.instructions_done) return Section::Instructions;
  if (w.qualification_status != QualificationStatus::Passed) return Section::Qualification;
  if (!w.calibration_done) return Section::Calibration;
  if (detail::interval_elapsed(w.last_setup_at, now, config.setup_interval_min)) return Section::Setup;
  if (detail::interval_elapsed(w.last_training_at, now, config.retraining_interval_min)) return Section::Training;
  if (!w.rating_done) return Section::Rating;
  return Section::Done;
}

/// Records completion of `section`. `passed` only matters for qualification.
inline void complete_section(WorkerState& w, Section section, bool passed, Millis now) {
  switch (section) {
    case Section::Instructions: w.instructions_done = true; break;
    case Section::Qualification:
      w.qualification_status = passed ? QualificationStatus::Passed : QualificationStatus::Failed;
      w.qualification_at = now;
      break;
    case Section::Calibration:
      w.calibration_done = true;
      w.calibration_at = now;
      break;
    case Section::Setup: w.last_setup_at = now; break;
    case Section::Training: w.last_training_at = now; break;
    case Section::Rating:
      w.rating_done = true;
      ++w.sessions_completed;
      break;
    case Section::Done: break;
  }
}

inline void begin_session(WorkerState& w) {
  w.instructions_done = false;
  w.rating_done = false;
}

// ---------------------------------------------------------------------------
// Device gating

enum class DenyReason { None, Resolution, RefreshRate, DeviceKind };

constexpr std::string_view to_string(DenyReason r) {
  switch (r) {
    case DenyReason::None: return "none";
    case DenyReason::Resolution: return "resolution";
    case DenyReason::RefreshRate: return "refresh_rate";
    case DenyReason::DeviceKind: return "device_kind";
  }
  return "?";
}

struct Admission {
  bool admit = true;
  DenyReason reason = DenyReason::None;
};

inline DeviceKind device_kind_from_user_agent(std::string_view ua) {
  for (std::string_view marker : {"Mobi", "Android", "iPhone", "iPad", "iPod"}) {
    if (ua.find(marker) != std::string_view::npos) return DeviceKind::Mobile;
  }
  return DeviceKind::PC;
}

/// The refresh rate is measured by the client and cannot be verified here.
inline Admission gate_device(const DeviceSnapshot& snap, const DevicePolicy& policy) {
  if (!policy.allowed_devices.count(device_kind_from_user_agent(snap.user_agent))) {
    return {false, DenyReason::DeviceKind};
  }
  if (snap.width < policy.min_width || snap.height < policy.min_height) return {false, DenyReason::Resolution};
  if (snap.refresh_hz_estimate < policy.min_refresh_hz) return {false, DenyReason::RefreshRate};
  return {};
}

// ---------------------------------------------------------------------------
// Service

struct VerificationCode {
  std::string code;
  std::string submission_id;
  Millis issued_at = 0;
};

struct QualificationOutcome {
  bool ishihara_pass = false;
  bool acuity_pass = false;
  bool passed = false;
};

struct SetupOutcome {
  bool matrix1_pass = false;
  bool matrix2_pass = false;
  DistanceClass distance_class = DistanceClass::Unknown;
};

inline void to_json(Json& j, const WorkerState& w) {
  j = Json{{"worker_id", w.worker_id},
           {"qualification_status", static_cast<int>(w.qualification_status)},
           {"calibration_done", w.calibration_done},
           {"sessions_completed", w.sessions_completed},
           {"instructions_done", w.instructions_done},
           {"rating_done", w.rating_done}};
  detail::put_opt(j, "qualification_at", w.qualification_at);
  detail::put_opt(j, "calibration_at", w.calibration_at);
  detail::put_opt(j, "last_setup_at", w.last_setup_at);
  detail::put_opt(j, "last_training_at", w.last_training_at);
}
inline void from_json(const Json& j, WorkerState& w) {
  j.at("worker_id").get_to(w.worker_id);
  w.qualification_status = static_cast<QualificationStatus>(j.at("qualification_status").get<int>());
  j.at("calibration_done").get_to(w.calibration_done);
  j.at("sessions_completed").get_to(w.sessions_completed);
  j.at("instructions_done").get_to(w.instructions_done);
  j.at("rating_done").get_to(w.rating_done);
  detail::get_opt(j, "qualification_at", w.qualification_at);
  detail::get_opt(j, "calibration_at", w.calibration_at);
  detail::get_opt(j, "last_setup_at", w.last_setup_at);
  detail::get_opt(j, "last_training_at", w.last_training_at);
}

struct SectionEvent {
  std::string worker_id;
  std::string event;  // "serve:<section>", "qualification:passed" ...
  Millis at = 0;
};

inline constexpr std::string_view kSubmissionCsvHeader[] = {
    "submission_id", "worker_id", "assignment_id", "session_plan_id", "started_at",
    "finished_at",   "verification_code", "payload"};

/// All mutations go through one mutex and one SQLite transaction each, so
/// concurrent HTTP handlers see a serial history.
class StudyService {
 public:
  struct Options {
    std::string db_path;
    std::string secret;
    Millis lease_ms = 2 * 60 * kMinuteMs;
  };

  StudyService(TestConfig config, const std::vector<SessionPlan>& plans, Options options)
      : config_(std::move(config)), options_(std::move(options)), db_(options_.db_path) {
    if (options_.secret.empty()) throw Error(ErrorCode::EmptySecret);
    db_.exec(
        "CREATE TABLE IF NOT EXISTS plans (plan_id TEXT PRIMARY KEY, test_id TEXT NOT NULL, ord INTEGER NOT NULL,"
        " payload TEXT NOT NULL, status TEXT NOT NULL DEFAULT 'open', leased_to TEXT, lease_expires INTEGER);"
        "CREATE TABLE IF NOT EXISTS workers (worker_id TEXT PRIMARY KEY, payload TEXT NOT NULL);"
        "CREATE TABLE IF NOT EXISTS events (seq INTEGER PRIMARY KEY AUTOINCREMENT, worker_id TEXT NOT NULL,"
        " event TEXT NOT NULL, at INTEGER NOT NULL);"
        "CREATE TABLE IF NOT EXISTS submissions (submission_id TEXT PRIMARY KEY, test_id TEXT NOT NULL,"
        " worker_id TEXT NOT NULL, plan_id TEXT NOT NULL UNIQUE, finished_at INTEGER NOT NULL,"
        " code TEXT NOT NULL, payload TEXT NOT NULL);"
        "CREATE TABLE IF NOT EXISTS pending_votes (plan_id TEXT NOT NULL, clip_id TEXT NOT NULL,"
        " payload TEXT NOT NULL, PRIMARY KEY (plan_id, clip_id));");
    store::Transaction tx(db_);
    for (std::size_t i = 0; i < plans.size(); ++i) {
      db_.prepare("INSERT OR IGNORE INTO plans (plan_id, test_id, ord, payload) VALUES (?, ?, ?, ?)")
          .bind_all(plans[i].session_plan_id, config_.test_id, static_cast<std::int64_t>(i), Json(plans[i]).dump())
          .run();
    }
    tx.commit();
  }

  const TestConfig& config() const { return config_; }

  /// Crash-injection hook, called at named points inside accept_submission.
  void set_fail_point(std::function<void(std::string_view)> hook) {
    std::lock_guard lock(mu_);
    fail_point_ = std::move(hook);
  }

  WorkerState worker(const std::string& worker_id) {
    std::lock_guard lock(mu_);
    return load_worker(worker_id);
  }

  /// Section to serve now; logged so the history can be replayed.
  Section next_section(const std::string& worker_id, Millis now) {
    std::lock_guard lock(mu_);
    WorkerState w = load_worker(worker_id);
    const Section s = p910::next_section(w, now, config_);
    log_event(worker_id, "serve:" + std::string(to_string(s)), now);
    return s;
  }

  void complete(const std::string& worker_id, Section section, Millis now) {
    if (section == Section::Qualification || section == Section::Setup || section == Section::Rating) {
      throw Error(ErrorCode::MalformedInput, "section completes through its own endpoint");
    }
    std::lock_guard lock(mu_);
    store::Transaction tx(db_);
    WorkerState w = load_worker(worker_id);
    if (w.qualification_status == QualificationStatus::Failed) throw Error(ErrorCode::WorkerDisqualified, worker_id);
    complete_section(w, section, true, now);
    save_worker(w);
    log_event(worker_id, "complete:" + std::string(to_string(section)), now);
    tx.commit();
  }

  void start_session(const std::string& worker_id) {
    std::lock_guard lock(mu_);
    store::Transaction tx(db_);
    WorkerState w = load_worker(worker_id);
    begin_session(w);
    save_worker(w);
    tx.commit();
  }

  /// Online qualification verdict: color vision and acuity must both pass.
  QualificationOutcome submit_qualification(const std::string& worker_id, const QualificationRecord& record,
                                            Millis now) {
    const auto& assets = config_.qualification_assets;
    QualificationOutcome out;
    out.ishihara_pass = evaluate_ishihara(record.ishihara_answers, assets.ishihara_key);
    out.acuity_pass = !record.acuity.ring_trials.empty() &&
                      record.acuity.ring_trials.size() <= static_cast<std::size_t>(kMaxLandoltTrials) &&
                      evaluate_acuity(record.acuity.ring_trials, assets.required_correct);
    out.passed = out.ishihara_pass && out.acuity_pass;

    std::lock_guard lock(mu_);
    store::Transaction tx(db_);
    WorkerState w = load_worker(worker_id);
    if (w.qualification_status == QualificationStatus::Failed) throw Error(ErrorCode::WorkerDisqualified, worker_id);
    if (w.qualification_status != QualificationStatus::Passed) {
      complete_section(w, Section::Qualification, out.passed, now);
      save_worker(w);
      log_event(worker_id, out.passed ? "qualification:passed" : "qualification:failed", now);
    }
    tx.commit();
    return out;
  }

  SetupOutcome submit_setup(const std::string& worker_id, const SetupRecord& record, Millis now) {
    const auto& assets = config_.qualification_assets;
    SetupOutcome out;
    out.matrix1_pass = score_matrix(record.matrix1.reported, generate_matrix(assets.matrix1_seed).truth_counts);
    out.matrix2_pass = score_matrix(record.matrix2.reported, generate_matrix(assets.matrix2_seed).truth_counts);
    out.distance_class = record.distance_answers.size() == 3
                             ? classify_viewing_distance(record.distance_answers, assets.distance_key)
                             : DistanceClass::Unknown;
    std::lock_guard lock(mu_);
    store::Transaction tx(db_);
    WorkerState w = require_qualified(worker_id);
    complete_section(w, Section::Setup, true, now);
    save_worker(w);
    log_event(worker_id, "complete:setup", now);
    tx.commit();
    return out;
  }

  /// Hands out an open plan (or one whose lease expired). Plans whose gold
  /// clip this worker has already rated are avoided when possible.
  SessionPlan lease_plan(const std::string& worker_id, Millis now) {
    std::lock_guard lock(mu_);
    store::Transaction tx(db_);
    const WorkerState w = require_qualified(worker_id);
    if (p910::next_section(w, now, config_) != Section::Rating) {
      throw Error(ErrorCode::MalformedInput, "worker is not at the rating section");
    }

    // An unexpired lease held by this worker is returned as-is.
    {
      auto st = db_.prepare(
          "SELECT payload FROM plans WHERE status = 'leased' AND leased_to = ? AND lease_expires > ? ORDER BY ord "
          "LIMIT 1");
      st.bind_all(worker_id, now);
      if (st.step()) {
        auto plan = parse_json(st.text_at(0), "plan").get<SessionPlan>();
        tx.commit();
        return plan;
      }
    }

    std::set<std::string> seen_gold;
    {
      auto st = db_.prepare("SELECT payload FROM submissions WHERE worker_id = ?");
      st.bind_all(worker_id);
      while (st.step()) {
        const auto sub = parse_json(st.text_at(0), "submission").get<Submission>();
        for (const auto& v : sub.votes) {
          const Clip* c = config_.find_clip(v.clip_id);
          if (c && c->role == ClipRole::Gold) seen_gold.insert(c->clip_id);
        }
      }
    }

    std::optional<SessionPlan> chosen;
    std::optional<SessionPlan> fallback;
    {
      auto st = db_.prepare(
          "SELECT payload FROM plans WHERE test_id = ? AND (status = 'open' OR (status = 'leased' AND "
          "lease_expires <= ?)) ORDER BY ord");
      st.bind_all(config_.test_id, now);
      while (st.step() && !chosen) {
        auto plan = parse_json(st.text_at(0), "plan").get<SessionPlan>();
        const PlanItem* gold = plan.item_with_role(ClipRole::Gold);
        if (gold == nullptr || !seen_gold.count(gold->clip_id)) {
          chosen = std::move(plan);
        } else if (!fallback) {
          fallback = std::move(plan);
        }
      }
    }
    if (!chosen) chosen = std::move(fallback);
    if (!chosen) throw Error(ErrorCode::NoPlanAvailable);

    db_.prepare("UPDATE plans SET status = 'leased', leased_to = ?, lease_expires = ? WHERE plan_id = ?")
        .bind_all(worker_id, now + options_.lease_ms, chosen->session_plan_id)
        .run();
    db_.prepare("DELETE FROM pending_votes WHERE plan_id = ?").bind_all(chosen->session_plan_id).run();
    log_event(worker_id, "lease:" + chosen->session_plan_id, now);
    tx.commit();
    return *chosen;
  }

  /// Interim vote upload; the last upload per clip wins.
  void store_votes(const std::string& plan_id, const std::vector<Vote>& votes) {
    std::lock_guard lock(mu_);
    store::Transaction tx(db_);
    load_plan(plan_id);
    for (const auto& v : votes) {
      db_.prepare("INSERT OR REPLACE INTO pending_votes (plan_id, clip_id, payload) VALUES (?, ?, ?)")
          .bind_all(plan_id, v.clip_id, Json(v).dump())
          .run();
    }
    tx.commit();
  }

  std::vector<Vote> pending_votes(const std::string& plan_id) {
    std::lock_guard lock(mu_);
    const SessionPlan plan = load_plan(plan_id);
    std::map<std::string, Vote> by_clip;
    auto st = db_.prepare("SELECT payload FROM pending_votes WHERE plan_id = ?");
    st.bind_all(plan_id);
    while (st.step()) {
      auto v = parse_json(st.text_at(0), "vote").get<Vote>();
      by_clip[v.clip_id] = v;
    }
    std::vector<Vote> out;
    for (const auto& item : plan.ordered_items) {
      if (auto it = by_clip.find(item.clip_id); it != by_clip.end()) out.push_back(it->second);
    }
    return out;
  }

  /// Persists a finished session and returns its verification code. The
  /// insert and the plan status change commit together or not at all.
  /// Resubmitting an identical payload returns the original code.
  VerificationCode accept_submission(Submission s, Millis now) {
    std::lock_guard lock(mu_);
    const SessionPlan plan = load_plan(s.session_plan_id);
    if (s.submission_id.empty()) s.submission_id = s.session_plan_id + ":" + s.worker_id;
    if (s.test_id.empty()) s.test_id = config_.test_id;
    check_complete(s, plan);

    s.verification_code = issue_verification_code(s.submission_id, options_.secret);
    const std::string payload = Json(s).dump();

    {
      auto st = db_.prepare("SELECT submission_id, payload, code, finished_at FROM submissions WHERE plan_id = ? OR "
                            "submission_id = ?");
      st.bind_all(s.session_plan_id, s.submission_id);
      if (st.step()) {
        if (st.text_at(1) == payload) return {st.text_at(2), st.text_at(0), st.int_at(3)};
        throw Error(ErrorCode::DuplicateSubmission, s.session_plan_id);
      }
    }

    store::Transaction tx(db_);
    db_.prepare(
           "INSERT INTO submissions (submission_id, test_id, worker_id, plan_id, finished_at, code, payload) "
           "VALUES (?, ?, ?, ?, ?, ?, ?)")
        .bind_all(s.submission_id, s.test_id, s.worker_id, s.session_plan_id, s.finished_at, s.verification_code,
                  payload)
        .run();
    hit("after_insert");
    db_.prepare("UPDATE plans SET status = 'done', leased_to = ?, lease_expires = NULL WHERE plan_id = ?")
        .bind_all(s.worker_id, s.session_plan_id)
        .run();
    db_.prepare("DELETE FROM pending_votes WHERE plan_id = ?").bind_all(s.session_plan_id).run();
    WorkerState w = load_worker(s.worker_id);
    complete_section(w, Section::Rating, true, now);
    save_worker(w);
    log_event(s.worker_id, "complete:rating", now);
    hit("before_commit");
    tx.commit();
    return {s.verification_code, s.submission_id, now};
  }

  std::vector<Submission> submissions(const std::string& test_id, std::optional<Millis> since = std::nullopt) {
    std::lock_guard lock(mu_);
    if (test_id != config_.test_id) throw Error(ErrorCode::UnknownTest, test_id);
    auto st = db_.prepare(
        "SELECT payload FROM submissions WHERE test_id = ? AND finished_at >= ? ORDER BY submission_id");
    st.bind_all(test_id, since.value_or(INT64_MIN));
    std::vector<Submission> out;
    while (st.step()) out.push_back(parse_json(st.text_at(0), "submission").get<Submission>());
    return out;
  }

  /// Batch file for the result parser: one row per submission, sorted by id,
  /// with the full payload (telemetry and raw answers) as JSON.
  std::string export_submissions(const std::string& test_id, std::optional<Millis> since = std::nullopt) {
    std::string out = csv::format_row(csv::Row(std::begin(kSubmissionCsvHeader), std::end(kSubmissionCsvHeader)));
    for (const auto& s : submissions(test_id, since)) {
      out += csv::format_row({s.submission_id, s.worker_id, s.assignment_id.value_or(""), s.session_plan_id,
                              std::to_string(s.started_at), std::to_string(s.finished_at), s.verification_code,
                              Json(s).dump()});
    }
    return out;
  }

  std::vector<SectionEvent> events() {
    std::lock_guard lock(mu_);
    std::vector<SectionEvent> out;
    auto st = db_.prepare("SELECT worker_id, event, at FROM events ORDER BY seq");
    while (st.step()) out.push_back({st.text_at(0), st.text_at(1), st.int_at(2)});
    return out;
  }

  std::string plan_status(const std::string& plan_id) {
    std::lock_guard lock(mu_);
    auto st = db_.prepare("SELECT status FROM plans WHERE plan_id = ?");
    st.bind_all(plan_id);
    if (!st.step()) throw Error(ErrorCode::UnknownPlan, plan_id);
    return st.text_at(0);
  }

 private:
  WorkerState load_worker(const std::string& worker_id) {
    auto st = db_.prepare("SELECT payload FROM workers WHERE worker_id = ?");
    st.bind_all(worker_id);
    if (st.step()) return parse_json(st.text_at(0), "worker").get<WorkerState>();
    WorkerState w;
    w.worker_id = worker_id;
    return w;
  }

  void save_worker(const WorkerState& w) {
    db_.prepare("INSERT OR REPLACE INTO workers (worker_id, payload) VALUES (?, ?)")
        .bind_all(w.worker_id, Json(w).dump())
        .run();
  }

  WorkerState require_qualified(const std::string& worker_id) {
    WorkerState w = load_worker(worker_id);
    if (w.qualification_status != QualificationStatus::Passed) {
      throw Error(ErrorCode::WorkerDisqualified, worker_id + " has not passed qualification");
    }
    return w;
  }

  SessionPlan load_plan(const std::string& plan_id) {
    auto st = db_.prepare("SELECT payload FROM plans WHERE plan_id = ?");
    st.bind_all(plan_id);
    if (!st.step()) throw Error(ErrorCode::UnknownPlan, plan_id);
    return parse_json(st.text_at(0), "plan").get<SessionPlan>();
  }

  void log_event(const std::string& worker_id, const std::string& event, Millis at) {
    db_.prepare("INSERT INTO events (worker_id, event, at) VALUES (?, ?, ?)").bind_all(worker_id, event, at).run();
  }

  void check_complete(const Submission& s, const SessionPlan& plan) const {
    std::map<std::string, int> expected;
    for (const auto& item : plan.ordered_items) expected[item.clip_id] += 1;
    std::map<std::string, int> got;
    const RatingRange range = config_.method.rating_range();
    for (const auto& v : s.votes) {
      got[v.clip_id] += 1;
      if (!range.contains(v.rating)) {
        throw Error(ErrorCode::IncompleteSubmission, "rating out of scale for " + v.clip_id);
      }
      if (v.playback_count < 1) throw Error(ErrorCode::IncompleteSubmission, "vote before playback: " + v.clip_id);
    }
    if (got != expected) throw Error(ErrorCode::IncompleteSubmission, "votes do not match plan " + plan.session_plan_id);
  }

  void hit(std::string_view point) {
    if (fail_point_) fail_point_(point);
  }

  TestConfig config_;
  Options options_;
  store::Database db_;
  std::mutex mu_;
  std::function<void(std::string_view)> fail_point_;
};

/// Reads the service's export file back into submissions.
inline std::vector<Submission> read_submission_batch(std::string_view text) {
  const csv::Table table(text);
  if (!table.has("payload")) throw Error(ErrorCode::MalformedInput, "missing payload column");
  std::vector<Submission> out;
  for (std::size_t r = 0; r < table.size(); ++r) {
    try {
      out.push_back(parse_json(table.at(r, "payload"), "payload").get<Submission>());
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MalformedInput, "row " + std::to_string(r + 1) + ": " + e.what());
    }
  }
  return out;
}

/// Event-log safety check: no worker is served a rating section before a
/// passed qualification. Returns the offending worker ids.
inline std::vector<std::string> replay_rating_violations(const std::vector<SectionEvent>& events) {
  std::set<std::string> qualified;
  std::set<std::string> violators;
  for (const auto& e : events) {
    if (e.event == "qualification:passed") qualified.insert(e.worker_id);
    if ((e.event == "serve:rating" || e.event.rfind("lease:", 0) == 0) && !qualified.count(e.worker_id)) {
      violators.insert(e.worker_id);
    }
  }
  return {violators.begin(), violators.end()};
}

}  // namespace p910
