#pragma once

// JSON schema for configs, manifests, submissions and plans. Every document
// written at top level carries `schema_version`.

#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "json.hpp"
#include "p910/core.hpp"
#include "p910/error.hpp"

namespace p910 {

using Json = nlohmann::ordered_json;

NLOHMANN_JSON_SERIALIZE_ENUM(MethodKind, {{MethodKind::ACR, "ACR"},
                                          {MethodKind::ACR_HR, "ACR-HR"},
                                          {MethodKind::DCR, "DCR"},
                                          {MethodKind::CCR, "CCR"}})
NLOHMANN_JSON_SERIALIZE_ENUM(ClipRole, {{ClipRole::Test, "test"},
                                        {ClipRole::Reference, "reference"},
                                        {ClipRole::Gold, "gold"},
                                        {ClipRole::Trapping, "trapping"},
                                        {ClipRole::Training, "training"}})
NLOHMANN_JSON_SERIALIZE_ENUM(DeviceKind, {{DeviceKind::Mobile, "mobile"}, {DeviceKind::PC, "pc"}})
NLOHMANN_JSON_SERIALIZE_ENUM(Direction, {{Direction::N, "N"},
                                         {Direction::NE, "NE"},
                                         {Direction::E, "E"},
                                         {Direction::SE, "SE"},
                                         {Direction::S, "S"},
                                         {Direction::SW, "SW"},
                                         {Direction::W, "W"},
                                         {Direction::NW, "NW"}})
NLOHMANN_JSON_SERIALIZE_ENUM(ShapeKind, {{ShapeKind::Circle, "circle"}, {ShapeKind::Triangle, "triangle"}})
NLOHMANN_JSON_SERIALIZE_ENUM(DistanceAnswer, {{DistanceAnswer::LeftBetter, "left_better"},
                                              {DistanceAnswer::RightBetter, "right_better"},
                                              {DistanceAnswer::Same, "same"}})
NLOHMANN_JSON_SERIALIZE_ENUM(DistanceClass, {{DistanceClass::TooClose, "too_close"},
                                             {DistanceClass::Expected, "expected"},
                                             {DistanceClass::TooFar, "too_far"},
                                             {DistanceClass::Unknown, "unknown"}})

namespace detail {

template <class T>
void put_opt(Json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

template <class T>
void get_opt(const Json& j, const char* key, std::optional<T>& v) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) {
    v.reset();
  } else {
    v = it->template get<T>();
  }
}

template <class T>
void get_or(const Json& j, const char* key, T& v) {
  auto it = j.find(key);
  if (it != j.end()) it->get_to(v);
}

}  // namespace detail

// --- qualification types ---------------------------------------------------

inline void to_json(Json& j, const PlateAnswer& a) {
  j = Json{{"plate_id", a.plate_id}, {"reported_value", a.reported_value}};
}
inline void from_json(const Json& j, PlateAnswer& a) {
  j.at("plate_id").get_to(a.plate_id);
  j.at("reported_value").get_to(a.reported_value);
}

inline void to_json(Json& j, const LandoltTrial& t) {
  j = Json{{"gap_direction_true", t.gap_direction_true},
           {"gap_direction_reported", t.gap_direction_reported},
           {"gap_px", t.gap_px},
           {"diameter_px", t.diameter_px}};
}
inline void from_json(const Json& j, LandoltTrial& t) {
  j.at("gap_direction_true").get_to(t.gap_direction_true);
  j.at("gap_direction_reported").get_to(t.gap_direction_reported);
  j.at("gap_px").get_to(t.gap_px);
  j.at("diameter_px").get_to(t.diameter_px);
}

inline void to_json(Json& j, const AcuityRecord& a) {
  j = Json{{"adjusted_card_width_px", a.adjusted_card_width_px},
           {"pixel_pitch_mm", a.pixel_pitch_mm},
           {"ring_trials", a.ring_trials}};
}
inline void from_json(const Json& j, AcuityRecord& a) {
  detail::get_or(j, "adjusted_card_width_px", a.adjusted_card_width_px);
  j.at("pixel_pitch_mm").get_to(a.pixel_pitch_mm);
  j.at("ring_trials").get_to(a.ring_trials);
}

inline void to_json(Json& j, const QualificationRecord& q) {
  j = Json{{"ishihara_answers", q.ishihara_answers}, {"acuity", q.acuity}};
  detail::put_opt(j, "passed_at", q.passed_at);
}
inline void from_json(const Json& j, QualificationRecord& q) {
  j.at("ishihara_answers").get_to(q.ishihara_answers);
  j.at("acuity").get_to(q.acuity);
  detail::get_opt(j, "passed_at", q.passed_at);
}

inline void to_json(Json& j, const ShapeCounts& c) {
  j = Json{{"circles", c.circles}, {"triangles", c.triangles}};
}
inline void from_json(const Json& j, ShapeCounts& c) {
  j.at("circles").get_to(c.circles);
  j.at("triangles").get_to(c.triangles);
}

inline void to_json(Json& j, const Shape& s) {
  j = Json{{"kind", s.kind}, {"size", s.size}, {"x", s.x}, {"y", s.y}, {"foreground_gray", s.foreground_gray}};
}
inline void from_json(const Json& j, Shape& s) {
  j.at("kind").get_to(s.kind);
  j.at("size").get_to(s.size);
  j.at("x").get_to(s.x);
  j.at("y").get_to(s.y);
  j.at("foreground_gray").get_to(s.foreground_gray);
}

inline void to_json(Json& j, const MatrixCell& c) {
  j = Json{{"background_gray", c.background_gray}};
  detail::put_opt(j, "shape", c.shape);
}
inline void from_json(const Json& j, MatrixCell& c) {
  j.at("background_gray").get_to(c.background_gray);
  detail::get_opt(j, "shape", c.shape);
}

inline void to_json(Json& j, const MatrixSpec& m) {
  j = Json{{"grid", m.cells}, {"truth_counts", m.truth_counts}};
}
inline void from_json(const Json& j, MatrixSpec& m) {
  j.at("grid").get_to(m.cells);
  j.at("truth_counts").get_to(m.truth_counts);
}

inline void to_json(Json& j, const Matrix1Record& m) {
  j = Json{{"reported", m.reported}, {"truth", m.truth}, {"attempts", m.attempts}};
}
inline void from_json(const Json& j, Matrix1Record& m) {
  j.at("reported").get_to(m.reported);
  j.at("truth").get_to(m.truth);
  detail::get_or(j, "attempts", m.attempts);
}

inline void to_json(Json& j, const Matrix2Record& m) {
  j = Json{{"reported", m.reported}, {"truth", m.truth}};
}
inline void from_json(const Json& j, Matrix2Record& m) {
  j.at("reported").get_to(m.reported);
  j.at("truth").get_to(m.truth);
}

inline void to_json(Json& j, const SetupRecord& s) {
  j = Json{{"matrix1", s.matrix1},
           {"matrix2", s.matrix2},
           {"distance_answers", s.distance_answers},
           {"distance_class", s.distance_class}};
}
inline void from_json(const Json& j, SetupRecord& s) {
  j.at("matrix1").get_to(s.matrix1);
  j.at("matrix2").get_to(s.matrix2);
  j.at("distance_answers").get_to(s.distance_answers);
  detail::get_or(j, "distance_class", s.distance_class);
}

// --- core types ------------------------------------------------------------

inline void to_json(Json& j, const TestMethod& m) {
  j = Json{{"kind", m.kind}, {"scale_points", m.scale_points}, {"randomize_ccr_order", m.randomize_ccr_order}};
}
inline void from_json(const Json& j, TestMethod& m) {
  j.at("kind").get_to(m.kind);
  j.at("scale_points").get_to(m.scale_points);
  detail::get_or(j, "randomize_ccr_order", m.randomize_ccr_order);
}

inline void to_json(Json& j, const Clip& c) {
  j = Json{{"clip_id", c.clip_id},
           {"url", c.url},
           {"role", c.role},
           {"duration_ms", c.duration_ms},
           {"source_id", c.source_id}};
  detail::put_opt(j, "hrc_id", c.hrc_id);
  detail::put_opt(j, "reference_id", c.reference_id);
  detail::put_opt(j, "expected_rating", c.expected_rating);
  j["gold_tolerance"] = c.gold_tolerance;
  detail::put_opt(j, "anchor_rating", c.anchor_rating);
  j["native_width"] = c.native_width;
  j["native_height"] = c.native_height;
}
inline void from_json(const Json& j, Clip& c) {
  j.at("clip_id").get_to(c.clip_id);
  detail::get_or(j, "url", c.url);
  j.at("role").get_to(c.role);
  j.at("duration_ms").get_to(c.duration_ms);
  detail::get_or(j, "source_id", c.source_id);
  detail::get_opt(j, "hrc_id", c.hrc_id);
  detail::get_opt(j, "reference_id", c.reference_id);
  detail::get_opt(j, "expected_rating", c.expected_rating);
  detail::get_or(j, "gold_tolerance", c.gold_tolerance);
  detail::get_opt(j, "anchor_rating", c.anchor_rating);
  detail::get_or(j, "native_width", c.native_width);
  detail::get_or(j, "native_height", c.native_height);
}

inline void to_json(Json& j, const DevicePolicy& p) {
  j = Json{{"allowed_devices", p.allowed_devices},
           {"min_width", p.min_width},
           {"min_height", p.min_height},
           {"min_refresh_hz", p.min_refresh_hz}};
}
inline void from_json(const Json& j, DevicePolicy& p) {
  detail::get_or(j, "allowed_devices", p.allowed_devices);
  detail::get_or(j, "min_width", p.min_width);
  detail::get_or(j, "min_height", p.min_height);
  detail::get_or(j, "min_refresh_hz", p.min_refresh_hz);
}

inline void to_json(Json& j, const QualificationAssets& a) {
  j = Json{{"ishihara_key", a.ishihara_key},
           {"card_width_mm", a.card_width_mm},
           {"viewing_distance_cm", a.viewing_distance_cm},
           {"required_acuity", a.required_acuity},
           {"required_correct", a.required_correct},
           {"matrix1_seed", a.matrix1_seed},
           {"matrix2_seed", a.matrix2_seed},
           {"distance_key", a.distance_key},
           {"matrix1_retries", a.matrix1_retries}};
}
inline void from_json(const Json& j, QualificationAssets& a) {
  detail::get_or(j, "ishihara_key", a.ishihara_key);
  detail::get_or(j, "card_width_mm", a.card_width_mm);
  detail::get_or(j, "viewing_distance_cm", a.viewing_distance_cm);
  detail::get_or(j, "required_acuity", a.required_acuity);
  detail::get_or(j, "required_correct", a.required_correct);
  detail::get_or(j, "matrix1_seed", a.matrix1_seed);
  detail::get_or(j, "matrix2_seed", a.matrix2_seed);
  detail::get_or(j, "distance_key", a.distance_key);
  detail::get_or(j, "matrix1_retries", a.matrix1_retries);
}

inline void to_json(Json& j, const Thresholds& t) {
  j = Json{{"playback_ratio", t.playback_ratio},
           {"straightliner_run", t.straightliner_run},
           {"low_variance_sd", t.low_variance_sd},
           {"strict", t.strict}};
  detail::put_opt(j, "gold_tolerance", t.gold_tolerance);
}
inline void from_json(const Json& j, Thresholds& t) {
  detail::get_opt(j, "gold_tolerance", t.gold_tolerance);
  detail::get_or(j, "playback_ratio", t.playback_ratio);
  detail::get_or(j, "straightliner_run", t.straightliner_run);
  detail::get_or(j, "low_variance_sd", t.low_variance_sd);
  detail::get_or(j, "strict", t.strict);
}

inline void to_json(Json& j, const BonusTier& b) {
  j = Json{{"min_accepted_sessions", b.min_accepted_sessions}, {"amount", b.amount}, {"reason", b.reason}};
}
inline void from_json(const Json& j, BonusTier& b) {
  j.at("min_accepted_sessions").get_to(b.min_accepted_sessions);
  j.at("amount").get_to(b.amount);
  detail::get_or(j, "reason", b.reason);
}

inline void to_json(Json& j, const TrappingMessage& m) { j = Json{{"rating", m.rating}, {"text", m.text}}; }
inline void from_json(const Json& j, TrappingMessage& m) {
  j.at("rating").get_to(m.rating);
  j.at("text").get_to(m.text);
}

inline void to_json(Json& j, const TestConfig& c) {
  j = Json{{"schema_version", c.schema_version},
           {"test_id", c.test_id},
           {"method", c.method},
           {"session_size", c.session_size},
           {"votes_target", c.votes_target},
           {"device_policy", c.device_policy},
           {"training_clip_ids", c.training_clip_ids},
           {"qualification_assets", c.qualification_assets},
           {"retraining_interval_min", c.retraining_interval_min},
           {"setup_interval_min", c.setup_interval_min},
           {"scale_labels", c.scale_labels},
           {"thresholds", c.thresholds},
           {"bonus_policy", c.bonus_policy},
           {"trapping_candidate_ids", c.trapping_candidate_ids},
           {"trapping_messages", c.trapping_messages},
           {"clips", c.clips}};
}
inline void from_json(const Json& j, TestConfig& c) {
  j.at("schema_version").get_to(c.schema_version);
  j.at("test_id").get_to(c.test_id);
  j.at("method").get_to(c.method);
  j.at("clips").get_to(c.clips);
  detail::get_or(j, "session_size", c.session_size);
  detail::get_or(j, "votes_target", c.votes_target);
  detail::get_or(j, "device_policy", c.device_policy);
  detail::get_or(j, "training_clip_ids", c.training_clip_ids);
  detail::get_or(j, "qualification_assets", c.qualification_assets);
  detail::get_or(j, "retraining_interval_min", c.retraining_interval_min);
  detail::get_or(j, "setup_interval_min", c.setup_interval_min);
  detail::get_or(j, "scale_labels", c.scale_labels);
  detail::get_or(j, "thresholds", c.thresholds);
  detail::get_or(j, "bonus_policy", c.bonus_policy);
  detail::get_or(j, "trapping_candidate_ids", c.trapping_candidate_ids);
  detail::get_or(j, "trapping_messages", c.trapping_messages);
}

inline void to_json(Json& j, const Vote& v) {
  j = Json{{"clip_id", v.clip_id}, {"rating", v.rating}, {"playback_count", v.playback_count}};
  detail::put_opt(j, "playback_total_ms", v.playback_total_ms);
  j["cast_at"] = v.cast_at;
}
inline void from_json(const Json& j, Vote& v) {
  j.at("clip_id").get_to(v.clip_id);
  j.at("rating").get_to(v.rating);
  detail::get_or(j, "playback_count", v.playback_count);
  detail::get_opt(j, "playback_total_ms", v.playback_total_ms);
  detail::get_or(j, "cast_at", v.cast_at);
}

inline void to_json(Json& j, const DeviceSnapshot& d) {
  j = Json{{"width", d.width},
           {"height", d.height},
           {"refresh_hz_estimate", d.refresh_hz_estimate},
           {"user_agent", d.user_agent}};
}
inline void from_json(const Json& j, DeviceSnapshot& d) {
  detail::get_or(j, "width", d.width);
  detail::get_or(j, "height", d.height);
  detail::get_or(j, "refresh_hz_estimate", d.refresh_hz_estimate);
  detail::get_or(j, "user_agent", d.user_agent);
}

inline void to_json(Json& j, const Submission& s) {
  j = Json{{"submission_id", s.submission_id}, {"test_id", s.test_id}, {"worker_id", s.worker_id}};
  detail::put_opt(j, "assignment_id", s.assignment_id);
  j["session_plan_id"] = s.session_plan_id;
  j["qualification"] = s.qualification;
  j["setup"] = s.setup;
  j["votes"] = s.votes;
  j["device_snapshot"] = s.device_snapshot;
  j["verification_code"] = s.verification_code;
  j["started_at"] = s.started_at;
  j["finished_at"] = s.finished_at;
}
inline void from_json(const Json& j, Submission& s) {
  j.at("submission_id").get_to(s.submission_id);
  detail::get_or(j, "test_id", s.test_id);
  j.at("worker_id").get_to(s.worker_id);
  detail::get_opt(j, "assignment_id", s.assignment_id);
  j.at("session_plan_id").get_to(s.session_plan_id);
  detail::get_or(j, "qualification", s.qualification);
  detail::get_or(j, "setup", s.setup);
  j.at("votes").get_to(s.votes);
  detail::get_or(j, "device_snapshot", s.device_snapshot);
  detail::get_or(j, "verification_code", s.verification_code);
  detail::get_or(j, "started_at", s.started_at);
  detail::get_or(j, "finished_at", s.finished_at);
}

// --- file helpers ----------------------------------------------------------

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "short write " + path);
}

inline Json parse_json(std::string_view text, std::string_view what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedInput, std::string(what) + ": " + e.what());
  }
}

inline TestConfig load_config(const std::string& path) {
  const Json j = parse_json(read_text_file(path), path);
  try {
    return j.get<TestConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, path + ": " + e.what());
  }
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace p910
