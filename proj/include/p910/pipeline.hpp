#pragma once

// File-level steps behind the command-line tool. Each step returns the files
// it would write as (relative name, content) pairs so outputs can be
// compared byte for byte.

#include <filesystem>
#include <map>
#include <string>

#include "p910/qualification.hpp"
#include "p910/report.hpp"
#include "p910/serialization.hpp"
#include "p910/testprep.hpp"

namespace p910 {

using FileSet = std::map<std::string, std::string>;

inline void write_files(const std::filesystem::path& dir, const FileSet& files) {
  for (const auto& [name, content] : files) {
    const auto path = dir / name;
    std::filesystem::create_directories(path.parent_path());
    write_text_file(path.string(), content);
  }
}

inline std::string counts_token(const ShapeCounts& c) {
  return std::to_string(c.circles) + "," + std::to_string(c.triangles);
}

/// What the browser client needs: clip URLs, scale, screening assets and
/// answer keys in obfuscated form. Clip roles are left out so gold and
/// trapping items are indistinguishable from test items.
inline Json client_bundle(const TestConfig& config, std::string_view secret) {
  const auto& a = config.qualification_assets;
  const RatingRange range = config.method.rating_range();

  Json clips = Json::array();
  for (const auto& c : config.clips) {
    if (c.role == ClipRole::Training) continue;
    clips.push_back({{"clip_id", c.clip_id}, {"url", c.url}, {"duration_ms", c.duration_ms}});
  }
  Json training = Json::array();
  for (const auto& id : config.training_clip_ids) {
    const Clip* c = config.find_clip(id);
    Json t{{"clip_id", c->clip_id}, {"url", c->url}, {"duration_ms", c->duration_ms}};
    if (c->expected_rating) t["key"] = obfuscate_answer_key(std::to_string(*c->expected_rating), secret);
    training.push_back(std::move(t));
  }
  Json ishihara = Json::object();
  for (const auto& [plate, value] : a.ishihara_key) ishihara[plate] = obfuscate_answer_key(value, secret);
  Json distance = Json::array();
  for (DistanceAnswer d : a.distance_key) distance.push_back(obfuscate_answer_key(Json(d).get<std::string>(), secret));

  Json labels = config.scale_labels;
  return Json{
      {"schema_version", kSchemaVersion},
      {"test_id", config.test_id},
      {"method", config.method.kind},
      {"scale", {{"points", config.method.scale_points}, {"min", range.lo}, {"max", range.hi}, {"labels", labels}}},
      {"randomize_ccr_order", config.method.randomize_ccr_order},
      {"session_items", config.session_size + 2},
      {"device_policy", config.device_policy},
      {"intervals_min", {{"setup", config.setup_interval_min}, {"training", config.retraining_interval_min}}},
      {"clips", clips},
      {"training", training},
      {"qualification",
       {{"card_width_mm", a.card_width_mm},
        {"viewing_distance_cm", a.viewing_distance_cm},
        {"required_acuity", a.required_acuity},
        {"landolt_trials", kMaxLandoltTrials},
        {"required_correct", a.required_correct},
        {"ishihara_keys", ishihara}}},
      {"setup",
       {{"matrix1_image", "matrix/matrix1.ppm"},
        {"matrix2_image", "matrix/matrix2.ppm"},
        {"matrix1_key", obfuscate_answer_key(counts_token(generate_matrix(a.matrix1_seed).truth_counts), secret)},
        {"matrix1_retries", a.matrix1_retries},
        {"distance_keys", distance}}},
  };
}

/// Everything `prepare` writes. Fails with ConfigInvalid when the config does
/// not validate.
inline FileSet prepare_files(const TestConfig& config, std::uint64_t seed, std::string_view secret,
                             const std::string& secret_file, std::string_view base_url) {
  if (const auto errors = validate_config(config); !errors.empty()) {
    std::string msg;
    for (const auto& e : errors) msg += (msg.empty() ? "" : ", ") + describe(e);
    throw Error(ErrorCode::ConfigInvalid, msg);
  }
  if (secret.empty()) throw Error(ErrorCode::EmptySecret);

  FileSet files;
  const auto plans = plan_sessions(config, seed);
  files["plans.json"] = dump(plan_set_json(config.test_id, seed, plans));
  files["parser_config.json"] = dump(Json(ParserConfig{kSchemaVersion, config, secret_file}));
  files["client_bundle.json"] = dump(client_bundle(config, secret));

  const PlatformBatch batch = export_platform_batch(plans, base_url, config.test_id);
  files["platform_batch.csv"] = batch.csv;
  files["task_description.json"] = batch.description;

  if (!config.trapping_candidate_ids.empty()) {
    std::vector<Clip> candidates;
    for (const auto& id : config.trapping_candidate_ids) {
      const Clip* c = config.find_clip(id);
      if (!c) throw Error(ErrorCode::ConfigInvalid, "unknown trapping candidate " + id);
      candidates.push_back(*c);
    }
    const auto manifests = build_trapping_manifests(candidates, config.trapping_messages,
                                                    config.method.rating_range(), derive_seed(seed, 0x7472));
    files["trapping/manifests.json"] = dump(Json(manifests));
    std::string script = "#!/bin/sh\nset -e\n";
    for (const auto& m : manifests) script += transcoder_command(m) + "\n";
    files["trapping/commands.sh"] = script;
  }

  const auto& a = config.qualification_assets;
  for (auto [name, s] : {std::pair{"matrix1", a.matrix1_seed}, std::pair{"matrix2", a.matrix2_seed}}) {
    const MatrixSpec spec = generate_matrix(s);
    files[std::string("matrix/") + name + ".ppm"] = encode_ppm(render_matrix(spec));
    files[std::string("keys/") + name + ".json"] = dump(Json(spec));
  }
  return files;
}

/// Everything `parse` writes, from the exported submission batches.
inline FileSet parse_files(const std::vector<Submission>& submissions, const ParserConfig& pc,
                           std::string_view secret) {
  const ReportBundle b = build_report(submissions, pc.config, secret);
  FileSet files{
      {"verdicts.csv", verdicts_csv(b.cleansing.verdicts)},
      {"accept.csv", list_csv(b.accept_list)},
      {"reject.csv", list_csv(b.reject_list)},
      {"extend.csv", list_csv(b.extend_list)},
      {"bonus.csv", bonus_csv(b.bonus_list)},
      {"scores_sequence.csv", scores_csv(b.sequence_scores)},
      {"scores_hrc.csv", hrc_csv(b.hrc_scores)},
      {"accepted_votes.csv", accepted_votes_csv(b.accepted_submissions, pc.config)},
      {"summary.json", dump(summary_json(b, pc.config))},
  };
  if (pc.config.method.kind == MethodKind::ACR_HR) {
    files["dmos_sequence.csv"] = scores_csv(b.dmos_scores);
    files["dmos_hrc.csv"] = hrc_csv(b.dmos_hrc_scores);
  }
  return files;
}

}  // namespace p910
