// Command-line front end: prepare, serve, parse, compare, bootstrap, runs.
// Exit codes: 0 success, 1 runtime failure, 2 validation failure.

#include <CLI11.hpp>

#include <csignal>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "p910/http.hpp"
#include "p910/pipeline.hpp"

namespace fs = std::filesystem;
using namespace p910;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitValidation = 2;

bool is_validation(ErrorCode c) {
  switch (c) {
    case ErrorCode::ConfigInvalid:
    case ErrorCode::MalformedInput:
    case ErrorCode::ConfigMismatch:
    case ErrorCode::Misaligned:
    case ErrorCode::UnknownLevel:
    case ErrorCode::UnmappedSequence:
    case ErrorCode::MissingReference:
    case ErrorCode::EmptyVotes:
    case ErrorCode::LengthMismatch:
    case ErrorCode::TooFewSamples:
    case ErrorCode::ZeroVariance:
    case ErrorCode::EmptySecret:
      return true;
    default:
      return false;
  }
}

std::string read_secret(const std::string& path) {
  std::string s = read_text_file(path);
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r' || s.back() == ' ')) s.pop_back();
  if (s.empty()) throw Error(ErrorCode::EmptySecret, path);
  return s;
}

int cmd_prepare(const std::string& config_path, std::uint64_t seed, const std::string& out,
                const std::string& secret_file, const std::string& base_url) {
  const TestConfig config = load_config(config_path);
  if (const auto errors = validate_config(config); !errors.empty()) {
    for (const auto& e : errors) std::cerr << "error: " << describe(e) << "\n";
    return kExitValidation;
  }
  const std::string secret = read_secret(secret_file);
  const FileSet files = prepare_files(config, seed, secret, fs::absolute(secret_file).string(), base_url);
  write_files(out, files);
  std::cout << "wrote " << files.size() << " files to " << out << "\n";
  return 0;
}

int cmd_parse(const std::vector<std::string>& answers, const std::string& parser_config_path, const std::string& out) {
  const auto pc = parse_json(read_text_file(parser_config_path), parser_config_path).get<ParserConfig>();
  if (pc.schema_version != kSchemaVersion) throw Error(ErrorCode::ConfigMismatch, "parser config schema version");
  fs::path secret_path = pc.secret_file;
  if (secret_path.is_relative()) secret_path = fs::path(parser_config_path).parent_path() / secret_path;
  const std::string secret = read_secret(secret_path.string());

  std::vector<Submission> subs;
  for (const auto& path : answers) {
    auto batch = read_submission_batch(read_text_file(path));
    subs.insert(subs.end(), batch.begin(), batch.end());
  }
  const FileSet files = parse_files(subs, pc, secret);
  write_files(out, files);
  const Json summary = parse_json(files.at("summary.json"), "summary");
  std::cout << "submissions " << summary["submissions"] << ", accepted " << summary["accepted"] << ", rejected "
            << summary["rejected"] << ", extended " << summary["extended"] << "\n";
  return 0;
}

int cmd_compare(const std::string& a, const std::string& b, const std::string& level_name, const std::string& out) {
  const CompareLevel level = parse_level(level_name);
  const auto aligned =
      align_scores(read_score_table(read_text_file(a)), read_score_table(read_text_file(b)), level);
  const auto report = stats::compare(aligned.a, aligned.b);
  const std::string table = comparison_csv(report, level);
  if (!out.empty()) write_text_file(out, table);
  std::cout << table;
  return 0;
}

int cmd_bootstrap(const std::string& votes_path, const std::string& reference_path, int reps, std::uint64_t seed,
                  int n_max, const std::string& out) {
  const VoteTable votes = read_vote_table(read_text_file(votes_path));
  const ScoreTable reference = read_score_table(read_text_file(reference_path));
  std::vector<double> ref;
  for (const auto& id : votes.ids) {
    auto it = reference.mean.find(id);
    if (it == reference.mean.end()) throw Error(ErrorCode::MissingReference, id);
    ref.push_back(it->second);
  }
  const auto curve = bootstrap_votes(votes.votes, ref, default_vote_counts(n_max), reps, seed);
  const std::string table = bootstrap_csv(curve);
  if (out.empty()) {
    std::cout << table;
  } else {
    write_text_file(out, table);
    std::cout << "wrote " << curve.points.size() << " rows to " << out << "\n";
  }
  return 0;
}

int cmd_runs(const std::vector<std::string>& paths, const std::string& out) {
  std::vector<ScoreTable> tables;
  for (const auto& p : paths) tables.push_back(read_score_table(read_text_file(p)));
  std::vector<std::vector<double>> runs(tables.size());
  for (const auto& [id, v] : tables.front().mean) {
    for (std::size_t k = 0; k < tables.size(); ++k) {
      auto it = tables[k].mean.find(id);
      if (it == tables[k].mean.end()) throw Error(ErrorCode::Misaligned, id + " missing from " + paths[k]);
      runs[k].push_back(it->second);
    }
  }
  for (std::size_t k = 1; k < tables.size(); ++k) {
    if (tables[k].mean.size() != tables.front().mean.size()) throw Error(ErrorCode::Misaligned, paths[k]);
  }
  std::vector<std::string> names;
  for (const auto& p : paths) names.push_back(fs::path(p).stem().string());
  const std::string table = correlation_matrix_csv(compare_runs(runs), names);
  if (!out.empty()) write_text_file(out, table);
  std::cout << table;
  return 0;
}

httplib::Server* g_server = nullptr;

int cmd_serve(const std::string& config_path, const std::string& plans_path, const std::string& db,
              const std::string& secret_file, const std::string& token_file, const std::string& assets,
              const std::string& host, int port) {
  const TestConfig config = load_config(config_path);
  StudyService service(config, load_plan_set(plans_path), {db, read_secret(secret_file)});
  HttpOptions options;
  if (!token_file.empty()) options.admin_token = read_secret(token_file);
  options.assets_dir = assets;
  httplib::Server server;
  register_routes(server, service, options);
  g_server = &server;
  std::signal(SIGINT, [](int) { g_server->stop(); });
  std::signal(SIGTERM, [](int) { g_server->stop(); });
  std::cout << "listening on " << host << ":" << port << std::endl;
  if (!server.listen(host, port)) throw Error(ErrorCode::IoFailure, "cannot listen on " + host);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Crowdsourced video quality test toolkit"};
  app.require_subcommand(1);

  std::string config, out, secret_file, base_url = "https://example.invalid/rate";
  std::uint64_t seed = 1;
  auto* prepare = app.add_subcommand("prepare", "Validate a test config and emit session plans and assets");
  prepare->add_option("--config", config, "Test configuration (JSON)")->required();
  prepare->add_option("--seed", seed, "Random seed");
  prepare->add_option("--out", out, "Output directory")->required();
  prepare->add_option("--secret-file", secret_file, "File holding the signing secret")->required();
  prepare->add_option("--base-url", base_url, "Session URL base for the platform batch");

  std::vector<std::string> answers;
  std::string parser_config;
  auto* parse = app.add_subcommand("parse", "Cleanse exported submissions and aggregate scores");
  parse->add_option("--answers", answers, "Submission batch file(s) exported by the service")->required();
  parse->add_option("--parser-config", parser_config, "parser_config.json from prepare")->required();
  parse->add_option("--out", out, "Output directory")->required();

  std::string a, b, level = "sequence", compare_out;
  auto* compare = app.add_subcommand("compare", "PCC / SRCC / RMSE / RMSE after FOM between two score tables");
  compare->add_option("--a", a, "Score table to map (e.g. crowd)")->required();
  compare->add_option("--b", b, "Reference score table (e.g. lab)")->required();
  compare->add_option("--level", level, "sequence or hrc");
  compare->add_option("--out", compare_out, "Also write the table here");

  std::string votes, reference, boot_out;
  int reps = kDefaultBootstrapRepetitions, n_max = 60;
  std::uint64_t boot_seed = 1;
  auto* bootstrap = app.add_subcommand("bootstrap", "Correlation versus number of votes per sequence");
  bootstrap->add_option("--votes", votes, "Vote table with clip_id and rating columns")->required();
  bootstrap->add_option("--reference", reference, "Score table with target_id and mean columns")->required();
  bootstrap->add_option("--reps", reps, "Repetitions per vote count")->check(CLI::PositiveNumber);
  bootstrap->add_option("--seed", boot_seed, "Random seed");
  bootstrap->add_option("--n-max", n_max, "Largest vote count")->check(CLI::PositiveNumber);
  bootstrap->add_option("--out", boot_out, "Output CSV (stdout when omitted)");

  std::vector<std::string> run_files;
  std::string runs_out;
  auto* runs = app.add_subcommand("runs", "PCC (upper) / SRCC (lower) matrix between repeated runs");
  runs->add_option("scores", run_files, "Score tables, one per run")->required()->expected(2, -1);
  runs->add_option("--out", runs_out, "Also write the matrix here");

  std::string plans, db = "p910.sqlite", token_file, assets, host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "Run the study HTTP service");
  serve->add_option("--config", config, "Test configuration (JSON)")->required();
  serve->add_option("--plans", plans, "plans.json from prepare")->required();
  serve->add_option("--db", db, "SQLite database file");
  serve->add_option("--secret-file", secret_file, "File holding the signing secret")->required();
  serve->add_option("--admin-token-file", token_file, "File holding the export bearer token");
  serve->add_option("--assets", assets, "Directory served under /assets");
  serve->add_option("--host", host, "Listen address");
  serve->add_option("--port", port, "Listen port");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }

  try {
    if (*prepare) return cmd_prepare(config, seed, out, secret_file, base_url);
    if (*parse) return cmd_parse(answers, parser_config, out);
    if (*compare) return cmd_compare(a, b, level, compare_out);
    if (*bootstrap) return cmd_bootstrap(votes, reference, reps, boot_seed, n_max, boot_out);
    if (*runs) return cmd_runs(run_files, runs_out);
    if (*serve) return cmd_serve(config, plans, db, secret_file, token_file, assets, host, port);
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return is_validation(e.code()) ? kExitValidation : kExitRuntime;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: MalformedInput: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitRuntime;
}
