#pragma once

// JSON-over-HTTP front end for StudyService, consumed by the browser client.

#include <httplib.h>

#include <chrono>
#include <functional>
#include <string>
#include <type_traits>

#include "p910/serialization.hpp"
#include "p910/service.hpp"
#include "p910/testprep.hpp"

namespace p910 {

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::WorkerDisqualified: return 403;
    case ErrorCode::UnknownPlan:
    case ErrorCode::UnknownTest: return 404;
    case ErrorCode::DuplicateSubmission: return 409;
    case ErrorCode::IncompleteSubmission: return 422;
    case ErrorCode::NoPlanAvailable: return 503;
    case ErrorCode::StorageFailure:
    case ErrorCode::IoFailure: return 500;
    default: return 400;
  }
}

struct HttpOptions {
  std::string admin_token;
  std::string assets_dir;  // served under /assets when non-empty
  std::function<Millis()> clock = [] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
  };
};

namespace detail {

inline void reply(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline void reply_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  reply(res, status, Json{{"error", code}, {"message", message}});
}

/// Runs `fn`, translating library errors and malformed JSON into responses.
template <class Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    reply_error(res, http_status(e.code()), to_string(e.code()), e.what());
  } catch (const nlohmann::json::exception& e) {
    reply_error(res, 400, std::string(to_string(ErrorCode::MalformedInput)), e.what());
  }
}

template <class T>
T num_param(const httplib::Request& req, const std::string& name) {
  if (!req.has_param(name)) throw Error(ErrorCode::MalformedInput, "missing parameter " + name);
  const std::string v = req.get_param_value(name);
  try {
    std::size_t used = 0;
    T out{};
    if constexpr (std::is_floating_point_v<T>) {
      out = static_cast<T>(std::stod(v, &used));
    } else {
      out = static_cast<T>(std::stoll(v, &used));
    }
    if (used != v.size()) throw std::invalid_argument(name);
    return out;
  } catch (const std::exception&) {
    throw Error(ErrorCode::MalformedInput, "bad parameter " + name);
  }
}

inline std::string str_param(const httplib::Request& req, const std::string& name) {
  if (!req.has_param(name) || req.get_param_value(name).empty()) {
    throw Error(ErrorCode::MalformedInput, "missing parameter " + name);
  }
  return req.get_param_value(name);
}

}  // namespace detail

/// Registers the /api/v1 routes on `server`.
///
///   GET  /api/v1/session?worker&width&height&refresh[&new=1]
///   POST /api/v1/progress       {"worker", "section"}
///   POST /api/v1/qualification  {"worker", "record"}
///   POST /api/v1/setup          {"worker", "record"}
///   POST /api/v1/votes          {"plan", "votes"}
///   POST /api/v1/submit         Submission
///   GET  /api/v1/export?test[&since]   (Authorization: Bearer <admin token>)
inline void register_routes(httplib::Server& server, StudyService& service, HttpOptions options) {
  const auto clock = options.clock;

  server.Get("/api/v1/session", [&service, clock](const httplib::Request& req, httplib::Response& res) {
    detail::guarded(res, [&] {
      const std::string worker = detail::str_param(req, "worker");
      DeviceSnapshot snap;
      snap.width = detail::num_param<int>(req, "width");
      snap.height = detail::num_param<int>(req, "height");
      snap.refresh_hz_estimate = detail::num_param<double>(req, "refresh");
      snap.user_agent = req.get_header_value("User-Agent");
      const Admission adm = gate_device(snap, service.config().device_policy);
      if (!adm.admit) {
        detail::reply_error(res, 403, "device_rejected", std::string(to_string(adm.reason)));
        return;
      }
      if (req.has_param("new") && req.get_param_value("new") == "1") service.start_session(worker);
      const Millis now = clock();
      const Section section = service.next_section(worker, now);
      Json body{{"section", to_string(section)}, {"test_id", service.config().test_id}};
      if (section == Section::Rating) {
        const SessionPlan plan = service.lease_plan(worker, now);
        body["plan"] = plan;
        body["pending_votes"] = service.pending_votes(plan.session_plan_id);
        Json clips = Json::array();
        for (const auto& item : plan.ordered_items) {
          if (const Clip* c = service.config().find_clip(item.clip_id)) clips.push_back({{"clip_id", c->clip_id}, {"url", c->url}});
        }
        body["clips"] = std::move(clips);
      }
      detail::reply(res, 200, body);
    });
  });

  server.Post("/api/v1/progress", [&service, clock](const httplib::Request& req, httplib::Response& res) {
    detail::guarded(res, [&] {
      const Json body = parse_json(req.body, "request");
      const auto section = section_from_string(body.at("section").get<std::string>());
      if (!section) throw Error(ErrorCode::MalformedInput, "unknown section");
      service.complete(body.at("worker").get<std::string>(), *section, clock());
      detail::reply(res, 200, Json{{"ok", true}});
    });
  });

  server.Post("/api/v1/qualification", [&service, clock](const httplib::Request& req, httplib::Response& res) {
    detail::guarded(res, [&] {
      const Json body = parse_json(req.body, "request");
      const auto out = service.submit_qualification(body.at("worker").get<std::string>(),
                                                    body.at("record").get<QualificationRecord>(), clock());
      detail::reply(res, 200,
                    Json{{"passed", out.passed}, {"ishihara_pass", out.ishihara_pass}, {"acuity_pass", out.acuity_pass}});
    });
  });

  server.Post("/api/v1/setup", [&service, clock](const httplib::Request& req, httplib::Response& res) {
    detail::guarded(res, [&] {
      const Json body = parse_json(req.body, "request");
      const auto out =
          service.submit_setup(body.at("worker").get<std::string>(), body.at("record").get<SetupRecord>(), clock());
      detail::reply(res, 200,
                    Json{{"matrix1_pass", out.matrix1_pass},
                         {"matrix2_pass", out.matrix2_pass},
                         {"distance_class", to_string(out.distance_class)}});
    });
  });

  server.Post("/api/v1/votes", [&service](const httplib::Request& req, httplib::Response& res) {
    detail::guarded(res, [&] {
      const Json body = parse_json(req.body, "request");
      service.store_votes(body.at("plan").get<std::string>(), body.at("votes").get<std::vector<Vote>>());
      detail::reply(res, 200, Json{{"ok", true}});
    });
  });

  server.Post("/api/v1/submit", [&service, clock](const httplib::Request& req, httplib::Response& res) {
    detail::guarded(res, [&] {
      const auto sub = parse_json(req.body, "request").get<Submission>();
      const auto code = service.accept_submission(sub, clock());
      detail::reply(res, 200, Json{{"verification_code", code.code}, {"submission_id", code.submission_id}});
    });
  });

  server.Get("/api/v1/export", [&service, token = options.admin_token](const httplib::Request& req,
                                                                       httplib::Response& res) {
    detail::guarded(res, [&] {
      const std::string auth = req.get_header_value("Authorization");
      if (token.empty() || !crypto::constant_time_equal(auth, "Bearer " + token)) {
        detail::reply_error(res, 401, "unauthorized", "admin token required");
        return;
      }
      std::optional<Millis> since;
      if (req.has_param("since")) since = detail::num_param<Millis>(req, "since");
      res.set_content(service.export_submissions(detail::str_param(req, "test"), since), "text/csv");
    });
  });

  if (!options.assets_dir.empty()) {
    server.set_mount_point("/assets", options.assets_dir);
    server.set_file_request_handler([](const httplib::Request&, httplib::Response& res) {
      res.set_header("Cache-Control", "public, max-age=86400, immutable");
    });
  }
}

}  // namespace p910
