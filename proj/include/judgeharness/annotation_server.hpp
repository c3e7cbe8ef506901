#pragma once

#include <filesystem>
#include <string>

#include "httplib.h"
#include "judgeharness/annotation.hpp"

namespace judgeharness::annotation {

/// HTTP JSON front of an AnnotationStore:
///   GET  /api/health
///   GET  /api/next?annotator=ID   -> blinded task view (no system ids)
///   POST /api/label               {annotator, task_id, verdict, displayed_order}
///   GET  /api/progress
///   GET  /api/gold                (complete tasks only)
/// plus static files for the UI bundle when a directory is given.
class AnnotationServer {
 public:
  explicit AnnotationServer(AnnotationStore& store, std::filesystem::path static_dir = {})
      : store_(store) {
    using httplib::Request;
    using httplib::Response;
    server_.Get("/api/health", [](const Request&, Response& res) {
      reply(res, 200, Json{{"status", "ready"}});
    });
    server_.Get("/api/next", [this](const Request& req, Response& res) {
      const auto annotator = req.get_param_value("annotator");
      if (annotator.empty()) return reply(res, 400, error_body("InvalidArgument", "annotator is required"));
      try {
        const auto a = store_.assign_next(annotator);
        const bool fwd = a.displayed_order == Order::Forward;
        reply(res, 200,
              Json{{"task_id", a.task.task_id},
                   {"instruction", a.task.instruction},
                   {"input", a.task.input},
                   {"left", fwd ? a.task.response_1.text : a.task.response_2.text},
                   {"right", fwd ? a.task.response_2.text : a.task.response_1.text},
                   {"displayed_order", a.order_token}});
      } catch (const Error& e) {
        reply_error(res, e);
      }
    });
    server_.Post("/api/label", [this](const Request& req, Response& res) {
      try {
        const auto body = Json::parse(req.body);
        const auto annotator = body.at("annotator").get<std::string>();
        const auto task_id = body.at("task_id").get<std::string>();
        const auto verdict = normalize_verdict(body.at("verdict").get<std::string>());
        const auto order =
            store_.decode_order(task_id, annotator, body.at("displayed_order").get<std::string>());
        store_.submit_label(annotator, task_id, verdict, order);
        reply(res, 200, Json{{"ok", true}, {"task_id", task_id}});
      } catch (const Error& e) {
        reply_error(res, e);
      } catch (const nlohmann::json::exception& e) {
        reply(res, 400, error_body("FormatError", e.what()));
      }
    });
    server_.Get("/api/progress", [this](const Request&, Response& res) {
      reply(res, 200, store_.progress_stats());
    });
    server_.Get("/api/gold", [this](const Request&, Response& res) {
      reply(res, 200, to_json(store_.derive_gold()));
    });
    if (!static_dir.empty() && std::filesystem::is_directory(static_dir))
      server_.set_mount_point("/", static_dir.string());
  }

  /// Binds and serves on the calling thread until stop().
  bool listen(const std::string& host, int port) { return server_.listen(host, port); }

  int bind_to_any_port(const std::string& host) { return server_.bind_to_any_port(host); }

  /// Port 0 picks a free port. Returns the bound port, or -1.
  int bind(const std::string& host, int port) {
    if (port == 0) return server_.bind_to_any_port(host);
    return server_.bind_to_port(host, port) ? port : -1;
  }
  bool listen_after_bind() { return server_.listen_after_bind(); }
  void wait_until_ready() const { server_.wait_until_ready(); }
  void stop() { server_.stop(); }

 private:
  static Json error_body(std::string_view code, const std::string& message) {
    return Json{{"error", std::string(code)}, {"message", message}};
  }

  static void reply(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void reply_error(httplib::Response& res, const Error& e) {
    int status = 400;
    switch (e.code()) {
      case Errc::NoTasksRemaining: status = 404; break;
      case Errc::DuplicateDifferingLabel: status = 409; break;
      case Errc::UnknownTask: status = 404; break;
      case Errc::IoError: status = 500; break;
      default: break;
    }
    reply(res, status, error_body(errc_name(e.code()), e.what()));
  }

  AnnotationStore& store_;
  httplib::Server server_;
};

}  // namespace judgeharness::annotation
