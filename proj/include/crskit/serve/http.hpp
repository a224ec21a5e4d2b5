#pragma once

#include <functional>
#include <string>

#include <nlohmann/json.hpp>

// keep ahead of httplib.h
#include "crskit/serve/session.hpp"

#include <httplib.h>

namespace crskit::serve {

inline json error_body(const std::string& code, const std::string& message, const std::vector<std::string>& details = {}) {
  return {{"error", {{"code", code}, {"message", message}, {"details", details}}}};
}

inline void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json; charset=utf-8");
}

namespace detail {

inline json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  json j;
  try {
    j = json::parse(req.body);
  } catch (const json::parse_error& e) {
    throw ServiceError(400, "invalid_json", std::string("request body is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ServiceError(400, "invalid_json", "request body must be a JSON object");
  return j;
}

inline httplib::Server::Handler guarded(std::function<void(const httplib::Request&, httplib::Response&)> fn) {
  return [fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const ServiceError& e) {
      send_json(res, e.status(), error_body(e.code(), e.what(), e.details()));
    } catch (const std::exception& e) {
      util::logger()->error("{} {} failed: {}", req.method, req.path, e.what());
      send_json(res, 500, error_body("internal_error", e.what()));
    }
  };
}

}  // namespace detail

// Registers the session API on `svr`. The manager must outlive the server.
inline void mount_api(httplib::Server& svr, SessionManager& mgr) {
  using detail::guarded;
  svr.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Headers", "Content-Type"},
                           {"Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS"}});
  svr.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  svr.Get("/api/systems", guarded([&](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, {{"systems", mgr.systems_json()}});
          }));
  svr.Post("/api/sessions", guarded([&](const httplib::Request& req, httplib::Response& res) {
             const json body = detail::parse_body(req);
             std::optional<std::string> sid;
             if (body.contains("system_id") && !body.at("system_id").is_null()) {
               if (!body.at("system_id").is_string()) throw ServiceError(422, "validation_error", "system_id must be a string");
               sid = body.at("system_id").get<std::string>();
             }
             send_json(res, 201, {{"session", mgr.create_session(body.value("profile", json()), sid)}});
           }));
  svr.Post(R"(/api/sessions/([^/]+)/messages)", guarded([&](const httplib::Request& req, httplib::Response& res) {
             const json body = detail::parse_body(req);
             send_json(res, 200, {{"turn", mgr.post_message(req.matches[1], body.value("text", json()))}});
           }));
  svr.Post(R"(/api/sessions/([^/]+)/override)", guarded([&](const httplib::Request& req, httplib::Response& res) {
             const json body = detail::parse_body(req);
             const json field = body.value("field", json());
             if (!field.is_string()) throw ServiceError(422, "validation_error", "field must be a string");
             if (!body.contains("value")) throw ServiceError(422, "validation_error", "value is required");
             send_json(res, 200,
                       {{"turn", mgr.apply_override(req.matches[1], body.value("turn_id", json()), field.get<std::string>(),
                                                    body.at("value"))}});
           }));
  svr.Get(R"(/api/sessions/([^/]+))", guarded([&](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, {{"session", mgr.get_state(req.matches[1])}});
          }));
  svr.Delete(R"(/api/sessions/([^/]+))", guarded([&](const httplib::Request& req, httplib::Response& res) {
               send_json(res, 200, {{"session", mgr.close_session(req.matches[1])}});
             }));
  svr.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (res.status == 404 && res.body.empty())
      send_json(res, 404, error_body("not_found", "no route for " + req.method + " " + req.path));
  });
}

}  // namespace crskit::serve
