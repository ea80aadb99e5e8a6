#include "workbench/http_api.hpp"

#include <httplib.h>

namespace workbench::http {

namespace {

constexpr const char* kSessionRoute = R"(/sessions/([0-9a-zA-Z]+))";

void reply(httplib::Response& res, const service::Response& r) {
  res.status = r.status;
  res.set_content(r.body.dump(), "application/json");
}

}  // namespace

struct Server::Impl {
  explicit Impl(service::SessionService& s) : service(s) {}
  service::SessionService& service;
  httplib::Server server;
};

Server::Server(service::SessionService& service) : impl_(std::make_unique<Impl>(service)) {
  auto& svc = impl_->service;
  auto& srv = impl_->server;

  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Headers", "Content-Type"},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  srv.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  srv.Post("/sessions", [&svc](const httplib::Request& req, httplib::Response& res) {
    reply(res, svc.create_session_text(req.body));
  });
  srv.Get(kSessionRoute, [&svc](const httplib::Request& req, httplib::Response& res) {
    reply(res, svc.get_state(req.matches[1]));
  });
  srv.Post(std::string(kSessionRoute) + "/actions", [&svc](const httplib::Request& req, httplib::Response& res) {
    reply(res, svc.post_action(std::string(req.matches[1]), req.body));
  });
  srv.Post(std::string(kSessionRoute) + "/submit", [&svc](const httplib::Request& req, httplib::Response& res) {
    reply(res, svc.submit(req.matches[1]));
  });
  srv.Get(std::string(kSessionRoute) + "/scorecard", [&svc](const httplib::Request& req, httplib::Response& res) {
    reply(res, svc.get_scorecard(req.matches[1]));
  });
  srv.Get("/catalog/tasks", [&svc](const httplib::Request&, httplib::Response& res) { reply(res, svc.catalog_tasks()); });
  srv.Get("/catalog/tools", [&svc](const httplib::Request&, httplib::Response& res) { reply(res, svc.catalog_tools()); });
  srv.Get("/catalog/parts", [&svc](const httplib::Request&, httplib::Response& res) { reply(res, svc.catalog_parts()); });

  srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) {
      nlohmann::json body{{"error", {{"code", "HTTP_" + std::to_string(res.status)}, {"detail", "no such route"}}}};
      res.set_content(body.dump(), "application/json");
    }
  });
  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string detail = "internal error";
    try {
      if (ep) std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      detail = e.what();
    } catch (...) {
    }
    res.status = 500;
    res.set_content(nlohmann::json{{"error", {{"code", "INTERNAL"}, {"detail", detail}}}}.dump(), "application/json");
  });
}

Server::~Server() { stop(); }

bool Server::bind(const std::string& host, int port) { return impl_->server.bind_to_port(host, port); }

int Server::bind_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }

bool Server::listen() { return impl_->server.listen_after_bind(); }

void Server::stop() {
  if (impl_) impl_->server.stop();
}

void Server::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace workbench::http
