#pragma once

#include <memory>
#include <string>

#include "workbench/session_service.hpp"

namespace workbench::http {

// HTTP front end for a SessionService.
class Server {
 public:
  explicit Server(service::SessionService& service);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  bool bind(const std::string& host, int port);
  // Binds an ephemeral port; returns it, or -1 on failure.
  int bind_any_port(const std::string& host);
  // Blocks until stop().
  bool listen();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace workbench::http
