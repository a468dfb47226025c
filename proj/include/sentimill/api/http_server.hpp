#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <thread>

#include "sentimill/api/service.hpp"

namespace sentimill::api {

/// Serves an ApiService over HTTP/1.1, plus static files from `static_dir`
/// for paths no route claims.
class HttpServer {
 public:
  struct Options {
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 picks a free port
    std::optional<std::filesystem::path> static_dir;
    int threads = 8;
  };

  HttpServer(ApiService& service, Options options);
  ~HttpServer();

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds and starts serving on a background thread; returns the bound
  /// port. Throws Error("BindFailure").
  int start();
  void stop();
  int port() const noexcept { return port_; }

 private:
  struct Impl;

  ApiService& service_;
  Options options_;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace sentimill::api
