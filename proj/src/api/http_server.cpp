#include "sentimill/api/http_server.hpp"

#include <sys/socket.h>

#include <httplib.h>
#include <spdlog/spdlog.h>

namespace sentimill::api {

struct HttpServer::Impl {
  httplib::Server server;
};

namespace {

ApiRequest to_api_request(const httplib::Request& req) {
  ApiRequest out;
  out.method = req.method;
  out.path = req.path;
  for (const auto& [k, v] : req.params) out.query.emplace(k, v);  // first value wins
  out.body = req.body;
  const auto auth = req.get_header_value("Authorization");
  constexpr std::string_view kBearer = "Bearer ";
  if (auth.size() > kBearer.size() && std::string_view(auth).substr(0, kBearer.size()) == kBearer) {
    out.token = auth.substr(kBearer.size());
  }
  return out;
}

}  // namespace

HttpServer::HttpServer(ApiService& service, Options options)
    : service_(service), options_(std::move(options)), impl_(std::make_unique<Impl>()) {
  auto& server = impl_->server;
  // No SO_REUSEPORT: a second server on a busy port must fail to bind.
  server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  });
  const auto threads = static_cast<std::size_t>(std::max(1, options_.threads));
  server.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
  if (options_.static_dir && !server.set_mount_point("/", options_.static_dir->string())) {
    spdlog::warn("static asset directory {} not found", options_.static_dir->string());
  }
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    const auto response = service_.handle(to_api_request(req));
    res.status = response.http_status;
    res.set_content(response.text(), "application/json");
    spdlog::debug("{} {} -> {}", req.method, req.path, response.http_status);
  };
  server.Get(".*", handler);
  server.Post(".*", handler);
  server.Put(".*", handler);
  server.Delete(".*", handler);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start() {
  auto& server = impl_->server;
  if (options_.port == 0) {
    port_ = server.bind_to_any_port(options_.host);
    if (port_ < 0) port_ = 0;
  } else if (server.bind_to_port(options_.host, options_.port)) {
    port_ = options_.port;
  }
  if (port_ <= 0) {
    throw Error("BindFailure", "cannot bind " + options_.host + ":" + std::to_string(options_.port));
  }
  thread_ = std::thread([&server] { server.listen_after_bind(); });
  server.wait_until_ready();
  return port_;
}

void HttpServer::stop() {
  if (!thread_.joinable()) return;
  impl_->server.stop();
  thread_.join();
}

}  // namespace sentimill::api
