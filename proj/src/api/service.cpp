#include "sentimill/api/service.hpp"

#include <spdlog/spdlog.h>

#include "sentimill/common/timefmt.hpp"

namespace sentimill::api {

using nlohmann::json;
using orchestrator::JobKind;
using orchestrator::JobRecord;

namespace {

std::vector<std::string_view> split_path(std::string_view path) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < path.size()) {
    if (path[i] == '/') {
      ++i;
      continue;
    }
    const auto j = path.find('/', i);
    const auto end = j == std::string_view::npos ? path.size() : j;
    out.push_back(path.substr(i, end - i));
    i = end;
  }
  return out;
}

std::optional<std::map<std::string, std::string>> match(std::string_view pattern, std::string_view path) {
  const auto p = split_path(pattern);
  const auto s = split_path(path);
  if (p.size() != s.size()) return std::nullopt;
  std::map<std::string, std::string> vars;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i].size() > 2 && p[i].front() == '{' && p[i].back() == '}') {
      vars[std::string(p[i].substr(1, p[i].size() - 2))] = std::string(s[i]);
    } else if (p[i] != s[i]) {
      return std::nullopt;
    }
  }
  return vars;
}

json parse_body(const std::string& body) {
  if (body.empty()) throw Error("BadRequest", "request body: expected a JSON object");
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::parse_error& e) {
    throw Error("BadRequest", std::string("request body: ") + e.what());
  }
  if (!doc.is_object()) throw Error("BadRequest", "request body: expected a JSON object");
  return doc;
}

std::string string_field(const json& doc, const char* name) {
  auto it = doc.find(name);
  if (it == doc.end() || !it->is_string()) throw Error("InvalidSpec", std::string(name) + ": required string");
  return it->get<std::string>();
}

Role role_field(const json& doc, Role fallback) {
  auto it = doc.find("role");
  if (it == doc.end()) return fallback;
  auto role = it->is_string() ? parse_role(it->get<std::string>()) : std::nullopt;
  if (!role) throw Error("InvalidSpec", "role: expected USER or ADMINISTRATOR");
  return *role;
}

bool allowed(Access access, Role role) {
  return access != Access::kAdministrator || role == Role::kAdministrator;
}

ApiResponse ok(json body, int status = 200) {
  body["status"] = "ok";
  return {status, std::move(body)};
}

ApiResponse job_response(const JobRecord& job, int status = 200) {
  return ok({{"job_id", job.job_id}, {"job_status", orchestrator::to_string(job.status)}, {"job", job}}, status);
}

json table_json(const store::Table& table) {
  const auto& s = table.schema();
  return {{"name", s.name},
          {"families", s.families},
          {"num_partitions", s.num_partitions},
          {"replication_factor", s.replication_factor},
          {"row_count", table.row_count()}};
}

json user_json(const UserInfo& u) { return {{"username", u.username}, {"role", to_string(u.role)}}; }

}  // namespace

std::string ApiResponse::text() const { return body.dump(-1, ' ', false, json::error_handler_t::replace); }

const std::vector<RouteInfo>& routes() {
  static const std::vector<RouteInfo> kRoutes{
      {"GET", "/health", Access::kPublic},
      {"POST", "/auth/login", Access::kPublic},
      {"POST", "/auth/logout", Access::kUser},
      {"GET", "/jobs", Access::kUser},
      {"POST", "/jobs/data", Access::kAdministrator},
      {"POST", "/jobs/mapreduce", Access::kUser},
      {"GET", "/jobs/{id}", Access::kUser},
      {"PUT", "/jobs/{id}", Access::kUser},  // data jobs additionally need ADMINISTRATOR
      {"DELETE", "/jobs/{id}", Access::kAdministrator},
      {"GET", "/tables", Access::kUser},
      {"GET", "/tables/{name}", Access::kUser},
      {"DELETE", "/tables/{name}", Access::kAdministrator},
      {"GET", "/tables/{name}/rows", Access::kUser},
      {"DELETE", "/tables/{name}/rows/{key}", Access::kAdministrator},
      {"GET", "/charts/{kind}", Access::kUser},
      {"GET", "/users", Access::kAdministrator},
      {"POST", "/users", Access::kAdministrator},
      {"DELETE", "/users/{name}", Access::kAdministrator},
      {"POST", "/users/{name}/role", Access::kAdministrator},
  };
  return kRoutes;
}

int http_status_for(std::string_view code) {
  static const std::map<std::string_view, int> kStatus{
      {"BadRequest", 400},         {"InvalidSpec", 400},         {"InvalidBucket", 400},
      {"UnknownLexicon", 400},     {"UnknownStopwords", 400},    {"InvalidMapping", 400},
      {"InvalidStopCondition", 400}, {"InvalidSchema", 400},     {"InvalidColumn", 400},
      {"InvalidKey", 400},         {"UnknownFamily", 400},       {"InvalidRange", 400},
      {"UnknownColumn", 400},      {"InvalidCredentials", 401},  {"Unauthorized", 401},
      {"Forbidden", 403},          {"UnknownJob", 404},          {"UnknownTable", 404},
      {"UnknownUser", 404},        {"UnknownRoute", 404},        {"UnknownChart", 404},
      {"MethodNotAllowed", 405},   {"JobRunning", 409},          {"JobImmutable", 409},
      {"DuplicateUser", 409},      {"LastAdministrator", 409},   {"DuplicateTable", 409},
      {"TargetExists", 409},       {"WrongSourceShape", 422},    {"UnparsableTimestamp", 422},
      {"NonTextValue", 422},
  };
  auto it = kStatus.find(code);
  return it == kStatus.end() ? 500 : it->second;
}

ApiResponse error_response(const Error& error) {
  return {http_status_for(error.code()), {{"status", "error"}, {"code", error.code()}, {"message", error.what()}}};
}

ApiService::ApiService(store::TableStore& store, orchestrator::Orchestrator& orchestrator, UserStore& users,
                       std::shared_ptr<const sentiment::Resources> resources)
    : store_(store), orchestrator_(orchestrator), users_(users), resources_(std::move(resources)) {}

ApiResponse ApiService::handle(const ApiRequest& request) {
  try {
    const RouteInfo* route = nullptr;
    Params vars;
    bool path_known = false;
    for (const auto& r : routes()) {
      if (auto m = match(r.pattern, request.path)) {
        path_known = true;
        if (r.method == request.method) {
          route = &r;
          vars = std::move(*m);
          break;
        }
      }
    }
    if (route == nullptr) {
      if (path_known) throw Error("MethodNotAllowed", request.method + " not allowed on " + request.path);
      throw Error("UnknownRoute", "no route " + request.path);
    }
    std::optional<Session> session;
    if (route->access != Access::kPublic) {
      if (!request.token) throw Error("Unauthorized", "missing session token");
      session = users_.resolve(*request.token);
      if (!allowed(route->access, session->role)) {
        throw Error("Forbidden", std::string(route->method) + " " + route->pattern + " requires ADMINISTRATOR");
      }
    }
    return dispatch(*route, vars, request, session);
  } catch (const Error& e) {
    return error_response(e);
  } catch (const json::exception& e) {
    return error_response(Error("BadRequest", e.what()));
  } catch (const std::exception& e) {
    spdlog::error("{} {}: {}", request.method, request.path, e.what());
    return error_response(Error("Internal", e.what()));
  }
}

ApiResponse ApiService::dispatch(const RouteInfo& route, const Params& vars, const ApiRequest& request,
                                 const std::optional<Session>& session) {
  const auto& p = route.pattern;
  if (p == "/health") return ok({});
  if (p == "/auth/login") return login(request);
  if (p == "/auth/logout") {
    users_.revoke(session->token);
    return ok({});
  }
  if (p.starts_with("/jobs")) return jobs(route, vars, request, *session);
  if (p.starts_with("/tables")) return tables(route, vars, request);
  if (p.starts_with("/users")) return users(route, vars, request);
  if (p == "/charts/{kind}") {
    auto kind = parse_chart_kind(vars.at("kind"));
    if (!kind) throw Error("UnknownChart", "no chart kind '" + vars.at("kind") + "'");
    return chart(*kind, request.query);
  }
  throw Error("UnknownRoute", "no route " + request.path);
}

ApiResponse ApiService::chart(ChartKind kind, const Params& params) const {
  try {
    return ok(chart_payload(store_, *resources_, kind, params));
  } catch (const Error& e) {
    return error_response(e);
  }
}

ApiResponse ApiService::login(const ApiRequest& request) {
  const auto body = parse_body(request.body);
  const auto user = body.contains("username") && body["username"].is_string() ? body["username"].get<std::string>() : "";
  const auto pass = body.contains("password") && body["password"].is_string() ? body["password"].get<std::string>() : "";
  const auto session = users_.authenticate(user, pass);
  return ok({{"token", session.token},
             {"username", session.username},
             {"role", to_string(session.role)},
             {"expires_at", format_iso8601(session.expires_at)},
             {"expires_at_ms", session.expires_at}});
}

ApiResponse ApiService::jobs(const RouteInfo& route, const Params& vars, const ApiRequest& request,
                             const Session& session) {
  const auto& p = route.pattern;
  if (p == "/jobs") {
    orchestrator::JobFilter filter;
    if (auto it = request.query.find("kind"); it != request.query.end()) {
      filter.kind = orchestrator::parse_kind(it->second);
      if (!filter.kind) throw Error("InvalidSpec", "kind: expected DATA or MAPREDUCE");
    }
    if (auto it = request.query.find("status"); it != request.query.end()) {
      filter.status = orchestrator::parse_status(it->second);
      if (!filter.status) throw Error("InvalidSpec", "status: unknown job status '" + it->second + "'");
    }
    return ok({{"jobs", orchestrator_.list(filter)}});
  }
  if (p == "/jobs/data") {
    auto spec = orchestrator::data_job_spec_from_json(parse_body(request.body));
    return job_response(orchestrator_.create_data_job(std::move(spec), session.username), 201);
  }
  if (p == "/jobs/mapreduce") {
    auto spec = orchestrator::mr_job_spec_from_json(parse_body(request.body));
    return job_response(orchestrator_.create_mr_job(std::move(spec), session.username), 201);
  }
  const auto& id = vars.at("id");
  if (route.method == "GET") return job_response(orchestrator_.get(id));
  if (route.method == "DELETE") {
    orchestrator_.delete_job(id);
    return ok({{"job_id", id}});
  }
  // PUT
  const auto existing = orchestrator_.get(id);
  const auto body = parse_body(request.body);
  if (existing.kind == JobKind::kData) {
    if (session.role != Role::kAdministrator) throw Error("Forbidden", "updating data jobs requires ADMINISTRATOR");
    return job_response(orchestrator_.update_data_job(id, orchestrator::data_job_spec_from_json(body)));
  }
  return job_response(orchestrator_.update_mr_job(id, orchestrator::mr_job_spec_from_json(body)));
}

ApiResponse ApiService::tables(const RouteInfo& route, const Params& vars, const ApiRequest& request) {
  const auto& p = route.pattern;
  if (p == "/tables") {
    json list = json::array();
    for (const auto& name : store_.list_tables()) {
      if (auto t = store_.find_table(name)) list.push_back(table_json(*t));
    }
    return ok({{"tables", list}});
  }
  const auto& name = vars.at("name");
  if (p == "/tables/{name}") {
    if (route.method == "GET") return ok({{"table", table_json(*store_.table(name))}});
    store_.drop_table(name);
    return ok({{"table", name}});
  }
  if (p == "/tables/{name}/rows") {
    auto start = request.query.find("start_key");
    auto page = table_page(*store_.table(name), start == request.query.end() ? std::nullopt : std::optional(start->second),
                           page_limit(request.query));
    page["kind"] = to_string(ChartKind::kCharttable);
    return ok(std::move(page));
  }
  // DELETE /tables/{name}/rows/{key}
  store_.delete_row(name, vars.at("key"));
  return ok({{"table", name}, {"key", vars.at("key")}});
}

ApiResponse ApiService::users(const RouteInfo& route, const Params& vars, const ApiRequest& request) {
  const auto& p = route.pattern;
  if (p == "/users") {
    if (route.method == "GET") {
      json list = json::array();
      for (const auto& u : users_.list()) list.push_back(user_json(u));
      return ok({{"users", list}});
    }
    const auto body = parse_body(request.body);
    const auto user = users_.create_user(string_field(body, "username"), string_field(body, "password"),
                                         role_field(body, Role::kUser));
    return ok({{"user", user_json(user)}}, 201);
  }
  const auto& name = vars.at("name");
  if (p == "/users/{name}") {
    users_.delete_user(name);
    return ok({{"username", name}});
  }
  const auto body = parse_body(request.body);
  if (!body.contains("role")) throw Error("InvalidSpec", "role: required");
  return ok({{"user", user_json(users_.set_role(name, role_field(body, Role::kUser)))}});
}

}  // namespace sentimill::api
