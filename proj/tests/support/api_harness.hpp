#pragma once

// An in-process analytics service over a small seeded store, plus the
// expected endpoint x role matrix written out independently of the route
// table.

#include <map>
#include <set>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "sentimill/api/service.hpp"
#include "sentimill/common/timefmt.hpp"
#include "sentimill/sentiment/sentiment_jobs.hpp"
#include "temp_dir.hpp"

namespace sentimill::oracle {

inline std::shared_ptr<sentiment::Resources> harness_resources() {
  auto r = std::make_shared<sentiment::Resources>();
  r->lexicons["default"] = std::make_shared<sentiment::Lexicon>(
      std::map<std::string, double>{{"good", 0.75}, {"great", 1.0}, {"fine", 0.25}},
      std::map<std::string, double>{{"bad", -0.5}, {"awful", -1.0}});
  r->stopwords["default"] = std::make_shared<text::StopwordList>(text::StopwordList{"the", "a", "is"});
  return r;
}

struct ApiHarness {
  explicit ApiHarness(Millis start = 1'402'000'000'000)
      : now(start),
        resources(harness_resources()),
        engine(store, sentiment::builtin_plans(resources)),
        orch(store, engine, orch_options()),
        users(user_options()),
        service(store, orch, users, resources) {
    users.create_user("admin", "admin-pw", api::Role::kAdministrator);
    users.create_user("bob", "bob-pw", api::Role::kUser);
    users.create_user("dave", "dave-pw", api::Role::kUser);
    admin_token = users.authenticate("admin", "admin-pw").token;
    user_token = users.authenticate("bob", "bob-pw").token;

    auto docs = store.create_table({"docs", {"content", "meta"}, 2, 3});
    const std::vector<std::tuple<std::string, std::string, Millis>> rows{
        {"a good day is a great day", "de", 0},         {"the bad match", "br", 3'600'000},
        {"fine fine good", "de", 3'600'000 + 5},        {"awful awful good", "ar", 7'200'000},
        {"nothing to see", "br", 10'800'000},           {"#good a great goal", "ar", 10'800'000 + 1},
    };
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& [text, country, offset] = rows[i];
      const auto key = "row-" + std::to_string(i);
      docs->put(key, "content", "text", text);
      docs->put(key, "meta", "country", country);
      docs->put(key, "meta", "created_at", format_iso8601(start + offset));
    }
    engine.run_job({"seed", mapreduce::Algorithm::kWordCount, "docs", "counts", {{"column", "content:text"}}, 2});
    mr_job_id = orch.create_mr_job(wordcount_spec("wc-out"), "bob").job_id;
    csv_path = dir.write("in.csv", "id,text\n1,good\n2,bad\n");
  }

  static mapreduce::JobSpec wordcount_spec(std::string target) {
    return {"", mapreduce::Algorithm::kWordCount, "docs", std::move(target), {{"column", "content:text"}}, 1};
  }

  nlohmann::json data_job_body(const std::string& target) const {
    return {{"source", {{"type", "csv"}, {"path", csv_path.string()}, {"mapping", {{"text", "content:text"}}},
                        {"key_column", "id"}}},
            {"target_table", target}};
  }

  api::ApiResponse call(const std::string& method, const std::string& path, const std::optional<std::string>& token,
                        const nlohmann::json& body = nullptr, std::map<std::string, std::string> query = {}) {
    api::ApiRequest req;
    req.method = method;
    req.path = path;
    req.query = std::move(query);
    req.token = token;
    if (!body.is_null()) req.body = body.dump();
    return service.handle(req);
  }

  TempDir dir;
  std::filesystem::path csv_path;
  Millis now;
  store::TableStore store;
  std::shared_ptr<sentiment::Resources> resources;
  mapreduce::Engine engine;
  orchestrator::Orchestrator orch;
  api::UserStore users;
  api::ApiService service;
  std::string admin_token;
  std::string user_token;
  std::string mr_job_id;

 private:
  orchestrator::Orchestrator::Options orch_options() {
    orchestrator::Orchestrator::Options o;
    o.clock = [this] { return now; };
    return o;
  }

  api::UserStore::Options user_options() {
    api::UserStore::Options o;
    o.clock = [this] { return now; };
    o.pbkdf2_iterations = 1;
    o.token_ttl = std::chrono::seconds(600);
    return o;
  }
};

enum class Caller { kAnonymous, kUser, kAdministrator };

inline const char* to_string(Caller c) {
  return c == Caller::kAnonymous ? "anonymous" : c == Caller::kUser ? "USER" : "ADMINISTRATOR";
}

// One concrete request per endpoint, valid against a fresh harness, and who
// may make it.
struct MatrixCase {
  std::string method;
  std::string pattern;
  std::string path;
  nlohmann::json body;
  std::map<std::string, std::string> query;
  bool anonymous_allowed = false;
  bool user_allowed = true;
};

inline std::vector<MatrixCase> expected_role_matrix(const ApiHarness& h) {
  const auto mr = nlohmann::json{{"algorithm", "WORDCOUNT"}, {"source_table", "docs"}, {"target_table", "wc2"},
                                 {"params", {{"column", "content:text"}}}};
  const auto login = nlohmann::json{{"username", "dave"}, {"password", "dave-pw"}};
  const auto job = "/jobs/" + h.mr_job_id;
  return {
      {"GET", "/health", "/health", nullptr, {}, true, true},
      {"POST", "/auth/login", "/auth/login", login, {}, true, true},
      {"POST", "/auth/logout", "/auth/logout", nullptr, {}, false, true},
      {"GET", "/jobs", "/jobs", nullptr, {}, false, true},
      {"POST", "/jobs/data", "/jobs/data", h.data_job_body("imported"), {}, false, false},
      {"POST", "/jobs/mapreduce", "/jobs/mapreduce", mr, {}, false, true},
      {"GET", "/jobs/{id}", job, nullptr, {}, false, true},
      {"PUT", "/jobs/{id}", job, mr, {}, false, true},
      {"DELETE", "/jobs/{id}", job, nullptr, {}, false, false},
      {"GET", "/tables", "/tables", nullptr, {}, false, true},
      {"GET", "/tables/{name}", "/tables/docs", nullptr, {}, false, true},
      {"DELETE", "/tables/{name}", "/tables/docs", nullptr, {}, false, false},
      {"GET", "/tables/{name}/rows", "/tables/docs/rows", nullptr, {{"limit", "2"}}, false, true},
      {"DELETE", "/tables/{name}/rows/{key}", "/tables/docs/rows/row-0", nullptr, {}, false, false},
      {"GET", "/charts/{kind}", "/charts/bubble", nullptr, {{"source", "counts"}}, false, true},
      {"GET", "/users", "/users", nullptr, {}, false, false},
      {"POST", "/users", "/users", nlohmann::json{{"username", "carol"}, {"password", "pw"}}, {}, false, false},
      {"DELETE", "/users/{name}", "/users/dave", nullptr, {}, false, false},
      {"POST", "/users/{name}/role", "/users/dave/role", nlohmann::json{{"role", "ADMINISTRATOR"}}, {}, false, false},
  };
}

/// Runs every endpoint as every caller against a fresh harness. Allowed
/// calls must succeed (2xx); denied ones must fail with Unauthorized for
/// anonymous callers and Forbidden for USERs. Also checks the matrix covers
/// exactly the served routes. Returns the violations.
inline std::vector<std::string> check_role_matrix(std::size_t* checked = nullptr) {
  std::vector<std::string> problems;
  std::set<std::pair<std::string, std::string>> served, expected;
  for (const auto& r : api::routes()) served.insert({r.method, r.pattern});
  std::size_t count = 0;
  const auto cases = expected_role_matrix(ApiHarness());
  for (std::size_t i = 0; i < cases.size(); ++i) {
    expected.insert({cases[i].method, cases[i].pattern});
    for (auto caller : {Caller::kAnonymous, Caller::kUser, Caller::kAdministrator}) {
      ApiHarness h;
      const auto c = expected_role_matrix(h)[i];
      std::optional<std::string> token;
      if (caller == Caller::kUser) token = h.user_token;
      if (caller == Caller::kAdministrator) token = h.admin_token;
      const bool allowed = caller == Caller::kAdministrator || c.anonymous_allowed ||
                           (caller == Caller::kUser && c.user_allowed);
      const auto res = h.call(c.method, c.path, token, c.body, c.query);
      ++count;
      const auto label = c.method + " " + c.path + " as " + to_string(caller) + ": " + res.text();
      if (allowed) {
        if (res.http_status < 200 || res.http_status >= 300) problems.push_back("expected success, " + label);
      } else {
        const auto want = caller == Caller::kAnonymous ? "Unauthorized" : "Forbidden";
        if (res.body.value("code", "") != want || res.body.value("status", "") != "error") {
          problems.push_back(std::string("expected ") + want + ", " + label);
        }
      }
    }
  }
  if (served != expected) problems.push_back("role matrix does not cover exactly the served routes");
  if (checked != nullptr) *checked = count;
  return problems;
}

}  // namespace sentimill::oracle
