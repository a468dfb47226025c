#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sentimill/api/charts.hpp"
#include "sentimill/api/users.hpp"
#include "sentimill/common/error.hpp"
#include "sentimill/orchestrator/orchestrator.hpp"
#include "sentimill/sentiment/lexicon.hpp"
#include "sentimill/store/table_store.hpp"

namespace sentimill::api {

struct ApiRequest {
  std::string method;  // "GET", "POST", "PUT", "DELETE"
  std::string path;    // decoded, without the query string
  std::map<std::string, std::string> query;
  std::string body;
  std::optional<std::string> token;  // from "Authorization: Bearer <token>"
};

struct ApiResponse {
  int http_status = 200;
  nlohmann::json body;

  /// Compact serialization with sorted keys; invalid UTF-8 is replaced.
  std::string text() const;
};

enum class Access { kPublic, kUser, kAdministrator };

struct RouteInfo {
  std::string method;
  std::string pattern;  // "/jobs/{id}"
  Access access = Access::kUser;
};

/// Every route with the least role that may call it.
const std::vector<RouteInfo>& routes();

/// HTTP status for an error code (404 for Unknown*, 409 for conflicts, ...).
int http_status_for(std::string_view code);

/// {"status":"error","code":...,"message":...}
ApiResponse error_response(const Error& error);

/// Request dispatch for the analytics service. Stateless apart from the
/// store, orchestrator and user store it fronts; safe to call concurrently.
class ApiService {
 public:
  ApiService(store::TableStore& store, orchestrator::Orchestrator& orchestrator, UserStore& users,
             std::shared_ptr<const sentiment::Resources> resources);

  /// Never throws.
  ApiResponse handle(const ApiRequest& request);

  /// The body of GET /charts/{kind}; the CLI export writes exactly this.
  ApiResponse chart(ChartKind kind, const std::map<std::string, std::string>& params) const;

 private:
  using Params = std::map<std::string, std::string>;

  ApiResponse dispatch(const RouteInfo& route, const Params& vars, const ApiRequest& request,
                       const std::optional<Session>& session);
  ApiResponse login(const ApiRequest& request);
  ApiResponse jobs(const RouteInfo& route, const Params& vars, const ApiRequest& request, const Session& session);
  ApiResponse tables(const RouteInfo& route, const Params& vars, const ApiRequest& request);
  ApiResponse users(const RouteInfo& route, const Params& vars, const ApiRequest& request);

  store::TableStore& store_;
  orchestrator::Orchestrator& orchestrator_;
  UserStore& users_;
  std::shared_ptr<const sentiment::Resources> resources_;
};

}  // namespace sentimill::api
