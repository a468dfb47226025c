#pragma once

#include <memory>

#include "sentimill/api/service.hpp"
#include "sentimill/cli/config.hpp"
#include "sentimill/mapreduce/engine.hpp"
#include "sentimill/orchestrator/orchestrator.hpp"
#include "sentimill/sentiment/lexicon.hpp"
#include "sentimill/store/table_store.hpp"

namespace sentimill::cli {

/// Everything a command or the server needs, rooted at the config's data
/// directory:
///   <data_dir>/tables/     table store
///   <data_dir>/jobs.json   job registry
///   <data_dir>/users.json  accounts
/// The default lexicon and stopword list are registered as "default".
class Runtime {
 public:
  /// Creates the first administrator ("admin") when no account exists,
  /// using config.admin_password or a generated password that is logged.
  explicit Runtime(const CliConfig& config);

  store::TableStore& store() { return *store_; }
  mapreduce::Engine& engine() { return *engine_; }
  orchestrator::Orchestrator& orchestrator() { return *orchestrator_; }
  api::UserStore& users() { return *users_; }
  api::ApiService& service() { return *service_; }
  const std::shared_ptr<sentiment::Resources>& resources() const { return resources_; }
  const CliConfig& config() const { return config_; }

 private:
  CliConfig config_;
  std::unique_ptr<store::TableStore> store_;
  std::shared_ptr<sentiment::Resources> resources_;
  std::unique_ptr<mapreduce::Engine> engine_;
  std::unique_ptr<orchestrator::Orchestrator> orchestrator_;
  std::unique_ptr<api::UserStore> users_;
  std::unique_ptr<api::ApiService> service_;
};

}  // namespace sentimill::cli
