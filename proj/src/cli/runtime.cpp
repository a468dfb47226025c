#include "sentimill/cli/runtime.hpp"

#include <openssl/rand.h>
#include <spdlog/spdlog.h>

#include "sentimill/common/error.hpp"
#include "sentimill/sentiment/sentiment_jobs.hpp"

namespace sentimill::cli {

namespace {

std::string generated_password() {
  static constexpr char kAlphabet[] = "abcdefghijkmnpqrstuvwxyzABCDEFGHJKLMNPQRSTUVWXYZ23456789";
  unsigned char bytes[16];
  if (RAND_bytes(bytes, sizeof bytes) != 1) throw Error("CryptoFailure", "RAND_bytes failed");
  std::string out;
  for (unsigned char b : bytes) out.push_back(kAlphabet[b % (sizeof kAlphabet - 1)]);
  return out;
}

}  // namespace

Runtime::Runtime(const CliConfig& config) : config_(config) {
  validate(config_);
  store_ = std::make_unique<store::TableStore>(config_.data_dir / "tables");

  resources_ = std::make_shared<sentiment::Resources>();
  try {
    resources_->lexicons["default"] = std::make_shared<sentiment::Lexicon>(
        sentiment::Lexicon::load(config_.positive_lexicon, config_.negative_lexicon));
    resources_->stopwords["default"] =
        std::make_shared<text::StopwordList>(text::StopwordList::load(config_.stopwords));
  } catch (const Error& e) {
    throw Error("BadConfig", std::string(e.code()) + ": " + e.what());
  }
  engine_ = std::make_unique<mapreduce::Engine>(*store_, sentiment::builtin_plans(resources_));

  orchestrator::Orchestrator::Options orch;
  orch.registry_path = config_.data_dir / "jobs.json";
  orch.workers = static_cast<std::size_t>(config_.workers);
  orch.poll_interval = std::chrono::seconds(config_.poll_interval_secs);
  orchestrator_ = std::make_unique<orchestrator::Orchestrator>(*store_, *engine_, orch);

  api::UserStore::Options users;
  users.path = config_.data_dir / "users.json";
  users.token_ttl = std::chrono::seconds(config_.token_ttl_secs);
  users_ = std::make_unique<api::UserStore>(users);
  if (users_->empty()) {
    const auto password = config_.admin_password.value_or(generated_password());
    users_->create_user("admin", password, api::Role::kAdministrator);
    if (config_.admin_password) {
      spdlog::info("created administrator 'admin'");
    } else {
      spdlog::warn("created administrator 'admin' with generated password {}", password);
    }
  }
  service_ = std::make_unique<api::ApiService>(*store_, *orchestrator_, *users_, resources_);
}

}  // namespace sentimill::cli
