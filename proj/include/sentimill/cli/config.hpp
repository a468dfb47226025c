#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>

namespace sentimill::cli {

struct BindAddress {
  std::string host = "127.0.0.1";
  int port = 8080;
};

/// "host:port" or ":port". Throws Error("BadConfig").
BindAddress parse_bind_address(const std::string& text);

struct CliConfig {
  std::filesystem::path data_dir = "sentimill-data";
  std::string bind_addr = "127.0.0.1:8080";
  int poll_interval_secs = 5;
  std::filesystem::path positive_lexicon;
  std::filesystem::path negative_lexicon;
  std::filesystem::path stopwords;
  std::optional<std::filesystem::path> static_dir;
  int token_ttl_secs = 3600;
  int workers = 2;
  std::optional<std::string> admin_password;  // first start only
};

/// Shipped lexicon and stopword files.
CliConfig default_config();

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_env();

/// Defaults, then the JSON config file, then BIND_ADDR, DATA_DIR,
/// POLL_INTERVAL_SECS and SENTIMILL_ADMIN_PASSWORD from the environment.
/// Relative paths in the file resolve against the file's directory.
/// Throws Error("BadConfig").
CliConfig load_config(const std::optional<std::filesystem::path>& file, const EnvLookup& env);

/// poll_interval >= 1, token TTL >= 1, workers 1..64, parsable bind address,
/// data_dir creatable and writable. Throws Error("BadConfig").
void validate(const CliConfig& config);

}  // namespace sentimill::cli
