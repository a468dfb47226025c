#include "sentimill/cli/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sentimill/common/error.hpp"

#ifndef SENTIMILL_RESOURCE_DIR
#define SENTIMILL_RESOURCE_DIR "data"
#endif

namespace sentimill::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int parse_int(const std::string& text, const std::string& what) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error("BadConfig", what + ": expected an integer, got '" + text + "'");
  }
  return v;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

BindAddress parse_bind_address(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos) throw Error("BadConfig", "bind_addr: expected host:port, got '" + text + "'");
  BindAddress out;
  out.host = colon == 0 ? "0.0.0.0" : text.substr(0, colon);
  out.port = parse_int(text.substr(colon + 1), "bind_addr port");
  if (out.port < 0 || out.port > 65535) throw Error("BadConfig", "bind_addr: port out of range");
  return out;
}

CliConfig default_config() {
  CliConfig c;
  const fs::path resources(SENTIMILL_RESOURCE_DIR);
  c.positive_lexicon = resources / "lexicon" / "positive.tsv";
  c.negative_lexicon = resources / "lexicon" / "negative.tsv";
  c.stopwords = resources / "stopwords" / "en.txt";
  return c;
}

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    const char* v = std::getenv(name.c_str());
    if (v == nullptr) return std::nullopt;
    return std::string(v);
  };
}

CliConfig load_config(const std::optional<fs::path>& file, const EnvLookup& env) {
  CliConfig c = default_config();
  if (file) {
    std::ifstream in(*file, std::ios::binary);
    if (!in) throw Error("BadConfig", "cannot read config file " + file->string());
    std::stringstream buf;
    buf << in.rdbuf();
    const auto base = file->parent_path();
    try {
      const auto doc = json::parse(buf.str());
      if (!doc.is_object()) throw Error("BadConfig", file->string() + ": expected a JSON object");
      static const std::set<std::string> kKeys{"data_dir",  "bind_addr",      "poll_interval_secs",
                                               "lexicon",   "stopwords",      "static_dir",
                                               "workers",   "token_ttl_secs", "admin_password"};
      for (const auto& [key, _] : doc.items()) {
        if (kKeys.count(key) == 0) throw Error("BadConfig", file->string() + ": unknown key '" + key + "'");
      }
      if (doc.contains("data_dir")) c.data_dir = resolve(base, doc["data_dir"].get<std::string>());
      if (doc.contains("bind_addr")) c.bind_addr = doc["bind_addr"].get<std::string>();
      if (doc.contains("poll_interval_secs")) c.poll_interval_secs = doc["poll_interval_secs"].get<int>();
      if (doc.contains("lexicon")) {
        const auto& lex = doc["lexicon"];
        if (lex.contains("positive")) c.positive_lexicon = resolve(base, lex["positive"].get<std::string>());
        if (lex.contains("negative")) c.negative_lexicon = resolve(base, lex["negative"].get<std::string>());
      }
      if (doc.contains("stopwords")) c.stopwords = resolve(base, doc["stopwords"].get<std::string>());
      if (doc.contains("static_dir")) c.static_dir = resolve(base, doc["static_dir"].get<std::string>());
      if (doc.contains("workers")) c.workers = doc["workers"].get<int>();
      if (doc.contains("token_ttl_secs")) c.token_ttl_secs = doc["token_ttl_secs"].get<int>();
      if (doc.contains("admin_password")) c.admin_password = doc["admin_password"].get<std::string>();
    } catch (const json::exception& e) {
      throw Error("BadConfig", file->string() + ": " + e.what());
    }
  }
  if (auto v = env("BIND_ADDR")) c.bind_addr = *v;
  if (auto v = env("DATA_DIR")) c.data_dir = *v;
  if (auto v = env("POLL_INTERVAL_SECS")) c.poll_interval_secs = parse_int(*v, "POLL_INTERVAL_SECS");
  if (auto v = env("SENTIMILL_ADMIN_PASSWORD")) c.admin_password = *v;
  return c;
}

void validate(const CliConfig& c) {
  parse_bind_address(c.bind_addr);
  if (c.poll_interval_secs < 1) throw Error("BadConfig", "poll_interval_secs must be >= 1");
  if (c.token_ttl_secs < 1) throw Error("BadConfig", "token_ttl_secs must be >= 1");
  if (c.workers < 1 || c.workers > 64) throw Error("BadConfig", "workers must be in 1..64");
  std::error_code ec;
  fs::create_directories(c.data_dir, ec);
  if (ec || !fs::is_directory(c.data_dir)) {
    throw Error("BadConfig", "data_dir " + c.data_dir.string() + " cannot be created");
  }
  const auto probe = c.data_dir / ".write-probe";
  {
    std::ofstream out(probe);
    if (!out) throw Error("BadConfig", "data_dir " + c.data_dir.string() + " is not writable");
  }
  fs::remove(probe, ec);
}

}  // namespace sentimill::cli
