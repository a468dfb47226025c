#include "sentimill/api/users.hpp"

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/rand.h>

#include <fstream>
#include <regex>
#include <sstream>

#include <json.hpp>

#include "sentimill/common/error.hpp"

namespace sentimill::api {

using nlohmann::json;

namespace {

constexpr int kUserFileVersion = 1;

std::string to_hex(const unsigned char* bytes, std::size_t n) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(n * 2);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(kDigits[bytes[i] >> 4]);
    out.push_back(kDigits[bytes[i] & 0xf]);
  }
  return out;
}

std::string random_hex(std::size_t bytes) {
  std::vector<unsigned char> buf(bytes);
  if (RAND_bytes(buf.data(), static_cast<int>(buf.size())) != 1) {
    throw Error("CryptoFailure", "RAND_bytes failed");
  }
  return to_hex(buf.data(), buf.size());
}

bool constant_time_equal(const std::string& a, const std::string& b) {
  return a.size() == b.size() && CRYPTO_memcmp(a.data(), b.data(), a.size()) == 0;
}

void check_username(const std::string& name) {
  static const std::regex kPattern("[A-Za-z0-9_.-]{1,64}");
  if (!std::regex_match(name, kPattern)) {
    throw Error("InvalidSpec", "username: 1-64 characters from [A-Za-z0-9_.-]");
  }
}

}  // namespace

std::string_view to_string(Role role) { return role == Role::kAdministrator ? "ADMINISTRATOR" : "USER"; }

std::optional<Role> parse_role(std::string_view text) {
  if (text == "USER") return Role::kUser;
  if (text == "ADMINISTRATOR") return Role::kAdministrator;
  return std::nullopt;
}

std::string hash_password(std::string_view password, std::string_view salt, int iterations) {
  unsigned char out[32];
  if (PKCS5_PBKDF2_HMAC(password.data(), static_cast<int>(password.size()),
                        reinterpret_cast<const unsigned char*>(salt.data()), static_cast<int>(salt.size()),
                        iterations, EVP_sha256(), sizeof out, out) != 1) {
    throw Error("CryptoFailure", "PBKDF2 failed");
  }
  return to_hex(out, sizeof out);
}

UserStore::UserStore(Options options) : options_(std::move(options)) {
  if (!options_.path || !std::filesystem::exists(*options_.path)) return;
  const auto& path = *options_.path;
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    const auto doc = json::parse(buf.str());
    if (doc.at("format_version").get<int>() != kUserFileVersion) {
      throw Error("CorruptUserStore", path.string() + ": unsupported format_version");
    }
    for (const auto& u : doc.at("users")) {
      auto role = parse_role(u.at("role").get<std::string>());
      if (!role) throw Error("CorruptUserStore", path.string() + ": bad role");
      users_[u.at("username").get<std::string>()] =
          Account{*role, u.at("salt").get<std::string>(), u.at("iterations").get<int>(), u.at("hash").get<std::string>()};
    }
  } catch (const json::exception& e) {
    throw Error("CorruptUserStore", path.string() + ": " + e.what());
  }
}

bool UserStore::empty() const {
  std::lock_guard lock(mu_);
  return users_.empty();
}

std::size_t UserStore::admin_count_locked() const {
  return static_cast<std::size_t>(std::count_if(users_.begin(), users_.end(), [](const auto& kv) {
    return kv.second.role == Role::kAdministrator;
  }));
}

void UserStore::persist_locked() const {
  if (!options_.path) return;
  json doc{{"format_version", kUserFileVersion}, {"users", json::array()}};
  for (const auto& [name, a] : users_) {
    doc["users"].push_back(
        {{"username", name}, {"role", to_string(a.role)}, {"salt", a.salt}, {"iterations", a.iterations}, {"hash", a.hash}});
  }
  const auto& path = *options_.path;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << doc.dump(2) << '\n';
    if (!out) throw Error("IoError", "cannot write " + tmp.string());
  }
  std::filesystem::permissions(tmp, std::filesystem::perms::owner_read | std::filesystem::perms::owner_write);
  std::filesystem::rename(tmp, path);
}

UserInfo UserStore::create_user(const std::string& username, std::string_view password, Role role) {
  check_username(username);
  if (password.empty()) throw Error("InvalidSpec", "password: must not be empty");
  Account account{role, random_hex(16), options_.pbkdf2_iterations, ""};
  account.hash = hash_password(password, account.salt, account.iterations);
  std::lock_guard lock(mu_);
  if (users_.count(username) != 0) throw Error("DuplicateUser", "user '" + username + "' already exists");
  users_[username] = std::move(account);
  persist_locked();
  return {username, role};
}

void UserStore::delete_user(const std::string& username) {
  std::lock_guard lock(mu_);
  auto it = users_.find(username);
  if (it == users_.end()) throw Error("UnknownUser", "no user '" + username + "'");
  if (it->second.role == Role::kAdministrator && admin_count_locked() == 1) {
    throw Error("LastAdministrator", "cannot remove the last administrator");
  }
  users_.erase(it);
  std::erase_if(sessions_, [&](const auto& kv) { return kv.second.username == username; });
  persist_locked();
}

UserInfo UserStore::set_role(const std::string& username, Role role) {
  std::lock_guard lock(mu_);
  auto it = users_.find(username);
  if (it == users_.end()) throw Error("UnknownUser", "no user '" + username + "'");
  if (it->second.role == Role::kAdministrator && role != Role::kAdministrator && admin_count_locked() == 1) {
    throw Error("LastAdministrator", "cannot demote the last administrator");
  }
  it->second.role = role;
  persist_locked();
  return {username, role};
}

std::vector<UserInfo> UserStore::list() const {
  std::lock_guard lock(mu_);
  std::vector<UserInfo> out;
  for (const auto& [name, a] : users_) out.push_back({name, a.role});
  return out;
}

Session UserStore::authenticate(const std::string& username, std::string_view password) {
  Account account;
  {
    std::lock_guard lock(mu_);
    auto it = users_.find(username);
    if (it == users_.end()) throw Error("InvalidCredentials", "invalid username or password");
    account = it->second;
  }
  if (!constant_time_equal(hash_password(password, account.salt, account.iterations), account.hash)) {
    throw Error("InvalidCredentials", "invalid username or password");
  }
  Session session{random_hex(32), username, account.role,
                  options_.clock() + std::chrono::duration_cast<std::chrono::milliseconds>(options_.token_ttl).count()};
  std::lock_guard lock(mu_);
  const Millis now = options_.clock();
  std::erase_if(sessions_, [&](const auto& kv) { return kv.second.expires_at <= now; });
  sessions_[session.token] = session;
  return session;
}

Session UserStore::resolve(const std::string& token) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(token);
  if (it == sessions_.end()) throw Error("Unauthorized", "missing or unknown session token");
  if (it->second.expires_at <= options_.clock()) {
    sessions_.erase(it);
    throw Error("Unauthorized", "session expired");
  }
  auto user = users_.find(it->second.username);
  if (user == users_.end()) throw Error("Unauthorized", "user no longer exists");
  Session s = it->second;
  s.role = user->second.role;
  return s;
}

void UserStore::revoke(const std::string& token) {
  std::lock_guard lock(mu_);
  sessions_.erase(token);
}

}  // namespace sentimill::api
