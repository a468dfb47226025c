#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sentimill/common/clock.hpp"

namespace sentimill::api {

enum class Role { kUser, kAdministrator };

std::string_view to_string(Role role);
std::optional<Role> parse_role(std::string_view text);

struct UserInfo {
  std::string username;
  Role role = Role::kUser;

  bool operator==(const UserInfo&) const = default;
};

struct Session {
  std::string token;
  std::string username;
  Role role = Role::kUser;
  Millis expires_at = 0;
};

/// PBKDF2-HMAC-SHA256, 32-byte output, lowercase hex.
std::string hash_password(std::string_view password, std::string_view salt, int iterations);

/// Accounts plus in-memory session tokens. Passwords are kept as salted
/// PBKDF2 hashes in `users.json` when a path is given.
class UserStore {
 public:
  struct Options {
    Clock clock = system_clock();
    std::optional<std::filesystem::path> path;
    std::chrono::seconds token_ttl{3600};
    int pbkdf2_iterations = 100'000;
  };

  /// Loads the file if present. Throws Error("CorruptUserStore").
  explicit UserStore(Options options);

  bool empty() const;

  /// Throws DuplicateUser, InvalidSpec (bad name or empty password).
  UserInfo create_user(const std::string& username, std::string_view password, Role role);
  /// Throws UnknownUser, LastAdministrator. Revokes the user's sessions.
  void delete_user(const std::string& username);
  /// Throws UnknownUser, LastAdministrator.
  UserInfo set_role(const std::string& username, Role role);
  std::vector<UserInfo> list() const;

  /// Throws InvalidCredentials without saying which part was wrong.
  Session authenticate(const std::string& username, std::string_view password);
  /// Throws Unauthorized for unknown or expired tokens. The role is the
  /// user's current one.
  Session resolve(const std::string& token) const;
  void revoke(const std::string& token);

 private:
  struct Account {
    Role role = Role::kUser;
    std::string salt;  // hex
    int iterations = 0;
    std::string hash;  // hex
  };

  std::size_t admin_count_locked() const;
  void persist_locked() const;

  Options options_;
  mutable std::mutex mu_;
  std::map<std::string, Account> users_;
  mutable std::map<std::string, Session> sessions_;
};

}  // namespace sentimill::api
