#pragma once

#include <cstddef>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sentimill::text {

enum class TokenKind { kWord, kHashtag };

struct Token {
  std::string text;
  TokenKind kind = TokenKind::kWord;

  bool operator==(const Token&) const = default;
};

std::string_view to_string(TokenKind kind);

/// Splits text into case-folded tokens.
///
/// Rules, applied per whitespace-separated chunk:
///  - chunks that are URLs (http://, https://, www.) or whole emoticons
///    ("D:", "(:", "<3", ":-)") are dropped;
///  - `#` followed by letters/digits/underscores yields a HASHTAG token;
///  - `@` mentions are dropped;
///  - a word is a run of Unicode alphabetic characters, decimal digits and
///    inner apostrophes (U+0027, U+2019 normalized to U+0027);
///  - everything else (punctuation, symbols, emoji, in-text emoticons such
///    as ":D") separates tokens and is dropped.
/// Case folding is Unicode simple case folding. Invalid UTF-8 sequences act
/// as separators.
std::vector<Token> tokenize(std::string_view text);

/// Unicode simple case folding of a UTF-8 string. Invalid sequences are
/// copied through unchanged.
std::string fold_case(std::string_view text);

bool is_valid_utf8(std::string_view text) noexcept;

class StopwordList {
 public:
  StopwordList() = default;
  // Entries are case-folded and de-duplicated.
  explicit StopwordList(std::span<const std::string> words);
  StopwordList(std::initializer_list<std::string> words);

  /// One word per line; blank lines and lines starting with '#' ignored.
  static StopwordList parse(std::string_view contents);
  static StopwordList load(const std::filesystem::path& path);

  bool contains(std::string_view word) const { return words_.find(word) != words_.end(); }
  std::size_t size() const noexcept { return words_.size(); }
  bool empty() const noexcept { return words_.empty(); }
  const std::set<std::string, std::less<>>& words() const noexcept { return words_; }

 private:
  std::set<std::string, std::less<>> words_;
};

/// Drops WORD tokens found in the list. HASHTAG tokens are always kept.
std::vector<Token> remove_stopwords(std::vector<Token> tokens, const StopwordList& stopwords);

/// Sliding-window n-grams of token texts joined by a single space.
/// Throws Error("InvalidN") for n == 0.
std::vector<std::string> ngrams(std::span<const Token> tokens, std::size_t n);

}  // namespace sentimill::text
