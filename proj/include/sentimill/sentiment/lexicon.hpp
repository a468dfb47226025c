#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "sentimill/text/text_pipeline.hpp"

namespace sentimill::sentiment {

// Two pre-scored word lists. Positive scores lie in (0, 1], negative scores
// in [-1, 0). Words are stored case-folded so they compare equal to tokens.
class Lexicon {
 public:
  enum class Validation {
    kStrict,        // a word in both lists is an error
    kAllowOverlap,  // overlap tolerated; lookups prefer the positive list
  };

  Lexicon() = default;
  Lexicon(std::map<std::string, double> positive, std::map<std::string, double> negative,
          Validation validation = Validation::kStrict);

  /// Parses "word<TAB>score" lines. Blank lines and '#' comments are skipped.
  static std::map<std::string, double> parse_list(std::string_view contents, std::string_view origin);

  static Lexicon load(const std::filesystem::path& positive, const std::filesystem::path& negative);

  /// Positive list first, then negative.
  std::optional<double> score(std::string_view word) const;

  const std::map<std::string, double, std::less<>>& positive() const noexcept { return positive_; }
  const std::map<std::string, double, std::less<>>& negative() const noexcept { return negative_; }
  std::size_t size() const noexcept { return positive_.size() + negative_.size(); }

 private:
  std::map<std::string, double, std::less<>> positive_;
  std::map<std::string, double, std::less<>> negative_;
};

// Named lexicons and stopword lists that jobs refer to by name.
struct Resources {
  std::map<std::string, std::shared_ptr<const Lexicon>, std::less<>> lexicons;
  std::map<std::string, std::shared_ptr<const text::StopwordList>, std::less<>> stopwords;

  /// Throws Error("UnknownLexicon").
  std::shared_ptr<const Lexicon> lexicon(std::string_view name) const;

  /// "none" is always the empty list. Throws Error("UnknownStopwords").
  std::shared_ptr<const text::StopwordList> stopword_list(std::string_view name) const;

  /// The list named "default" if registered, otherwise the empty list.
  std::shared_ptr<const text::StopwordList> default_stopwords() const;
};

}  // namespace sentimill::sentiment
