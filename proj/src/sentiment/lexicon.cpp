#include "sentimill/sentiment/lexicon.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sentimill/common/error.hpp"

namespace sentimill::sentiment {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::map<std::string, double, std::less<>> fold_list(const std::map<std::string, double>& words, bool positive) {
  std::map<std::string, double, std::less<>> out;
  for (const auto& [raw, score] : words) {
    const auto word = text::fold_case(raw);
    if (word.empty() || word.find_first_of(" \t\n") != std::string::npos) {
      throw Error("InvalidLexicon", "invalid lexicon word '" + raw + "'");
    }
    if (!std::isfinite(score) || score < -1.0 || score > 1.0) {
      throw Error("InvalidLexicon", "score for '" + raw + "' outside [-1, 1]");
    }
    if (positive && !(score > 0.0)) throw Error("InvalidLexicon", "positive word '" + raw + "' needs a score > 0");
    if (!positive && !(score < 0.0)) throw Error("InvalidLexicon", "negative word '" + raw + "' needs a score < 0");
    if (!out.emplace(word, score).second) {
      throw Error("InvalidLexicon", "word '" + raw + "' listed twice after case folding");
    }
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("FileNotFound", "cannot read lexicon " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

Lexicon::Lexicon(std::map<std::string, double> positive, std::map<std::string, double> negative,
                 Validation validation)
    : positive_(fold_list(positive, true)), negative_(fold_list(negative, false)) {
  if (validation == Validation::kStrict) {
    for (const auto& [word, _] : positive_) {
      if (negative_.count(word) != 0) {
        throw Error("InvalidLexicon", "word '" + word + "' appears in both positive and negative lists");
      }
    }
  }
}

std::map<std::string, double> Lexicon::parse_list(std::string_view contents, std::string_view origin) {
  if (!text::is_valid_utf8(contents)) throw Error("InvalidLexicon", std::string(origin) + ": not valid UTF-8");
  std::map<std::string, double> out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos <= contents.size()) {
    auto nl = contents.find('\n', pos);
    if (nl == std::string_view::npos) nl = contents.size();
    const auto line = trim(contents.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;

    const auto where = std::string(origin) + ":" + std::to_string(line_no);
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) throw Error("InvalidLexicon", where + ": expected 'word<TAB>score'");
    const auto word = trim(line.substr(0, tab));
    const auto score_text = trim(line.substr(tab + 1));
    double score = 0.0;
    auto [ptr, ec] = std::from_chars(score_text.data(), score_text.data() + score_text.size(), score);
    if (word.empty() || ec != std::errc() || ptr != score_text.data() + score_text.size()) {
      throw Error("InvalidLexicon", where + ": malformed entry");
    }
    if (!out.emplace(std::string(word), score).second) {
      throw Error("InvalidLexicon", where + ": duplicate word '" + std::string(word) + "'");
    }
  }
  return out;
}

Lexicon Lexicon::load(const std::filesystem::path& positive, const std::filesystem::path& negative) {
  return Lexicon(parse_list(read_file(positive), positive.string()),
                 parse_list(read_file(negative), negative.string()));
}

std::optional<double> Lexicon::score(std::string_view word) const {
  if (auto it = positive_.find(word); it != positive_.end()) return it->second;
  if (auto it = negative_.find(word); it != negative_.end()) return it->second;
  return std::nullopt;
}

std::shared_ptr<const Lexicon> Resources::lexicon(std::string_view name) const {
  auto it = lexicons.find(name);
  if (it == lexicons.end()) throw Error("UnknownLexicon", "no lexicon named '" + std::string(name) + "'");
  return it->second;
}

std::shared_ptr<const text::StopwordList> Resources::stopword_list(std::string_view name) const {
  if (name == "none") return std::make_shared<const text::StopwordList>();
  auto it = stopwords.find(name);
  if (it == stopwords.end()) throw Error("UnknownStopwords", "no stopword list named '" + std::string(name) + "'");
  return it->second;
}

std::shared_ptr<const text::StopwordList> Resources::default_stopwords() const {
  auto it = stopwords.find("default");
  if (it == stopwords.end()) return std::make_shared<const text::StopwordList>();
  return it->second;
}

}  // namespace sentimill::sentiment
