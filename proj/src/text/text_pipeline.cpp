#include "sentimill/text/text_pipeline.hpp"

#include <fstream>
#include <sstream>

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include "sentimill/common/error.hpp"

namespace sentimill::text {
namespace {

constexpr UChar32 kApostrophe = 0x27;
constexpr UChar32 kRightSingleQuote = 0x2019;

struct CodePoint {
  UChar32 cp;         // negative for an invalid sequence
  std::size_t begin;  // byte offsets into the source
  std::size_t end;
};

std::vector<CodePoint> decode(std::string_view s) {
  std::vector<CodePoint> out;
  out.reserve(s.size());
  const auto* bytes = reinterpret_cast<const std::uint8_t*>(s.data());
  const auto length = static_cast<std::int32_t>(s.size());
  std::int32_t i = 0;
  while (i < length) {
    const std::int32_t begin = i;
    UChar32 c;
    U8_NEXT(bytes, i, length, c);
    out.push_back({c, static_cast<std::size_t>(begin), static_cast<std::size_t>(i)});
  }
  return out;
}

void append_utf8(std::string& out, UChar32 c) {
  char buf[U8_MAX_LENGTH];
  std::int32_t n = 0;
  U8_APPEND_UNSAFE(buf, n, c);
  out.append(buf, static_cast<std::size_t>(n));
}

bool is_letter_or_digit(UChar32 c) { return c >= 0 && (u_isUAlphabetic(c) || u_isdigit(c)); }
bool is_mark(UChar32 c) {
  if (c < 0) return false;
  const auto type = u_charType(c);
  return type == U_NON_SPACING_MARK || type == U_COMBINING_SPACING_MARK || type == U_ENCLOSING_MARK;
}
// Combining marks continue a word (Devanagari virama, Hebrew points, ...).
bool is_word_continue(UChar32 c) { return is_letter_or_digit(c) || is_mark(c); }
bool is_apostrophe(UChar32 c) { return c == kApostrophe || c == kRightSingleQuote; }
bool is_tag_char(UChar32 c) { return is_word_continue(c) || c == '_'; }
bool is_space(UChar32 c) { return c >= 0 && u_isUWhiteSpace(c); }

bool is_eye(UChar32 c) { return c == ':' || c == ';' || c == '='; }
bool is_nose(UChar32 c) { return c == '-' || c == '\'' || c == '^'; }

bool is_symbol_mouth(UChar32 c) {
  switch (c) {
    case ')': case '(': case ']': case '[': case '}': case '{': case '/': case '\\':
    case '|': case '*': case '@': case '$': case '<': case '>':
      return true;
    default:
      return false;
  }
}

bool is_letter_mouth(UChar32 c) {
  switch (c) {
    case 'D': case 'P': case 'p': case 'O': case 'o': case 'S': case 's': case 'X': case 'x':
    case 'b': case '3':
      return true;
    default:
      return false;
  }
}

// Length (in code points) of an emoticon starting at `i`, or 0. A letter
// mouth only counts when not followed by another letter/digit, so ":Dog"
// is ':' + "dog".
std::size_t emoticon_at(std::span<const CodePoint> cps, std::size_t i) {
  auto at = [&](std::size_t k) -> UChar32 { return k < cps.size() ? cps[k].cp : -1; };
  std::size_t k = i;
  if (at(k) == '>' && is_eye(at(k + 1))) ++k;
  if (at(k) == '<') {
    // Heart: "<3", "</3".
    std::size_t m = k + 1;
    if (at(m) == '/') ++m;
    if (at(m) != '3') return 0;
    while (at(m) == '3') ++m;
    return is_letter_or_digit(at(m)) ? 0 : m - i;
  }
  if (!is_eye(at(k))) return 0;
  ++k;
  if (is_nose(at(k)) && (is_symbol_mouth(at(k + 1)) || is_letter_mouth(at(k + 1)))) ++k;
  const UChar32 mouth = at(k);
  if (is_symbol_mouth(mouth)) {
    while (at(k) == mouth) ++k;
    return k - i;
  }
  if (is_letter_mouth(mouth)) {
    while (at(k) == mouth) ++k;
    return is_word_continue(at(k)) ? 0 : k - i;
  }
  return 0;
}

bool has_prefix_ci(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    char c = s[i];
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    if (c != prefix[i]) return false;
  }
  return true;
}

bool is_url(std::string_view chunk) {
  return has_prefix_ci(chunk, "http://") || has_prefix_ci(chunk, "https://") || has_prefix_ci(chunk, "www.");
}

// Reverse-order emoticons such as "D:", "(:", "):" are recognized only as
// whole chunks; inside words "D:" is too ambiguous.
bool is_reverse_emoticon(std::span<const CodePoint> cps) {
  if (cps.size() < 2 || cps.size() > 4) return false;
  std::size_t k = 0;
  const UChar32 mouth = cps[0].cp;
  if (!is_symbol_mouth(mouth) && mouth != 'D' && mouth != 'd' && mouth != 'P' && mouth != 'p' &&
      mouth != 'O' && mouth != 'o') {
    return false;
  }
  while (k < cps.size() && cps[k].cp == mouth) ++k;
  if (k < cps.size() && is_nose(cps[k].cp)) ++k;
  return k + 1 == cps.size() && is_eye(cps[k].cp);
}

void fold_into(std::string& out, std::span<const CodePoint> cps) {
  for (const auto& c : cps) {
    UChar32 v = c.cp == kRightSingleQuote ? kApostrophe : c.cp;
    append_utf8(out, u_foldCase(v, U_FOLD_CASE_DEFAULT));
  }
}

void tokenize_chunk(std::span<const CodePoint> cps, std::vector<Token>& out) {
  if (is_reverse_emoticon(cps)) return;
  std::size_t i = 0;
  while (i < cps.size()) {
    const UChar32 c = cps[i].cp;
    if (c == '#' || c == '@') {
      std::size_t j = i + 1;
      bool has_alnum = false;
      while (j < cps.size() && is_tag_char(cps[j].cp)) {
        has_alnum = has_alnum || is_letter_or_digit(cps[j].cp);
        ++j;
      }
      if (j > i + 1) {
        if (c == '#' && has_alnum) {
          Token tok{"#", TokenKind::kHashtag};
          fold_into(tok.text, cps.subspan(i + 1, j - i - 1));
          out.push_back(std::move(tok));
        }
        i = j;
        continue;
      }
      ++i;
      continue;
    }
    if (const std::size_t emo = emoticon_at(cps, i); emo > 0) {
      i += emo;
      continue;
    }
    if (is_letter_or_digit(c)) {
      std::size_t j = i;
      while (j < cps.size() && (is_word_continue(cps[j].cp) || is_apostrophe(cps[j].cp))) ++j;
      std::size_t end = j;
      while (end > i && is_apostrophe(cps[end - 1].cp)) --end;
      Token tok;
      fold_into(tok.text, cps.subspan(i, end - i));
      out.push_back(std::move(tok));
      i = j;
      continue;
    }
    ++i;
  }
}

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r' || s[b] == '\n')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '\n')) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace

std::string_view to_string(TokenKind kind) { return kind == TokenKind::kHashtag ? "hashtag" : "word"; }

std::vector<Token> tokenize(std::string_view text) {
  const auto cps = decode(text);
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < cps.size()) {
    while (i < cps.size() && is_space(cps[i].cp)) ++i;
    std::size_t j = i;
    while (j < cps.size() && !is_space(cps[j].cp)) ++j;
    if (j > i) {
      const std::string_view chunk = text.substr(cps[i].begin, cps[j - 1].end - cps[i].begin);
      if (!is_url(chunk)) tokenize_chunk(std::span<const CodePoint>(cps).subspan(i, j - i), out);
    }
    i = j;
  }
  return out;
}

std::string fold_case(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (const auto& c : decode(text)) {
    if (c.cp < 0) {
      out.append(text.substr(c.begin, c.end - c.begin));
    } else {
      append_utf8(out, u_foldCase(c.cp, U_FOLD_CASE_DEFAULT));
    }
  }
  return out;
}

bool is_valid_utf8(std::string_view text) noexcept {
  const auto* bytes = reinterpret_cast<const std::uint8_t*>(text.data());
  const auto length = static_cast<std::int32_t>(text.size());
  std::int32_t i = 0;
  while (i < length) {
    UChar32 c;
    U8_NEXT(bytes, i, length, c);
    if (c < 0) return false;
  }
  return true;
}

StopwordList::StopwordList(std::span<const std::string> words) {
  for (const auto& w : words) {
    auto folded = fold_case(trim(w));
    if (!folded.empty()) words_.insert(std::move(folded));
  }
}

StopwordList::StopwordList(std::initializer_list<std::string> words)
    : StopwordList(std::span<const std::string>(words.begin(), words.size())) {}

StopwordList StopwordList::parse(std::string_view contents) {
  std::vector<std::string> words;
  std::size_t pos = 0;
  while (pos <= contents.size()) {
    auto nl = contents.find('\n', pos);
    if (nl == std::string_view::npos) nl = contents.size();
    auto line = trim(contents.substr(pos, nl - pos));
    if (!line.empty() && line.front() != '#') words.push_back(std::move(line));
    pos = nl + 1;
  }
  return StopwordList(words);
}

StopwordList StopwordList::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("FileNotFound", "cannot read stopword list " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const auto contents = ss.str();
  if (!is_valid_utf8(contents)) throw Error("InvalidStopwords", "stopword list is not UTF-8: " + path.string());
  return parse(contents);
}

std::vector<Token> remove_stopwords(std::vector<Token> tokens, const StopwordList& stopwords) {
  if (stopwords.empty()) return tokens;
  std::erase_if(tokens, [&](const Token& t) { return t.kind == TokenKind::kWord && stopwords.contains(t.text); });
  return tokens;
}

std::vector<std::string> ngrams(std::span<const Token> tokens, std::size_t n) {
  if (n == 0) throw Error("InvalidN", "n-gram size must be >= 1");
  std::vector<std::string> out;
  if (tokens.size() < n) return out;
  out.reserve(tokens.size() - n + 1);
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string gram = tokens[i].text;
    for (std::size_t k = 1; k < n; ++k) {
      gram += ' ';
      gram += tokens[i + k].text;
    }
    out.push_back(std::move(gram));
  }
  return out;
}

}  // namespace sentimill::text
