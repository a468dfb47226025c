#include "sentimill/common/timefmt.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>

namespace sentimill {
namespace {

class Cursor {
 public:
  explicit Cursor(std::string_view s) : s_(s) {}

  bool done() const { return pos_ == s_.size(); }
  char peek() const { return done() ? '\0' : s_[pos_]; }

  bool consume(char c) {
    if (peek() != c) return false;
    ++pos_;
    return true;
  }

  // Reads exactly `width` decimal digits.
  std::optional<int> digits(std::size_t width) {
    if (s_.size() - pos_ < width) return std::nullopt;
    int value = 0;
    for (std::size_t i = 0; i < width; ++i) {
      const char c = s_[pos_ + i];
      if (c < '0' || c > '9') return std::nullopt;
      value = value * 10 + (c - '0');
    }
    pos_ += width;
    return value;
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
};

std::optional<Millis> parse_epoch_integer(std::string_view text) {
  Millis value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

}  // namespace

std::optional<Millis> parse_timestamp(std::string_view text) {
  if (text.empty()) return std::nullopt;
  if (text.find('-', 1) == std::string_view::npos) return parse_epoch_integer(text);

  using namespace std::chrono;
  Cursor cur(text);
  auto year = cur.digits(4);
  if (!year || !cur.consume('-')) return std::nullopt;
  auto month = cur.digits(2);
  if (!month || !cur.consume('-')) return std::nullopt;
  auto day = cur.digits(2);
  if (!day) return std::nullopt;

  const year_month_day ymd{std::chrono::year{*year}, std::chrono::month{static_cast<unsigned>(*month)},
                           std::chrono::day{static_cast<unsigned>(*day)}};
  if (!ymd.ok()) return std::nullopt;
  Millis ms = duration_cast<milliseconds>(sys_days{ymd}.time_since_epoch()).count();
  if (cur.done()) return ms;

  if (!cur.consume('T') && !cur.consume(' ')) return std::nullopt;
  auto hh = cur.digits(2);
  if (!hh || !cur.consume(':')) return std::nullopt;
  auto mm = cur.digits(2);
  if (!mm) return std::nullopt;
  int ss = 0;
  if (cur.consume(':')) {
    auto s = cur.digits(2);
    if (!s) return std::nullopt;
    ss = *s;
  }
  if (*hh > 23 || *mm > 59 || ss > 60) return std::nullopt;
  ms += ((*hh * 60LL + *mm) * 60LL + ss) * 1000LL;

  if (cur.consume('.') || cur.consume(',')) {
    // Fractional seconds: keep millisecond precision, ignore the rest.
    int scale = 100;
    bool any = false;
    while (!cur.done() && cur.peek() >= '0' && cur.peek() <= '9') {
      const int d = *cur.digits(1);
      ms += d * scale;
      scale /= 10;
      any = true;
    }
    if (!any) return std::nullopt;
  }

  if (cur.done() || cur.consume('Z') || cur.consume('z')) {
    return cur.done() ? std::optional<Millis>(ms) : std::nullopt;
  }
  int sign = 0;
  if (cur.consume('+')) sign = 1;
  else if (cur.consume('-')) sign = -1;
  else return std::nullopt;
  auto oh = cur.digits(2);
  if (!oh) return std::nullopt;
  cur.consume(':');
  auto om = cur.digits(2);
  if (!om || !cur.done() || *oh > 23 || *om > 59) return std::nullopt;
  ms -= sign * (*oh * 60LL + *om) * 60'000LL;
  return ms;
}

std::string format_iso8601(Millis ms) {
  using namespace std::chrono;
  const sys_time<milliseconds> tp{milliseconds{ms}};
  const auto day_point = floor<days>(tp);
  const year_month_day ymd{day_point};
  const hh_mm_ss hms{tp - day_point};
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()), static_cast<int>(hms.subseconds().count()));
  return buf;
}

}  // namespace sentimill
