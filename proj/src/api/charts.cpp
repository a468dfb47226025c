#include "sentimill/api/charts.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include "sentimill/common/error.hpp"
#include "sentimill/common/timefmt.hpp"
#include "sentimill/sentiment/sentiment_jobs.hpp"

namespace sentimill::api {

using nlohmann::json;
using Params = std::map<std::string, std::string>;

namespace {

struct Rgb {
  double r, g, b;
};

constexpr Rgb kRed{0xd7, 0x19, 0x1c};
constexpr Rgb kGray{0x9e, 0x9e, 0x9e};
constexpr Rgb kGreen{0x1a, 0x96, 0x41};

std::string param_or(const Params& params, const std::string& name, std::string fallback) {
  auto it = params.find(name);
  return it == params.end() || it->second.empty() ? std::move(fallback) : it->second;
}

std::optional<std::uint64_t> parse_u64(std::string_view text) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
  return v;
}

store::ColumnRef column_param(const Params& params, const std::string& name, const std::string& fallback) {
  const auto text = param_or(params, name, fallback);
  try {
    return store::ColumnRef::parse(text);
  } catch (const Error&) {
    throw Error("InvalidSpec", name + ": expected family:qualifier, got '" + text + "'");
  }
}

const sentiment::Lexicon& lexicon_param(const sentiment::Resources& resources, const Params& params) {
  return *resources.lexicon(param_or(params, "lexicon", "default"));
}

std::shared_ptr<const text::StopwordList> stopwords_param(const sentiment::Resources& resources, const Params& params) {
  auto it = params.find("stopwords");
  return it == params.end() ? resources.default_stopwords() : resources.stopword_list(it->second);
}

// A missing family means the table is not what the chart kind reads.
template <typename Fn>
auto reshape_errors(Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.code() == "UnknownColumn") throw Error("WrongSourceShape", e.what());
    throw;
  }
}

json summary_json(const sentiment::SentimentSummary& s) {
  return {{"mean", s.overall_mean},
          {"matches", s.total_matches},
          {"classification", sentiment::to_string(s.classification)},
          {"color", sentiment_color(s.overall_mean)}};
}

json bubble(const store::Table& table, const Params& params) {
  auto counts = sentiment::read_word_counts(table);
  std::stable_sort(counts.begin(), counts.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (auto it = params.find("top"); it != params.end()) {
    auto top = parse_u64(it->second);
    if (!top) throw Error("InvalidSpec", "top: expected a non-negative integer");
    if (counts.size() > *top) counts.resize(*top);
  }
  json circles = json::array();
  for (const auto& [word, n] : counts) circles.push_back({{"label", word}, {"size", n}});
  return {{"circles", circles}};
}

json circle_packing(const store::Table& table, const sentiment::Resources& resources, const Params& params) {
  const auto column = column_param(params, "column", "content:text");
  const auto group = column_param(params, "group", "meta:country");
  const auto groups = reshape_errors([&] {
    return sentiment::grouped_sentiment(table, column, group, lexicon_param(resources, params),
                                        *stopwords_param(resources, params));
  });
  json children = json::array();
  for (const auto& [name, g] : groups) {
    json items = json::array();
    for (const auto& w : g.words) {
      items.push_back({{"name", w.word}, {"size", w.n}, {"sentiment", w.mean}, {"color", sentiment_color(w.mean)}});
    }
    json node = summary_json(g.summary);
    node["name"] = name;
    node["children"] = std::move(items);
    children.push_back(std::move(node));
  }
  return {{"group_column", group.str()}, {"column", column.str()}, {"name", table.name()}, {"children", children}};
}

json bar(const store::Table& table, const sentiment::Resources& resources, const Params& params) {
  const auto column = column_param(params, "column", "content:text");
  const auto group = column_param(params, "group", "meta:country");
  const auto groups = reshape_errors([&] {
    return sentiment::grouped_sentiment(table, column, group, lexicon_param(resources, params),
                                        *stopwords_param(resources, params));
  });
  json bars = json::array();
  for (const auto& [name, g] : groups) {
    json b = summary_json(g.summary);
    b["category"] = name;
    b["value"] = g.summary.overall_mean;
    bars.push_back(std::move(b));
  }
  return {{"group_column", group.str()}, {"column", column.str()}, {"bars", bars}};
}

json line(const store::Table& table, const sentiment::Resources& resources, const Params& params) {
  const auto column = column_param(params, "column", "content:text");
  const auto time = column_param(params, "time", "meta:created_at");
  const Millis bucket = parse_duration_ms(param_or(params, "bucket", "1h"));
  const auto points = reshape_errors([&] {
    return sentiment::timeseries_sentiment(table, column, time, bucket, lexicon_param(resources, params),
                                           *stopwords_param(resources, params));
  });
  json out = json::array();
  for (const auto& p : points) {
    json point = summary_json(p.summary);
    point["t"] = p.bucket_start;
    point["time"] = format_iso8601(p.bucket_start);
    point["value"] = p.summary.overall_mean;
    out.push_back(std::move(point));
  }
  return {{"time_column", time.str()}, {"column", column.str()}, {"bucket_ms", bucket}, {"points", out}};
}

}  // namespace

std::string_view to_string(ChartKind kind) {
  switch (kind) {
    case ChartKind::kCharttable: return "charttable";
    case ChartKind::kBubble: return "bubble";
    case ChartKind::kCirclePacking: return "circle_packing";
    case ChartKind::kBar: return "bar";
    case ChartKind::kLine: return "line";
  }
  return "?";
}

std::optional<ChartKind> parse_chart_kind(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  for (auto k : {ChartKind::kCharttable, ChartKind::kBubble, ChartKind::kCirclePacking, ChartKind::kBar,
                 ChartKind::kLine}) {
    if (lower == to_string(k)) return k;
  }
  return std::nullopt;
}

std::string sentiment_color(double value) {
  const double v = std::isnan(value) ? 0.0 : std::clamp(value, -1.0, 1.0);
  const Rgb& end = v < 0 ? kRed : kGreen;
  const double t = std::abs(v);
  auto channel = [&](double from, double to) {
    return static_cast<int>(std::lround(from + (to - from) * t));
  };
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", channel(kGray.r, end.r), channel(kGray.g, end.g),
                channel(kGray.b, end.b));
  return buf;
}

std::size_t page_limit(const Params& params) {
  auto it = params.find("limit");
  if (it == params.end()) return kDefaultPageLimit;
  auto v = parse_u64(it->second);
  if (!v || *v == 0 || *v > kMaxPageLimit) {
    throw Error("InvalidSpec", "limit: expected an integer in 1.." + std::to_string(kMaxPageLimit));
  }
  return *v;
}

json table_page(const store::Table& table, const std::optional<std::string>& start_key, std::size_t limit) {
  store::ScanOptions scan;
  scan.start = start_key;
  scan.limit = limit + 1;
  auto rows = table.scan(scan);
  json next = nullptr;
  if (rows.size() > limit) {
    next = rows[limit].key;
    rows.resize(limit);
  }
  std::set<std::string> columns;
  json out_rows = json::array();
  for (const auto& row : rows) {
    json cells = json::object();
    for (const auto& c : row.cells) {
      const auto name = c.family + ":" + c.qualifier;
      columns.insert(name);
      cells[name] = c.value;
    }
    out_rows.push_back({{"key", row.key}, {"cells", std::move(cells)}});
  }
  return {{"table", table.name()}, {"columns", columns}, {"rows", out_rows}, {"next_start_key", next}};
}

Millis parse_duration_ms(std::string_view text) {
  std::size_t digits = 0;
  while (digits < text.size() && std::isdigit(static_cast<unsigned char>(text[digits]))) ++digits;
  const auto number = parse_u64(text.substr(0, digits));
  const auto unit = text.substr(digits);
  static const std::map<std::string_view, Millis> kUnits{{"", 1},         {"ms", 1},         {"s", 1000},
                                                         {"m", 60'000}, {"h", 3'600'000}, {"d", 86'400'000}};
  auto u = kUnits.find(unit);
  if (!number || *number == 0 || u == kUnits.end() ||
      *number > static_cast<std::uint64_t>(std::numeric_limits<Millis>::max() / u->second)) {
    throw Error("InvalidBucket", "bucket: expected a positive duration like 900s, 15m, 1h, got '" + std::string(text) + "'");
  }
  return static_cast<Millis>(*number) * u->second;
}

json chart_payload(const store::TableStore& store, const sentiment::Resources& resources, ChartKind kind,
                   const Params& params) {
  auto source = params.find("source");
  if (source == params.end() || source->second.empty()) throw Error("InvalidSpec", "source: required");
  const auto table = store.table(source->second);
  json payload;
  switch (kind) {
    case ChartKind::kCharttable: {
      auto start = params.find("start_key");
      payload = table_page(*table, start == params.end() ? std::nullopt : std::optional(start->second),
                           page_limit(params));
      break;
    }
    case ChartKind::kBubble: payload = bubble(*table, params); break;
    case ChartKind::kCirclePacking: payload = circle_packing(*table, resources, params); break;
    case ChartKind::kBar: payload = bar(*table, resources, params); break;
    case ChartKind::kLine: payload = line(*table, resources, params); break;
  }
  payload["kind"] = to_string(kind);
  payload["source"] = table->name();
  return payload;
}

}  // namespace sentimill::api
