#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "sentimill/common/clock.hpp"
#include "sentimill/sentiment/lexicon.hpp"
#include "sentimill/store/table_store.hpp"

namespace sentimill::api {

enum class ChartKind { kCharttable, kBubble, kCirclePacking, kBar, kLine };

/// "charttable", "bubble", "circle_packing", "bar", "line".
std::string_view to_string(ChartKind kind);
/// Case-insensitive.
std::optional<ChartKind> parse_chart_kind(std::string_view text);

/// Sentiment color scale shared by every client: -1 is red (#d7191c), 0 is
/// neutral gray (#9e9e9e), +1 is green (#1a9641), linear per RGB channel in
/// between. Values outside [-1, 1] are clamped.
std::string sentiment_color(double value);

inline constexpr std::size_t kDefaultPageLimit = 100;
inline constexpr std::size_t kMaxPageLimit = 10'000;

/// One page of a table in key order starting at `start_key`. The payload
/// carries "next_start_key" when more rows follow, null otherwise.
nlohmann::json table_page(const store::Table& table, const std::optional<std::string>& start_key, std::size_t limit);

/// Parses "limit" (default 100, at most 10000). Throws Error("InvalidSpec").
std::size_t page_limit(const std::map<std::string, std::string>& params);

/// "250", "250ms", "30s", "15m", "1h", "1d" to milliseconds. Throws
/// Error("InvalidBucket").
Millis parse_duration_ms(std::string_view text);

/// Chart data for `kind`. Parameters:
///   all             source (table name, required)
///   charttable      limit, start_key
///   bubble          top (keep the N largest circles); source is WORDCOUNT output
///   circle_packing  column = content:text, group = meta:country, lexicon, stopwords
///   bar             as circle_packing
///   line            column = content:text, time = meta:created_at, bucket = 1h, lexicon, stopwords
/// Throws UnknownTable, WrongSourceShape, InvalidSpec, InvalidBucket,
/// UnknownLexicon, UnknownStopwords.
nlohmann::json chart_payload(const store::TableStore& store, const sentiment::Resources& resources, ChartKind kind,
                             const std::map<std::string, std::string>& params);

}  // namespace sentimill::api
