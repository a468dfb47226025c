#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sentimill/common/clock.hpp"
#include "sentimill/mapreduce/engine.hpp"
#include "sentimill/sentiment/lexicon.hpp"
#include "sentimill/store/table_store.hpp"
#include "sentimill/text/text_pipeline.hpp"

namespace sentimill::sentiment {

enum class Classification { kPositive, kNegative, kNeutral };

std::string_view to_string(Classification c);

struct WordScore {
  std::string word;
  double mean = 0.0;
  std::uint64_t n = 0;

  bool operator==(const WordScore&) const = default;
};

struct SentimentSummary {
  std::string keyword;
  double overall_mean = 0.0;
  std::uint64_t total_matches = 0;
  Classification classification = Classification::kNeutral;

  bool operator==(const SentimentSummary&) const = default;
};

// Output columns written by the built-in reducers.
inline constexpr std::string_view kStatsFamily = "stats";
inline constexpr std::string_view kCountQualifier = "count";
inline constexpr std::string_view kMeanQualifier = "mean";            // 6 fractional digits
inline constexpr std::string_view kMeanExactQualifier = "mean_exact";  // round-trip precision
inline constexpr std::string_view kMatchesQualifier = "n";

/// Sign rule: POSITIVE iff mean > 0, NEGATIVE iff mean < 0, NEUTRAL at 0 or
/// without matches.
Classification classify(double mean, std::uint64_t matches);

// Score encoding for intermediate pairs ("%.17g", exact round trip) and for
// chart-facing cells ("%.6f").
std::string encode_score(double score);
double decode_score(std::string_view text);
std::string format_score_6(double score);

/// Reads a column as text. Returns nullopt when the row lacks the column;
/// throws Error("NonTextValue") when the value is not UTF-8.
std::optional<std::string_view> text_of(const store::Row& row, const store::ColumnRef& column);

// --- Filtering -------------------------------------------------------------

/// Keeps the row when the case-folded column value contains the case-folded
/// keyword. An empty keyword keeps every row that has the column.
std::optional<store::Row> filter_map(const store::Row& row, const store::ColumnRef& column,
                                     std::string_view keyword);

// --- Word count ------------------------------------------------------------

std::vector<mapreduce::KeyValue> wordcount_map(const store::Row& row, const store::ColumnRef& column,
                                               const text::StopwordList& stopwords);

std::uint64_t wordcount_reduce(std::span<const std::string> ones);

// --- Lexicon sentiment -----------------------------------------------------

/// One (word, score) per surviving token found in the lexicon. Hashtags never
/// match: lexicon keys are bare words.
std::vector<std::pair<std::string, double>> sentiment_map(const store::Row& row, const store::ColumnRef& column,
                                                          const Lexicon& lexicon,
                                                          const text::StopwordList& stopwords);

/// Arithmetic mean summed in the given order.
WordScore sentiment_reduce(std::string_view word, std::span<const double> scores);

/// Occurrence-weighted mean over all words: sum(mean_w * n_w) / sum(n_w).
/// The numerator is summed exactly, so symmetric inputs yield exactly 0.
SentimentSummary aggregate_sentiment(std::span<const WordScore> word_scores, std::string keyword);

/// Reads the rows written by a SENTIMENT job. Throws Error("WrongSourceShape").
std::vector<WordScore> read_word_scores(const store::Table& table);

/// Reads the rows written by a WORDCOUNT job. Throws Error("WrongSourceShape").
std::vector<std::pair<std::string, std::uint64_t>> read_word_counts(const store::Table& table);

// --- Grouped and time-bucketed sentiment -------------------------------------

inline constexpr std::string_view kNoGroup = "(none)";

struct GroupSentiment {
  SentimentSummary summary;
  std::vector<WordScore> words;
};

/// Runs map -> shuffle -> reduce -> aggregate separately per value of
/// `group_column`. Rows without a group value land in "(none)".
std::map<std::string, GroupSentiment> grouped_sentiment(const store::Table& source, const store::ColumnRef& column,
                                                       const store::ColumnRef& group_column, const Lexicon& lexicon,
                                                       const text::StopwordList& stopwords);

struct TimePoint {
  Millis bucket_start = 0;
  SentimentSummary summary;
};

/// Buckets rows into [k*bucket, (k+1)*bucket) by `time_column` (ISO-8601 or
/// epoch millis). Empty buckets between the first and last are emitted as
/// NEUTRAL with zero matches.
std::vector<TimePoint> timeseries_sentiment(const store::Table& source, const store::ColumnRef& column,
                                            const store::ColumnRef& time_column, Millis bucket_ms,
                                            const Lexicon& lexicon, const text::StopwordList& stopwords);

// --- Engine wiring -----------------------------------------------------------

/// The three built-in algorithms. Parameters:
///   FILTER     column, keyword
///   WORDCOUNT  column, [stopwords]
///   SENTIMENT  column, [lexicon = "default"], [stopwords]
/// `stopwords` names a list in `resources`; "none" disables removal.
mapreduce::PlanFactory builtin_plans(std::shared_ptr<const Resources> resources);

}  // namespace sentimill::sentiment
