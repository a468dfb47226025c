#include "sentimill/sentiment/sentiment_jobs.hpp"

#include <charconv>
#include <cstdio>

#include "exact_sum.hpp"
#include "sentimill/common/error.hpp"
#include "sentimill/common/timefmt.hpp"

namespace sentimill::sentiment {
namespace {

constexpr std::size_t kMaxBuckets = 1'000'000;

void require_family(const store::TableSchema& schema, const store::ColumnRef& column) {
  if (schema.families.count(column.family) == 0) {
    throw Error("UnknownColumn",
                "table '" + schema.name + "' has no column family '" + column.family + "' (column " + column.str() + ")");
  }
}

std::vector<text::Token> surviving_tokens(std::string_view text, const text::StopwordList& stopwords) {
  return text::remove_stopwords(text::tokenize(text), stopwords);
}

const std::string& param(const mapreduce::JobSpec& spec, const std::string& name) {
  auto it = spec.params.find(name);
  if (it == spec.params.end()) {
    throw Error("AlgorithmParamMissing", std::string(mapreduce::to_string(spec.algorithm)) + " requires parameter '" + name + "'");
  }
  return it->second;
}

std::optional<std::string> optional_param(const mapreduce::JobSpec& spec, const std::string& name) {
  auto it = spec.params.find(name);
  if (it == spec.params.end()) return std::nullopt;
  return it->second;
}

store::ColumnRef column_param(const mapreduce::JobSpec& spec, const store::TableSchema& schema) {
  store::ColumnRef column;
  try {
    column = store::ColumnRef::parse(param(spec, "column"));
  } catch (const Error& e) {
    if (e.code() == "AlgorithmParamMissing") throw;
    throw Error("InvalidSpec", e.what());
  }
  require_family(schema, column);
  return column;
}

std::vector<WordScore> reduce_groups(std::span<const mapreduce::Group> groups) {
  std::vector<WordScore> out;
  out.reserve(groups.size());
  std::vector<double> scores;
  for (const auto& g : groups) {
    scores.clear();
    for (const auto& v : g.values) scores.push_back(decode_score(v));
    out.push_back(sentiment_reduce(g.key, scores));
  }
  return out;
}

}  // namespace

std::string_view to_string(Classification c) {
  switch (c) {
    case Classification::kPositive: return "POSITIVE";
    case Classification::kNegative: return "NEGATIVE";
    case Classification::kNeutral: return "NEUTRAL";
  }
  return "NEUTRAL";
}

Classification classify(double mean, std::uint64_t matches) {
  if (matches == 0) return Classification::kNeutral;
  if (mean > 0.0) return Classification::kPositive;
  if (mean < 0.0) return Classification::kNegative;
  return Classification::kNeutral;
}

std::string encode_score(double score) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", score);
  return buf;
}

double decode_score(std::string_view text) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error("InvalidScore", "not a decimal score: '" + std::string(text) + "'");
  }
  return value;
}

std::string format_score_6(double score) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", score);
  std::string out = buf;
  if (out == "-0.000000") out = "0.000000";
  return out;
}

std::optional<std::string_view> text_of(const store::Row& row, const store::ColumnRef& column) {
  const auto* cell = row.find(column.family, column.qualifier);
  if (cell == nullptr) return std::nullopt;
  if (!text::is_valid_utf8(cell->value)) {
    throw Error("NonTextValue", "column " + column.str() + " of row '" + row.key + "' is not UTF-8 text");
  }
  return std::string_view(cell->value);
}

std::optional<store::Row> filter_map(const store::Row& row, const store::ColumnRef& column, std::string_view keyword) {
  const auto value = text_of(row, column);
  if (!value) return std::nullopt;
  if (keyword.empty()) return row;
  if (text::fold_case(*value).find(text::fold_case(keyword)) == std::string::npos) return std::nullopt;
  return row;
}

std::vector<mapreduce::KeyValue> wordcount_map(const store::Row& row, const store::ColumnRef& column,
                                               const text::StopwordList& stopwords) {
  std::vector<mapreduce::KeyValue> out;
  const auto value = text_of(row, column);
  if (!value) return out;
  for (auto& tok : surviving_tokens(*value, stopwords)) out.push_back({std::move(tok.text), "1"});
  return out;
}

std::uint64_t wordcount_reduce(std::span<const std::string> ones) { return ones.size(); }

std::vector<std::pair<std::string, double>> sentiment_map(const store::Row& row, const store::ColumnRef& column,
                                                          const Lexicon& lexicon,
                                                          const text::StopwordList& stopwords) {
  std::vector<std::pair<std::string, double>> out;
  const auto value = text_of(row, column);
  if (!value) return out;
  for (auto& tok : surviving_tokens(*value, stopwords)) {
    if (tok.kind != text::TokenKind::kWord) continue;
    if (auto score = lexicon.score(tok.text)) out.emplace_back(std::move(tok.text), *score);
  }
  return out;
}

WordScore sentiment_reduce(std::string_view word, std::span<const double> scores) {
  if (scores.empty()) throw Error("InvalidInput", "sentiment_reduce needs at least one score");
  double sum = 0.0;
  for (double s : scores) sum += s;
  return WordScore{std::string(word), sum / static_cast<double>(scores.size()), scores.size()};
}

SentimentSummary aggregate_sentiment(std::span<const WordScore> word_scores, std::string keyword) {
  SentimentSummary summary;
  summary.keyword = std::move(keyword);
  std::vector<double> weighted;
  weighted.reserve(word_scores.size());
  for (const auto& ws : word_scores) {
    weighted.push_back(ws.mean * static_cast<double>(ws.n));
    summary.total_matches += ws.n;
  }
  if (summary.total_matches > 0) {
    summary.overall_mean = detail::exact_sum(weighted) / static_cast<double>(summary.total_matches);
    if (summary.overall_mean == 0.0) summary.overall_mean = 0.0;  // no negative zero
  }
  summary.classification = classify(summary.overall_mean, summary.total_matches);
  return summary;
}

std::vector<WordScore> read_word_scores(const store::Table& table) {
  std::vector<WordScore> out;
  for (const auto& row : table.scan()) {
    const auto* mean = row.find(kStatsFamily, kMeanExactQualifier);
    const auto* n = row.find(kStatsFamily, kMatchesQualifier);
    if (mean == nullptr || n == nullptr) {
      throw Error("WrongSourceShape", "table '" + table.name() + "' is not SENTIMENT output (row '" + row.key + "')");
    }
    std::uint64_t count = 0;
    auto [ptr, ec] = std::from_chars(n->value.data(), n->value.data() + n->value.size(), count);
    if (ec != std::errc() || ptr != n->value.data() + n->value.size()) {
      throw Error("WrongSourceShape", "bad match count in row '" + row.key + "'");
    }
    out.push_back(WordScore{row.key, decode_score(mean->value), count});
  }
  return out;
}

std::vector<std::pair<std::string, std::uint64_t>> read_word_counts(const store::Table& table) {
  std::vector<std::pair<std::string, std::uint64_t>> out;
  for (const auto& row : table.scan()) {
    const auto* c = row.find(kStatsFamily, kCountQualifier);
    if (c == nullptr) {
      throw Error("WrongSourceShape", "table '" + table.name() + "' is not WORDCOUNT output (row '" + row.key + "')");
    }
    std::uint64_t count = 0;
    auto [ptr, ec] = std::from_chars(c->value.data(), c->value.data() + c->value.size(), count);
    if (ec != std::errc() || ptr != c->value.data() + c->value.size()) {
      throw Error("WrongSourceShape", "bad count in row '" + row.key + "'");
    }
    out.emplace_back(row.key, count);
  }
  return out;
}

std::map<std::string, GroupSentiment> grouped_sentiment(const store::Table& source, const store::ColumnRef& column,
                                                       const store::ColumnRef& group_column, const Lexicon& lexicon,
                                                       const text::StopwordList& stopwords) {
  require_family(source.schema(), column);
  require_family(source.schema(), group_column);

  std::map<std::string, std::vector<mapreduce::KeyValue>> pairs_by_group;
  for (const auto& row : source.scan()) {
    const auto group_value = text_of(row, group_column);
    const std::string group =
        group_value && !group_value->empty() ? std::string(*group_value) : std::string(kNoGroup);
    auto& pairs = pairs_by_group[group];
    for (auto& [word, score] : sentiment_map(row, column, lexicon, stopwords)) {
      pairs.push_back({std::move(word), encode_score(score)});
    }
  }

  std::map<std::string, GroupSentiment> out;
  for (auto& [group, pairs] : pairs_by_group) {
    GroupSentiment gs;
    gs.words = reduce_groups(mapreduce::shuffle(std::move(pairs)));
    gs.summary = aggregate_sentiment(gs.words, group);
    out.emplace(group, std::move(gs));
  }
  return out;
}

std::vector<TimePoint> timeseries_sentiment(const store::Table& source, const store::ColumnRef& column,
                                            const store::ColumnRef& time_column, Millis bucket_ms,
                                            const Lexicon& lexicon, const text::StopwordList& stopwords) {
  if (bucket_ms <= 0) throw Error("InvalidBucket", "bucket size must be positive");
  require_family(source.schema(), column);
  require_family(source.schema(), time_column);

  std::map<Millis, std::vector<mapreduce::KeyValue>> pairs_by_bucket;
  for (const auto& row : source.scan()) {
    const auto when_text = text_of(row, time_column);
    const auto when = when_text ? parse_timestamp(*when_text) : std::nullopt;
    if (!when) throw Error("UnparsableTimestamp", "row '" + row.key + "' has no parsable " + time_column.str());
    Millis k = *when / bucket_ms;
    if (*when % bucket_ms != 0 && *when < 0) --k;
    auto& pairs = pairs_by_bucket[k * bucket_ms];
    for (auto& [word, score] : sentiment_map(row, column, lexicon, stopwords)) {
      pairs.push_back({std::move(word), encode_score(score)});
    }
  }

  std::vector<TimePoint> out;
  if (pairs_by_bucket.empty()) return out;
  const Millis first = pairs_by_bucket.begin()->first;
  const Millis last = pairs_by_bucket.rbegin()->first;
  if ((last - first) / bucket_ms + 1 > static_cast<Millis>(kMaxBuckets)) {
    throw Error("InvalidBucket", "bucket size yields too many buckets");
  }
  for (Millis start = first; start <= last; start += bucket_ms) {
    TimePoint point;
    point.bucket_start = start;
    auto it = pairs_by_bucket.find(start);
    std::vector<WordScore> words;
    if (it != pairs_by_bucket.end()) words = reduce_groups(mapreduce::shuffle(std::move(it->second)));
    point.summary = aggregate_sentiment(words, format_iso8601(start));
    out.push_back(std::move(point));
  }
  return out;
}

mapreduce::PlanFactory builtin_plans(std::shared_ptr<const Resources> resources) {
  return [resources](const mapreduce::JobSpec& spec, const store::TableSchema& source) -> mapreduce::JobPlan {
    mapreduce::JobPlan plan;
    const auto column = column_param(spec, source);
    auto stopwords_for = [&]() {
      auto name = optional_param(spec, "stopwords");
      return name ? resources->stopword_list(*name) : resources->default_stopwords();
    };

    switch (spec.algorithm) {
      case mapreduce::Algorithm::kFilter: {
        const std::string keyword = param(spec, "keyword");
        plan.target_families = source.families;
        plan.map = [column, keyword](const store::Row& row, mapreduce::MapContext& ctx) {
          if (auto kept = filter_map(row, column, keyword)) ctx.write(*kept);
        };
        break;
      }
      case mapreduce::Algorithm::kWordCount: {
        auto stopwords = stopwords_for();
        plan.target_families = {std::string(kStatsFamily)};
        plan.map = [column, stopwords](const store::Row& row, mapreduce::MapContext& ctx) {
          for (auto& kv : wordcount_map(row, column, *stopwords)) ctx.emit(std::move(kv.key), std::move(kv.value));
        };
        plan.reduce = [](std::string_view, std::span<const std::string> values) {
          return std::vector<store::CellWrite>{
              {std::string(kStatsFamily), std::string(kCountQualifier), std::to_string(wordcount_reduce(values)), {}}};
        };
        break;
      }
      case mapreduce::Algorithm::kSentiment: {
        auto lexicon = resources->lexicon(optional_param(spec, "lexicon").value_or("default"));
        auto stopwords = stopwords_for();
        plan.target_families = {std::string(kStatsFamily)};
        plan.map = [column, lexicon, stopwords](const store::Row& row, mapreduce::MapContext& ctx) {
          for (auto& [word, score] : sentiment_map(row, column, *lexicon, *stopwords)) {
            ctx.emit(std::move(word), encode_score(score));
          }
        };
        plan.reduce = [](std::string_view word, std::span<const std::string> values) {
          std::vector<double> scores;
          scores.reserve(values.size());
          for (const auto& v : values) scores.push_back(decode_score(v));
          const auto ws = sentiment_reduce(word, scores);
          const std::string family(kStatsFamily);
          return std::vector<store::CellWrite>{
              {family, std::string(kMeanQualifier), format_score_6(ws.mean), {}},
              {family, std::string(kMeanExactQualifier), encode_score(ws.mean), {}},
              {family, std::string(kMatchesQualifier), std::to_string(ws.n), {}},
          };
        };
        break;
      }
    }
    return plan;
  };
}

}  // namespace sentimill::sentiment
