#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <stop_token>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "sentimill/common/clock.hpp"
#include "sentimill/store/table_store.hpp"

namespace sentimill::ingest {

struct TweetRecord {
  std::string id;
  Millis created_at = 0;
  std::string user;
  std::string text;
  std::optional<std::string> lang;
  std::optional<std::string> country;
  std::vector<std::string> hashtags;  // "#tag", first occurrence order, no repeats

  bool operator==(const TweetRecord&) const = default;
};

inline constexpr std::size_t kMaxRejections = 100;

struct ImportLog {
  std::string job_id;
  std::string source;
  std::uint64_t records_read = 0;
  std::uint64_t records_stored = 0;
  std::uint64_t records_rejected = 0;
  Millis started_at = 0;
  Millis finished_at = 0;
  std::vector<std::string> rejections;  // first kMaxRejections reasons
  std::vector<std::string> notes;

  /// Counts a rejected record; the reason is kept while under the cap.
  void reject(std::string reason);
  bool conserved() const noexcept { return records_read == records_stored + records_rejected; }

  bool operator==(const ImportLog&) const = default;
};

void to_json(nlohmann::json& j, const ImportLog& log);
void from_json(const nlohmann::json& j, ImportLog& log);

/// Bound on a stream capture, checked after each record.
class StopCondition {
 public:
  static StopCondition duration(std::chrono::milliseconds span);
  /// Throws Error("InvalidStopCondition") for n == 0.
  static StopCondition record_count(std::uint64_t n);

  bool is_duration() const noexcept { return std::holds_alternative<std::chrono::milliseconds>(bound_); }
  std::chrono::milliseconds duration_value() const { return std::get<std::chrono::milliseconds>(bound_); }
  std::uint64_t record_count_value() const { return std::get<std::uint64_t>(bound_); }

  bool operator==(const StopCondition&) const = default;

 private:
  explicit StopCondition(std::variant<std::chrono::milliseconds, std::uint64_t> bound) : bound_(bound) {}
  std::variant<std::chrono::milliseconds, std::uint64_t> bound_;
};

/// {"duration_ms": n} or {"record_count": n}; anything else throws Error("InvalidStopCondition").
void to_json(nlohmann::json& j, const StopCondition& stop);
StopCondition stop_condition_from_json(const nlohmann::json& j);

struct TableLayout {
  std::uint32_t num_partitions = 1;
  std::uint32_t replication_factor = 3;

  bool operator==(const TableLayout&) const = default;
};

// --- CSV ---------------------------------------------------------------------

struct CsvImportSpec {
  std::filesystem::path path;
  std::map<std::string, store::ColumnRef> mapping;  // CSV header -> column
  std::string key_column;                           // header whose value becomes the row key
  std::string target_table;
  TableLayout layout;  // used only when the table is created

  bool operator==(const CsvImportSpec&) const = default;
};

/// Parses {"header": "family:qualifier", ...}. Throws Error("InvalidMapping").
std::map<std::string, store::ColumnRef> parse_column_mapping(const nlohmann::json& j);
nlohmann::json column_mapping_json(const std::map<std::string, store::ColumnRef>& mapping);

/// Comma-separated, '"' quoting with "" escapes, header on the first line.
/// Records are read in file order; a malformed record is rejected and
/// parsing resumes on the next line. Blank lines are skipped. Throws
/// FileNotFound, EmptyHeader, MissingKeyColumn, InvalidMapping.
ImportLog import_csv(store::TableStore& store, const CsvImportSpec& spec, std::string job_id = {},
                     const Clock& clock = system_clock());

// --- Tweets ------------------------------------------------------------------

/// One JSON object: id, created_at, user, text, optional lang, optional
/// place.country. Throws Error("MalformedRecord").
TweetRecord parse_tweet_json(std::string_view line);

/// "<created_at millis, 13 digits>:<id>", so scans come out time ordered.
std::string tweet_row_key(const TweetRecord& tweet);

/// Cells written for one tweet: content:text and meta:{id,user,created_at,
/// lang,country,hashtags}. Optional fields are omitted when absent.
std::vector<store::CellWrite> tweet_cells(const TweetRecord& tweet);

inline constexpr std::string_view kContentFamily = "content";
inline constexpr std::string_view kMetaFamily = "meta";

class TweetSource {
 public:
  virtual ~TweetSource() = default;
  /// Next JSON line, or nullopt once the source is exhausted.
  virtual std::optional<std::string> next() = 0;
  virtual std::string describe() const = 0;
};

struct TweetTemplate {
  std::string text;
  std::optional<std::string> lang;
  std::optional<std::string> country;

  bool operator==(const TweetTemplate&) const = default;
};

struct SimulatedStreamOptions {
  std::uint64_t seed = 1;
  double rate = 0.0;  // records per second; 0 or infinity means no throttle
  std::vector<TweetTemplate> corpus;
  std::optional<std::uint64_t> max_records;  // unbounded when empty
  Millis start_ms = 1'400'000'000'000;       // created_at of the first record
  Millis max_gap_ms = 60'000;                // created_at advances by 1..max_gap_ms
};

/// Deterministic pseudo-random tweets drawn from a template corpus.
class SimulatedStream : public TweetSource {
 public:
  /// Throws Error("EmptyCorpus").
  explicit SimulatedStream(SimulatedStreamOptions options);

  std::optional<std::string> next() override;
  std::string describe() const override;

 private:
  SimulatedStreamOptions options_;
  std::mt19937_64 rng_;
  std::uint64_t emitted_ = 0;
  Millis last_ms_;
  std::chrono::steady_clock::time_point next_due_;
};

/// Replays JSON lines from a vector, for tests and file replays.
class VectorSource : public TweetSource {
 public:
  explicit VectorSource(std::vector<std::string> lines, std::string name = "vector");
  std::optional<std::string> next() override;
  std::string describe() const override { return name_; }

 private:
  std::vector<std::string> lines_;
  std::size_t pos_ = 0;
  std::string name_;
};

/// A small built-in corpus of mixed-polarity posts.
std::vector<TweetTemplate> demo_corpus();

/// JSON lines of {"text", "lang"?, "country"?}. Throws FileNotFound, InvalidCorpus.
std::vector<TweetTemplate> load_corpus(const std::filesystem::path& path);

struct StreamIngestSpec {
  std::string target_table;
  StopCondition stop = StopCondition::record_count(1);
  TableLayout layout;
};

/// Consumes `source` into the target table (created with families content
/// and meta when missing) until the stop condition holds after a record, the
/// source ends, or `cancel` is requested.
ImportLog stream_ingest(store::TableStore& store, TweetSource& source, const StreamIngestSpec& spec,
                        std::string job_id = {}, const Clock& clock = system_clock(), std::stop_token cancel = {});

}  // namespace sentimill::ingest
