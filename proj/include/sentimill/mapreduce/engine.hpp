#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sentimill/store/table_store.hpp"

namespace sentimill::mapreduce {

enum class Algorithm { kFilter, kWordCount, kSentiment };

std::string_view to_string(Algorithm algorithm);
// Accepts "FILTER" / "filter", "WORDCOUNT" / "wordcount", "SENTIMENT" / "sentiment".
std::optional<Algorithm> parse_algorithm(std::string_view name);

struct JobSpec {
  std::string job_id;
  Algorithm algorithm = Algorithm::kWordCount;
  std::string source_table;
  std::string target_table;
  std::map<std::string, std::string> params;
  std::size_t worker_count = 1;

  bool operator==(const JobSpec&) const = default;
};

struct KeyValue {
  std::string key;
  std::string value;

  bool operator==(const KeyValue&) const = default;
};

struct Group {
  std::string key;
  std::vector<std::string> values;

  bool operator==(const Group&) const = default;
};

struct JobResult {
  std::string job_id;
  std::uint64_t rows_read = 0;
  std::uint64_t pairs_emitted = 0;
  std::uint64_t rows_written = 0;
  std::int64_t duration_ms = 0;

  bool operator==(const JobResult&) const = default;
};

// Cells produced by reducers carry this timestamp, so a job's output does
// not depend on when it ran.
inline constexpr store::Timestamp kDerivedTimestamp = 0;

class MapContext {
 public:
  MapContext(std::vector<KeyValue>& pairs, store::Table* target) : pairs_(pairs), target_(target) {}

  void emit(std::string key, std::string value);

  // Map-only algorithms store source rows directly in the target table,
  // keeping row key and cell timestamps.
  void write(const store::Row& row);

  std::uint64_t rows_written() const noexcept { return rows_written_; }

 private:
  std::vector<KeyValue>& pairs_;
  store::Table* target_;
  std::uint64_t rows_written_ = 0;
};

using MapFn = std::function<void(const store::Row&, MapContext&)>;
using ReduceFn =
    std::function<std::vector<store::CellWrite>(std::string_view key, std::span<const std::string> values)>;

struct JobPlan {
  MapFn map;
  ReduceFn reduce;  // empty: map-only job
  std::set<std::string> target_families;

  bool map_only() const { return !reduce; }
};

// Resolves a spec into mapper/reducer functions. Throws
// Error("AlgorithmParamMissing") or Error("UnknownColumn") for bad params.
using PlanFactory = std::function<JobPlan(const JobSpec&, const store::TableSchema& source)>;

struct MapOutput {
  std::vector<KeyValue> pairs;
  std::uint64_t rows_read = 0;
  std::uint64_t rows_written = 0;
};

/// Applies the mapper to every row of one source partition in key order.
/// A throwing mapper surfaces as Error("MapperFailure") naming the row.
MapOutput map_phase(const JobPlan& plan, const store::Table& source, std::uint32_t partition,
                    store::Table* target);

/// Groups pairs by key. Groups are ordered by key and values inside a group
/// by their bytes, so reducer input does not depend on map scheduling.
std::vector<Group> shuffle(std::vector<KeyValue> pairs);

/// Runs the reducer on each group (in parallel up to `workers`) and writes
/// one target row per group keyed by the group key. Returns rows written.
std::uint64_t reduce_phase(const JobPlan& plan, std::span<const Group> groups, store::Table& target,
                           std::size_t workers);

class Engine {
 public:
  Engine(store::TableStore& store, PlanFactory factory);

  /// Creates the target table, runs map/shuffle/reduce and returns counters.
  /// On failure the partially written target table is dropped.
  JobResult run_job(const JobSpec& spec);

 private:
  // Jobs touching a common table run one at a time.
  class TableLockSet {
   public:
    void acquire(const std::vector<std::string>& names);
    void release(const std::vector<std::string>& names);

   private:
    std::mutex mu_;
    std::condition_variable cv_;
    std::set<std::string> busy_;
  };

  store::TableStore& store_;
  PlanFactory factory_;
  TableLockSet locks_;
};

}  // namespace sentimill::mapreduce
