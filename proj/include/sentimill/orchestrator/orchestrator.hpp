#pragma once

#include <condition_variable>
#include <deque>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <json.hpp>

#include "sentimill/common/clock.hpp"
#include "sentimill/ingest/ingestion.hpp"
#include "sentimill/mapreduce/engine.hpp"

namespace sentimill::mapreduce {

void to_json(nlohmann::json& j, const JobSpec& spec);
void from_json(const nlohmann::json& j, JobSpec& spec);
void to_json(nlohmann::json& j, const JobResult& result);
void from_json(const nlohmann::json& j, JobResult& result);

}  // namespace sentimill::mapreduce

namespace sentimill::orchestrator {

enum class JobStatus { kJobGenerated, kWaiting, kRunning, kSuccess, kError };
enum class JobKind { kData, kMapReduce };

std::string_view to_string(JobStatus status);
std::string_view to_string(JobKind kind);
std::optional<JobStatus> parse_status(std::string_view text);
std::optional<JobKind> parse_kind(std::string_view text);

bool is_terminal(JobStatus status);

/// Data jobs: JOB_GENERATED -> WAITING -> RUNNING -> {SUCCESS, ERROR}.
/// MapReduce jobs skip WAITING.
bool legal_transition(JobKind kind, JobStatus from, JobStatus to);

struct StatusChange {
  JobStatus status = JobStatus::kJobGenerated;
  Millis at = 0;

  bool operator==(const StatusChange&) const = default;
};

/// True when the history starts at JOB_GENERATED and every step is legal.
bool legal_history(JobKind kind, std::span<const StatusChange> history);

struct CsvSource {
  std::filesystem::path path;
  std::map<std::string, store::ColumnRef> mapping;
  std::string key_column;

  bool operator==(const CsvSource&) const = default;
};

struct StreamSource {
  std::uint64_t seed = 1;
  double rate = 0.0;
  std::optional<std::filesystem::path> corpus;  // built-in demo corpus when empty
  std::optional<std::uint64_t> max_records;

  bool operator==(const StreamSource&) const = default;
};

struct DataJobSpec {
  std::variant<CsvSource, StreamSource> source;
  std::string target_table;
  std::optional<Millis> run_at;               // immediate when empty
  std::optional<ingest::StopCondition> stop;  // stream sources only, required there
  ingest::TableLayout layout;

  bool operator==(const DataJobSpec&) const = default;
};

void to_json(nlohmann::json& j, const DataJobSpec& spec);
/// Throws Error("InvalidSpec") naming the offending field.
DataJobSpec data_job_spec_from_json(const nlohmann::json& j);
/// {"algorithm", "source_table", "target_table", "params", "worker_count"}.
mapreduce::JobSpec mr_job_spec_from_json(const nlohmann::json& j);

/// Throws Error("InvalidSpec").
void validate(const DataJobSpec& spec);
void validate(const mapreduce::JobSpec& spec);

struct JobRecord {
  std::string job_id;
  JobKind kind = JobKind::kData;
  std::string owner;
  Millis created_at = 0;
  JobStatus status = JobStatus::kJobGenerated;
  std::vector<StatusChange> history;
  std::optional<DataJobSpec> data;
  std::optional<mapreduce::JobSpec> mapreduce;
  std::optional<std::string> error_code;
  std::optional<std::string> error_message;
  std::optional<ingest::ImportLog> import_log;
  std::optional<mapreduce::JobResult> result;

  bool operator==(const JobRecord&) const = default;
};

void to_json(nlohmann::json& j, const JobRecord& job);
void from_json(const nlohmann::json& j, JobRecord& job);

struct JobFilter {
  std::optional<JobKind> kind;
  std::optional<JobStatus> status;
};

inline constexpr int kRegistryFormatVersion = 1;

class Orchestrator {
 public:
  struct Options {
    Clock clock = system_clock();
    std::optional<std::filesystem::path> registry_path;  // in-memory when empty
    std::size_t workers = 2;
    std::chrono::milliseconds poll_interval{5000};
  };

  /// Loads the registry if present. Jobs found RUNNING become ERROR
  /// ("Interrupted"). Throws Error("CorruptRegistry").
  Orchestrator(store::TableStore& store, mapreduce::Engine& engine, Options options);
  ~Orchestrator();

  Orchestrator(const Orchestrator&) = delete;
  Orchestrator& operator=(const Orchestrator&) = delete;

  JobRecord create_data_job(DataJobSpec spec, std::string owner = {});
  /// `spec.job_id` is ignored; the registry assigns ids.
  JobRecord create_mr_job(mapreduce::JobSpec spec, std::string owner = {});

  /// Allowed in JOB_GENERATED and WAITING only: Error("JobImmutable").
  JobRecord update_data_job(const std::string& job_id, DataJobSpec spec);
  JobRecord update_mr_job(const std::string& job_id, mapreduce::JobSpec spec);

  /// Throws UnknownJob, JobRunning.
  void delete_job(const std::string& job_id);

  JobRecord get(const std::string& job_id) const;
  std::vector<JobRecord> list(const JobFilter& filter = {}) const;

  /// Moves JOB_GENERATED data jobs to WAITING, due WAITING jobs and
  /// JOB_GENERATED MapReduce jobs to RUNNING. Returns the ids that entered
  /// RUNNING; when workers are started they are queued for execution.
  std::vector<std::string> poll_and_dispatch(Millis now);

  /// Runs a RUNNING job to SUCCESS or ERROR. Each job executes at most once;
  /// returns false when the job was not claimable.
  bool execute(const std::string& job_id);

  /// Polls once and runs whatever was dispatched to completion, then
  /// returns the job's record.
  JobRecord run_now(const std::string& job_id);

  /// Dispatcher thread polling every poll_interval plus the worker pool.
  void start();
  /// Stops polling, cancels running streams and joins all threads.
  void stop();
  /// Blocks until no dispatched job is queued or executing.
  void wait_idle();

  /// Number of times each job entered RUNNING (tests assert at most 1).
  std::map<std::string, int> dispatch_counts() const;

 private:
  JobRecord& find_locked(const std::string& job_id);
  void transition_locked(JobRecord& job, JobStatus to, Millis at);
  void persist_locked() const;
  void load();
  void worker_loop(std::stop_token token);
  void dispatcher_loop(std::stop_token token);
  void run_data_job(const JobRecord& snapshot, JobRecord& outcome, std::stop_token cancel);

  store::TableStore& store_;
  mapreduce::Engine& engine_;
  Options options_;

  mutable std::mutex mu_;
  std::map<std::string, JobRecord> jobs_;
  std::uint64_t next_id_ = 1;
  std::set<std::string> claimed_;
  std::map<std::string, int> dispatch_counts_;

  std::condition_variable_any work_cv_;
  std::condition_variable idle_cv_;
  std::deque<std::string> queue_;
  std::size_t in_flight_ = 0;
  std::stop_source cancel_;
  std::vector<std::jthread> threads_;
};

}  // namespace sentimill::orchestrator
