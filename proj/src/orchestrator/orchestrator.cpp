#include "sentimill/orchestrator/orchestrator.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "sentimill/common/error.hpp"
#include "sentimill/common/timefmt.hpp"

namespace sentimill::mapreduce {

void to_json(nlohmann::json& j, const JobSpec& spec) {
  j = nlohmann::json{{"job_id", spec.job_id},
                     {"algorithm", to_string(spec.algorithm)},
                     {"source_table", spec.source_table},
                     {"target_table", spec.target_table},
                     {"params", spec.params},
                     {"worker_count", spec.worker_count}};
}

void from_json(const nlohmann::json& j, JobSpec& spec) {
  j.at("job_id").get_to(spec.job_id);
  auto algo = parse_algorithm(j.at("algorithm").get<std::string>());
  if (!algo) throw Error("InvalidSpec", "unknown algorithm");
  spec.algorithm = *algo;
  j.at("source_table").get_to(spec.source_table);
  j.at("target_table").get_to(spec.target_table);
  j.at("params").get_to(spec.params);
  j.at("worker_count").get_to(spec.worker_count);
}

void to_json(nlohmann::json& j, const JobResult& result) {
  j = nlohmann::json{{"job_id", result.job_id},
                     {"rows_read", result.rows_read},
                     {"pairs_emitted", result.pairs_emitted},
                     {"rows_written", result.rows_written},
                     {"duration_ms", result.duration_ms}};
}

void from_json(const nlohmann::json& j, JobResult& result) {
  j.at("job_id").get_to(result.job_id);
  j.at("rows_read").get_to(result.rows_read);
  j.at("pairs_emitted").get_to(result.pairs_emitted);
  j.at("rows_written").get_to(result.rows_written);
  j.at("duration_ms").get_to(result.duration_ms);
}

}  // namespace sentimill::mapreduce

namespace sentimill::orchestrator {
namespace {

using nlohmann::json;

[[noreturn]] void invalid(const std::string& field, const std::string& why) {
  throw Error("InvalidSpec", field + ": " + why);
}

void check_table_name(const std::string& field, const std::string& name) {
  try {
    store::validate_schema({name, {"x"}, 1, 1});
  } catch (const Error& e) {
    invalid(field, e.what());
  }
}

const json& member(const json& j, const char* name, const std::string& field) {
  auto it = j.find(name);
  if (it == j.end()) invalid(field + name, "is required");
  return *it;
}

std::string string_member(const json& j, const char* name, const std::string& field) {
  const auto& v = member(j, name, field);
  if (!v.is_string()) invalid(field + name, "must be a string");
  return v.get<std::string>();
}

template <typename T>
std::optional<T> optional_unsigned(const json& j, const char* name, const std::string& field) {
  auto it = j.find(name);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_number_unsigned()) invalid(field + name, "must be a non-negative integer");
  return it->get<T>();
}

std::optional<Millis> timestamp_member(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (it->is_number_integer()) return it->get<Millis>();
  if (it->is_string()) {
    if (auto t = parse_timestamp(it->get<std::string>())) return *t;
  }
  invalid(name, "must be an ISO-8601 timestamp or epoch milliseconds");
}

std::string error_text(const std::exception& e) { return e.what(); }

}  // namespace

std::string_view to_string(JobStatus status) {
  switch (status) {
    case JobStatus::kJobGenerated: return "JOB_GENERATED";
    case JobStatus::kWaiting: return "WAITING";
    case JobStatus::kRunning: return "RUNNING";
    case JobStatus::kSuccess: return "SUCCESS";
    case JobStatus::kError: return "ERROR";
  }
  return "ERROR";
}

std::string_view to_string(JobKind kind) { return kind == JobKind::kData ? "DATA" : "MAPREDUCE"; }

std::optional<JobStatus> parse_status(std::string_view text) {
  for (auto s : {JobStatus::kJobGenerated, JobStatus::kWaiting, JobStatus::kRunning, JobStatus::kSuccess,
                 JobStatus::kError}) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

std::optional<JobKind> parse_kind(std::string_view text) {
  if (text == "DATA") return JobKind::kData;
  if (text == "MAPREDUCE") return JobKind::kMapReduce;
  return std::nullopt;
}

bool is_terminal(JobStatus status) { return status == JobStatus::kSuccess || status == JobStatus::kError; }

bool legal_transition(JobKind kind, JobStatus from, JobStatus to) {
  switch (from) {
    case JobStatus::kJobGenerated:
      return kind == JobKind::kData ? to == JobStatus::kWaiting : to == JobStatus::kRunning;
    case JobStatus::kWaiting: return kind == JobKind::kData && to == JobStatus::kRunning;
    case JobStatus::kRunning: return is_terminal(to);
    case JobStatus::kSuccess:
    case JobStatus::kError: return false;
  }
  return false;
}

bool legal_history(JobKind kind, std::span<const StatusChange> history) {
  if (history.empty() || history.front().status != JobStatus::kJobGenerated) return false;
  for (std::size_t i = 1; i < history.size(); ++i) {
    if (!legal_transition(kind, history[i - 1].status, history[i].status)) return false;
  }
  return true;
}

// --- Specs ------------------------------------------------------------------------

void to_json(json& j, const DataJobSpec& spec) {
  j = json::object();
  if (const auto* csv = std::get_if<CsvSource>(&spec.source)) {
    j["source"] = json{{"type", "csv"},
                       {"path", csv->path.string()},
                       {"mapping", ingest::column_mapping_json(csv->mapping)},
                       {"key_column", csv->key_column}};
  } else {
    const auto& s = std::get<StreamSource>(spec.source);
    json src{{"type", "stream"}, {"seed", s.seed}, {"rate", s.rate}};
    if (s.corpus) src["corpus"] = s.corpus->string();
    if (s.max_records) src["max_records"] = *s.max_records;
    j["source"] = std::move(src);
  }
  j["target_table"] = spec.target_table;
  j["run_at"] = spec.run_at ? json(format_iso8601(*spec.run_at)) : json(nullptr);
  j["run_at_ms"] = spec.run_at ? json(*spec.run_at) : json(nullptr);
  j["stop"] = spec.stop ? json(*spec.stop) : json(nullptr);
  j["layout"] = json{{"num_partitions", spec.layout.num_partitions},
                     {"replication_factor", spec.layout.replication_factor}};
}

DataJobSpec data_job_spec_from_json(const json& j) {
  if (!j.is_object()) invalid("body", "must be a JSON object");
  DataJobSpec spec;
  const auto& src = member(j, "source", "");
  if (!src.is_object()) invalid("source", "must be an object");
  const auto type = string_member(src, "type", "source.");
  if (type == "csv") {
    CsvSource csv;
    csv.path = string_member(src, "path", "source.");
    try {
      csv.mapping = ingest::parse_column_mapping(member(src, "mapping", "source."));
    } catch (const Error& e) {
      if (e.code() == "InvalidSpec") throw;
      invalid("source.mapping", e.what());
    }
    csv.key_column = string_member(src, "key_column", "source.");
    spec.source = std::move(csv);
  } else if (type == "stream") {
    StreamSource s;
    s.seed = optional_unsigned<std::uint64_t>(src, "seed", "source.").value_or(1);
    if (auto it = src.find("rate"); it != src.end() && !it->is_null()) {
      if (!it->is_number()) invalid("source.rate", "must be a number");
      s.rate = it->get<double>();
    }
    if (auto it = src.find("corpus"); it != src.end() && !it->is_null()) {
      if (!it->is_string()) invalid("source.corpus", "must be a string");
      s.corpus = it->get<std::string>();
    }
    s.max_records = optional_unsigned<std::uint64_t>(src, "max_records", "source.");
    spec.source = std::move(s);
  } else {
    invalid("source.type", "must be \"csv\" or \"stream\"");
  }
  spec.target_table = string_member(j, "target_table", "");
  spec.run_at = j.contains("run_at_ms") ? timestamp_member(j, "run_at_ms") : timestamp_member(j, "run_at");
  if (auto it = j.find("stop"); it != j.end() && !it->is_null()) {
    try {
      spec.stop = ingest::stop_condition_from_json(*it);
    } catch (const Error& e) {
      invalid("stop", e.what());
    }
  }
  if (auto it = j.find("layout"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) invalid("layout", "must be an object");
    spec.layout.num_partitions = optional_unsigned<std::uint32_t>(*it, "num_partitions", "layout.").value_or(1);
    spec.layout.replication_factor =
        optional_unsigned<std::uint32_t>(*it, "replication_factor", "layout.").value_or(3);
  }
  validate(spec);
  return spec;
}

mapreduce::JobSpec mr_job_spec_from_json(const json& j) {
  if (!j.is_object()) invalid("body", "must be a JSON object");
  mapreduce::JobSpec spec;
  const auto algo = string_member(j, "algorithm", "");
  auto parsed = mapreduce::parse_algorithm(algo);
  if (!parsed) invalid("algorithm", "unknown algorithm '" + algo + "'");
  spec.algorithm = *parsed;
  spec.source_table = string_member(j, "source_table", "");
  spec.target_table = string_member(j, "target_table", "");
  if (auto it = j.find("params"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) invalid("params", "must be an object of strings");
    for (const auto& [k, v] : it->items()) {
      if (!v.is_string()) invalid("params." + k, "must be a string");
      spec.params[k] = v.get<std::string>();
    }
  }
  spec.worker_count = optional_unsigned<std::size_t>(j, "worker_count", "").value_or(1);
  validate(spec);
  return spec;
}

void validate(const DataJobSpec& spec) {
  check_table_name("target_table", spec.target_table);
  if (spec.layout.num_partitions < 1 || spec.layout.num_partitions > 1024) invalid("layout.num_partitions", "must be 1..1024");
  if (spec.layout.replication_factor < 1 || spec.layout.replication_factor > 16) {
    invalid("layout.replication_factor", "must be 1..16");
  }
  if (const auto* csv = std::get_if<CsvSource>(&spec.source)) {
    if (csv->path.empty()) invalid("source.path", "is required");
    if (csv->mapping.empty()) invalid("source.mapping", "must map at least one column");
    if (csv->key_column.empty()) invalid("source.key_column", "is required");
    if (spec.stop) invalid("stop", "applies to stream sources only");
  } else {
    const auto& s = std::get<StreamSource>(spec.source);
    if (!std::isfinite(s.rate) || s.rate < 0) invalid("source.rate", "must be a finite number >= 0");
    if (!spec.stop) invalid("stop", "is required for stream sources");
  }
}

void validate(const mapreduce::JobSpec& spec) {
  check_table_name("source_table", spec.source_table);
  check_table_name("target_table", spec.target_table);
  if (spec.source_table == spec.target_table) invalid("target_table", "must differ from source_table");
  if (spec.worker_count < 1 || spec.worker_count > 64) invalid("worker_count", "must be 1..64");
  auto column = spec.params.find("column");
  if (column == spec.params.end()) invalid("params.column", "is required");
  try {
    store::ColumnRef::parse(column->second);
  } catch (const Error& e) {
    invalid("params.column", e.what());
  }
  if (spec.algorithm == mapreduce::Algorithm::kFilter && spec.params.count("keyword") == 0) {
    invalid("params.keyword", "is required for FILTER");
  }
}

// --- Records ------------------------------------------------------------------------

void to_json(json& j, const JobRecord& job) {
  json history = json::array();
  for (const auto& h : job.history) {
    history.push_back({{"status", to_string(h.status)}, {"at", format_iso8601(h.at)}, {"at_ms", h.at}});
  }
  j = json{{"job_id", job.job_id},
           {"kind", to_string(job.kind)},
           {"owner", job.owner},
           {"created_at", format_iso8601(job.created_at)},
           {"created_at_ms", job.created_at},
           {"status", to_string(job.status)},
           {"history", std::move(history)}};
  if (job.data) j["spec"] = *job.data;
  if (job.mapreduce) j["spec"] = *job.mapreduce;
  j["error"] = job.error_code ? json{{"code", *job.error_code}, {"message", job.error_message.value_or("")}}
                              : json(nullptr);
  j["import_log"] = job.import_log ? json(*job.import_log) : json(nullptr);
  j["result"] = job.result ? json(*job.result) : json(nullptr);
}

void from_json(const json& j, JobRecord& job) {
  j.at("job_id").get_to(job.job_id);
  auto kind = parse_kind(j.at("kind").get<std::string>());
  auto status = parse_status(j.at("status").get<std::string>());
  if (!kind || !status) throw Error("CorruptRegistry", "bad kind or status for job " + job.job_id);
  job.kind = *kind;
  job.status = *status;
  j.at("owner").get_to(job.owner);
  j.at("created_at_ms").get_to(job.created_at);
  job.history.clear();
  for (const auto& h : j.at("history")) {
    auto s = parse_status(h.at("status").get<std::string>());
    if (!s) throw Error("CorruptRegistry", "bad history entry for job " + job.job_id);
    job.history.push_back({*s, h.at("at_ms").get<Millis>()});
  }
  job.data.reset();
  job.mapreduce.reset();
  if (job.kind == JobKind::kData) job.data = data_job_spec_from_json(j.at("spec"));
  else job.mapreduce = j.at("spec").get<mapreduce::JobSpec>();
  job.error_code.reset();
  job.error_message.reset();
  if (const auto& e = j.at("error"); !e.is_null()) {
    job.error_code = e.at("code").get<std::string>();
    job.error_message = e.at("message").get<std::string>();
  }
  job.import_log.reset();
  if (const auto& l = j.at("import_log"); !l.is_null()) job.import_log = l.get<ingest::ImportLog>();
  job.result.reset();
  if (const auto& r = j.at("result"); !r.is_null()) job.result = r.get<mapreduce::JobResult>();
}

// --- Orchestrator -----------------------------------------------------------------------

Orchestrator::Orchestrator(store::TableStore& store, mapreduce::Engine& engine, Options options)
    : store_(store), engine_(engine), options_(std::move(options)) {
  if (options_.workers == 0) options_.workers = 1;
  load();
}

Orchestrator::~Orchestrator() { stop(); }

void Orchestrator::load() {
  if (!options_.registry_path || !std::filesystem::exists(*options_.registry_path)) return;
  std::ifstream in(*options_.registry_path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    auto doc = json::parse(buf.str());
    if (doc.at("format_version").get<int>() != kRegistryFormatVersion) {
      throw Error("CorruptRegistry", "unsupported registry format_version");
    }
    doc.at("next_id").get_to(next_id_);
    for (const auto& item : doc.at("jobs")) {
      auto job = item.get<JobRecord>();
      jobs_.emplace(job.job_id, std::move(job));
    }
  } catch (const Error& e) {
    if (e.code() == "CorruptRegistry") throw;
    throw Error("CorruptRegistry", options_.registry_path->string() + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error("CorruptRegistry", options_.registry_path->string() + ": " + e.what());
  }

  std::lock_guard lock(mu_);
  bool changed = false;
  const Millis now = options_.clock();
  for (auto& [id, job] : jobs_) {
    if (job.status != JobStatus::kRunning) continue;
    job.error_code = "Interrupted";
    job.error_message = "interrupted: the service stopped while the job was running";
    transition_locked(job, JobStatus::kError, now);
    changed = true;
  }
  if (changed) persist_locked();
}

void Orchestrator::persist_locked() const {
  if (!options_.registry_path) return;
  json doc{{"format_version", kRegistryFormatVersion}, {"next_id", next_id_}, {"jobs", json::array()}};
  for (const auto& [id, job] : jobs_) doc["jobs"].push_back(job);
  const auto& path = *options_.registry_path;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << doc.dump(2) << '\n';
    out.flush();
    if (!out) throw Error("IoError", "cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

JobRecord& Orchestrator::find_locked(const std::string& job_id) {
  auto it = jobs_.find(job_id);
  if (it == jobs_.end()) throw Error("UnknownJob", "no job '" + job_id + "'");
  return it->second;
}

void Orchestrator::transition_locked(JobRecord& job, JobStatus to, Millis at) {
  if (!legal_transition(job.kind, job.status, to)) {
    throw Error("IllegalTransition", job.job_id + ": " + std::string(to_string(job.status)) + " -> " +
                                         std::string(to_string(to)));
  }
  job.status = to;
  job.history.push_back({to, at});
  if (to == JobStatus::kRunning) ++dispatch_counts_[job.job_id];
}

JobRecord Orchestrator::create_data_job(DataJobSpec spec, std::string owner) {
  validate(spec);
  std::lock_guard lock(mu_);
  JobRecord job;
  char id[32];
  std::snprintf(id, sizeof id, "job-%06llu", static_cast<unsigned long long>(next_id_++));
  job.job_id = id;
  job.kind = JobKind::kData;
  job.owner = std::move(owner);
  job.created_at = options_.clock();
  job.history.push_back({JobStatus::kJobGenerated, job.created_at});
  job.data = std::move(spec);
  auto& stored = jobs_.emplace(job.job_id, std::move(job)).first->second;
  persist_locked();
  return stored;
}

JobRecord Orchestrator::create_mr_job(mapreduce::JobSpec spec, std::string owner) {
  validate(spec);
  std::lock_guard lock(mu_);
  JobRecord job;
  char id[32];
  std::snprintf(id, sizeof id, "job-%06llu", static_cast<unsigned long long>(next_id_++));
  job.job_id = id;
  job.kind = JobKind::kMapReduce;
  job.owner = std::move(owner);
  job.created_at = options_.clock();
  job.history.push_back({JobStatus::kJobGenerated, job.created_at});
  spec.job_id = job.job_id;
  job.mapreduce = std::move(spec);
  auto& stored = jobs_.emplace(job.job_id, std::move(job)).first->second;
  persist_locked();
  return stored;
}

JobRecord Orchestrator::update_data_job(const std::string& job_id, DataJobSpec spec) {
  validate(spec);
  std::lock_guard lock(mu_);
  auto& job = find_locked(job_id);
  if (job.kind != JobKind::kData) invalid("kind", "job " + job_id + " is not a data job");
  if (job.status != JobStatus::kJobGenerated && job.status != JobStatus::kWaiting) {
    throw Error("JobImmutable", "job " + job_id + " is " + std::string(to_string(job.status)));
  }
  job.data = std::move(spec);
  persist_locked();
  return job;
}

JobRecord Orchestrator::update_mr_job(const std::string& job_id, mapreduce::JobSpec spec) {
  validate(spec);
  std::lock_guard lock(mu_);
  auto& job = find_locked(job_id);
  if (job.kind != JobKind::kMapReduce) invalid("kind", "job " + job_id + " is not a MapReduce job");
  if (job.status != JobStatus::kJobGenerated) {
    throw Error("JobImmutable", "job " + job_id + " is " + std::string(to_string(job.status)));
  }
  spec.job_id = job_id;
  job.mapreduce = std::move(spec);
  persist_locked();
  return job;
}

void Orchestrator::delete_job(const std::string& job_id) {
  std::lock_guard lock(mu_);
  auto& job = find_locked(job_id);
  if (job.status == JobStatus::kRunning) throw Error("JobRunning", "job " + job_id + " is running");
  jobs_.erase(job_id);
  persist_locked();
}

JobRecord Orchestrator::get(const std::string& job_id) const {
  std::lock_guard lock(mu_);
  auto it = jobs_.find(job_id);
  if (it == jobs_.end()) throw Error("UnknownJob", "no job '" + job_id + "'");
  return it->second;
}

std::vector<JobRecord> Orchestrator::list(const JobFilter& filter) const {
  std::lock_guard lock(mu_);
  std::vector<JobRecord> out;
  for (const auto& [id, job] : jobs_) {
    if (filter.kind && job.kind != *filter.kind) continue;
    if (filter.status && job.status != *filter.status) continue;
    out.push_back(job);
  }
  return out;
}

std::map<std::string, int> Orchestrator::dispatch_counts() const {
  std::lock_guard lock(mu_);
  return dispatch_counts_;
}

std::vector<std::string> Orchestrator::poll_and_dispatch(Millis now) {
  std::vector<std::string> dispatched;
  std::lock_guard lock(mu_);
  bool changed = false;
  for (auto& [id, job] : jobs_) {
    if (job.kind == JobKind::kData) {
      if (job.status == JobStatus::kJobGenerated) {
        transition_locked(job, JobStatus::kWaiting, now);
        changed = true;
      }
      if (job.status == JobStatus::kWaiting && (!job.data->run_at || *job.data->run_at <= now)) {
        transition_locked(job, JobStatus::kRunning, now);
        dispatched.push_back(id);
      }
    } else if (job.status == JobStatus::kJobGenerated) {
      transition_locked(job, JobStatus::kRunning, now);
      dispatched.push_back(id);
    }
  }
  if (changed || !dispatched.empty()) persist_locked();
  if (!threads_.empty() && !dispatched.empty()) {
    queue_.insert(queue_.end(), dispatched.begin(), dispatched.end());
    in_flight_ += dispatched.size();
    work_cv_.notify_all();
  }
  return dispatched;
}

void Orchestrator::run_data_job(const JobRecord& snapshot, JobRecord& outcome, std::stop_token cancel) {
  const auto& spec = *snapshot.data;
  if (const auto* csv = std::get_if<CsvSource>(&spec.source)) {
    ingest::CsvImportSpec import{csv->path, csv->mapping, csv->key_column, spec.target_table, spec.layout};
    outcome.import_log = ingest::import_csv(store_, import, snapshot.job_id, options_.clock);
    return;
  }
  const auto& s = std::get<StreamSource>(spec.source);
  ingest::SimulatedStreamOptions opts;
  opts.seed = s.seed;
  opts.rate = s.rate;
  opts.corpus = s.corpus ? ingest::load_corpus(*s.corpus) : ingest::demo_corpus();
  opts.max_records = s.max_records;
  ingest::SimulatedStream source(std::move(opts));
  outcome.import_log = ingest::stream_ingest(store_, source, {spec.target_table, *spec.stop, spec.layout},
                                             snapshot.job_id, options_.clock, cancel);
}

bool Orchestrator::execute(const std::string& job_id) {
  JobRecord snapshot;
  std::stop_token cancel;
  {
    std::lock_guard lock(mu_);
    auto it = jobs_.find(job_id);
    if (it == jobs_.end() || it->second.status != JobStatus::kRunning) return false;
    if (!claimed_.insert(job_id).second) return false;
    snapshot = it->second;
    cancel = cancel_.get_token();
  }

  JobRecord outcome;
  try {
    if (snapshot.kind == JobKind::kData) {
      run_data_job(snapshot, outcome, cancel);
    } else {
      outcome.result = engine_.run_job(*snapshot.mapreduce);
    }
  } catch (const Error& e) {
    outcome.error_code = e.code();
    outcome.error_message = e.what();
  } catch (const std::exception& e) {
    outcome.error_code = "InternalError";
    outcome.error_message = error_text(e);
  }

  std::lock_guard lock(mu_);
  auto& job = find_locked(job_id);
  job.import_log = std::move(outcome.import_log);
  job.result = std::move(outcome.result);
  job.error_code = std::move(outcome.error_code);
  job.error_message = std::move(outcome.error_message);
  transition_locked(job, job.error_code ? JobStatus::kError : JobStatus::kSuccess, options_.clock());
  persist_locked();
  return true;
}

JobRecord Orchestrator::run_now(const std::string& job_id) {
  const auto dispatched = poll_and_dispatch(options_.clock());
  bool pooled;
  {
    std::lock_guard lock(mu_);
    pooled = !threads_.empty();
  }
  if (pooled) {
    wait_idle();
  } else {
    for (const auto& id : dispatched) execute(id);
  }
  return get(job_id);
}

void Orchestrator::start() {
  std::lock_guard lock(mu_);
  if (!threads_.empty()) return;
  cancel_ = std::stop_source();
  for (std::size_t i = 0; i < options_.workers; ++i) {
    threads_.emplace_back([this](std::stop_token token) { worker_loop(token); });
  }
  threads_.emplace_back([this](std::stop_token token) { dispatcher_loop(token); });
}

void Orchestrator::stop() {
  std::vector<std::jthread> threads;
  {
    std::lock_guard lock(mu_);
    if (threads_.empty()) return;
    threads.swap(threads_);
    cancel_.request_stop();
  }
  for (auto& t : threads) t.request_stop();
  work_cv_.notify_all();
  threads.clear();  // joins

  std::lock_guard lock(mu_);
  // Dispatched but never started: same outcome as a restart would give them.
  bool changed = false;
  for (const auto& id : queue_) {
    auto it = jobs_.find(id);
    if (it == jobs_.end() || it->second.status != JobStatus::kRunning || claimed_.count(id)) continue;
    claimed_.insert(id);
    it->second.error_code = "Interrupted";
    it->second.error_message = "interrupted: the service stopped before the job started";
    transition_locked(it->second, JobStatus::kError, options_.clock());
    changed = true;
  }
  queue_.clear();
  in_flight_ = 0;
  if (changed) persist_locked();
  idle_cv_.notify_all();
}

void Orchestrator::wait_idle() {
  std::unique_lock lock(mu_);
  idle_cv_.wait(lock, [&] { return in_flight_ == 0; });
}

void Orchestrator::worker_loop(std::stop_token token) {
  while (true) {
    std::string id;
    {
      std::unique_lock lock(mu_);
      if (!work_cv_.wait(lock, token, [&] { return !queue_.empty(); })) return;
      id = std::move(queue_.front());
      queue_.pop_front();
    }
    execute(id);
    {
      std::lock_guard lock(mu_);
      if (in_flight_ > 0) --in_flight_;
    }
    idle_cv_.notify_all();
  }
}

void Orchestrator::dispatcher_loop(std::stop_token token) {
  std::mutex sleep_mu;
  std::condition_variable_any sleeper;
  while (!token.stop_requested()) {
    poll_and_dispatch(options_.clock());
    std::unique_lock lock(sleep_mu);
    sleeper.wait_for(lock, token, options_.poll_interval, [] { return false; });
  }
}

}  // namespace sentimill::orchestrator
