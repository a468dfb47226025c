#include "sentimill/mapreduce/engine.hpp"

#include <algorithm>
#include <chrono>

#include "sentimill/common/error.hpp"
#include "sentimill/common/parallel.hpp"

namespace sentimill::mapreduce {
namespace {

std::string upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  }
  return out;
}

std::string describe(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) return err->code() + ": " + err->what();
  return e.what();
}

}  // namespace

std::string_view to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::kFilter: return "FILTER";
    case Algorithm::kWordCount: return "WORDCOUNT";
    case Algorithm::kSentiment: return "SENTIMENT";
  }
  return "UNKNOWN";
}

std::optional<Algorithm> parse_algorithm(std::string_view name) {
  const auto u = upper(name);
  if (u == "FILTER") return Algorithm::kFilter;
  if (u == "WORDCOUNT") return Algorithm::kWordCount;
  if (u == "SENTIMENT") return Algorithm::kSentiment;
  return std::nullopt;
}

void MapContext::emit(std::string key, std::string value) {
  if (key.empty()) throw Error("InvalidKey", "mapper emitted an empty key");
  pairs_.push_back(KeyValue{std::move(key), std::move(value)});
}

void MapContext::write(const store::Row& row) {
  if (target_ == nullptr) throw Error("InvalidPlan", "map-only write without a target table");
  std::vector<store::CellWrite> cells;
  cells.reserve(row.cells.size());
  for (const auto& c : row.cells) cells.push_back({c.family, c.qualifier, c.value, c.timestamp});
  target_->put_row(row.key, cells);
  ++rows_written_;
}

MapOutput map_phase(const JobPlan& plan, const store::Table& source, std::uint32_t partition,
                    store::Table* target) {
  MapOutput out;
  MapContext ctx(out.pairs, target);
  for (const auto& row : source.scan_partition(partition)) {
    ++out.rows_read;
    try {
      plan.map(row, ctx);
    } catch (const std::exception& e) {
      throw Error("MapperFailure", "mapper failed on row '" + row.key + "': " + describe(e));
    }
  }
  out.rows_written = ctx.rows_written();
  return out;
}

std::vector<Group> shuffle(std::vector<KeyValue> pairs) {
  std::sort(pairs.begin(), pairs.end(), [](const KeyValue& a, const KeyValue& b) {
    if (a.key != b.key) return a.key < b.key;
    return a.value < b.value;
  });
  std::vector<Group> groups;
  for (auto& kv : pairs) {
    if (groups.empty() || groups.back().key != kv.key) groups.push_back(Group{std::move(kv.key), {}});
    groups.back().values.push_back(std::move(kv.value));
  }
  return groups;
}

std::uint64_t reduce_phase(const JobPlan& plan, std::span<const Group> groups, store::Table& target,
                           std::size_t workers) {
  if (plan.map_only()) return 0;
  std::vector<char> wrote(groups.size(), 0);
  parallel_for(groups.size(), workers, [&](std::size_t i) {
    const auto& group = groups[i];
    std::vector<store::CellWrite> cells;
    try {
      cells = plan.reduce(group.key, group.values);
    } catch (const std::exception& e) {
      throw Error("ReducerFailure", "reducer failed on key '" + group.key + "': " + describe(e));
    }
    if (cells.empty()) return;
    for (auto& c : cells) {
      if (!c.timestamp) c.timestamp = kDerivedTimestamp;
    }
    target.put_row(group.key, cells);
    wrote[i] = 1;
  });
  return static_cast<std::uint64_t>(std::count(wrote.begin(), wrote.end(), 1));
}

// ---------------------------------------------------------------------------

void Engine::TableLockSet::acquire(const std::vector<std::string>& names) {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] {
    return std::none_of(names.begin(), names.end(), [&](const auto& n) { return busy_.count(n) != 0; });
  });
  busy_.insert(names.begin(), names.end());
}

void Engine::TableLockSet::release(const std::vector<std::string>& names) {
  {
    std::lock_guard lock(mu_);
    for (const auto& n : names) busy_.erase(n);
  }
  cv_.notify_all();
}

Engine::Engine(store::TableStore& store, PlanFactory factory) : store_(store), factory_(std::move(factory)) {}

JobResult Engine::run_job(const JobSpec& spec) {
  if (spec.source_table.empty() || spec.target_table.empty()) {
    throw Error("InvalidSpec", "source and target tables are required");
  }
  if (spec.source_table == spec.target_table) {
    throw Error("InvalidSpec", "source and target table must differ");
  }
  if (spec.worker_count == 0) throw Error("InvalidSpec", "worker_count must be >= 1");

  const auto started = std::chrono::steady_clock::now();
  const std::vector<std::string> names{spec.source_table, spec.target_table};
  locks_.acquire(names);
  struct Release {
    TableLockSet& set;
    const std::vector<std::string>& names;
    ~Release() { set.release(names); }
  } release{locks_, names};

  auto source = store_.find_table(spec.source_table);
  if (!source) throw Error("UnknownSourceTable", "source table '" + spec.source_table + "' does not exist");
  if (store_.has_table(spec.target_table)) {
    throw Error("TargetExists", "target table '" + spec.target_table + "' already exists");
  }
  const JobPlan plan = factory_(spec, source->schema());

  store::TableSchema target_schema{spec.target_table, plan.target_families, source->num_partitions(),
                                   source->schema().replication_factor};
  auto target = store_.create_table(target_schema);

  JobResult result;
  result.job_id = spec.job_id;
  try {
    std::vector<MapOutput> outputs(source->num_partitions());
    parallel_for(outputs.size(), spec.worker_count, [&](std::size_t p) {
      outputs[p] = map_phase(plan, *source, static_cast<std::uint32_t>(p), plan.map_only() ? target.get() : nullptr);
    });

    std::vector<KeyValue> pairs;
    for (auto& out : outputs) {
      result.rows_read += out.rows_read;
      result.rows_written += out.rows_written;
      pairs.insert(pairs.end(), std::make_move_iterator(out.pairs.begin()), std::make_move_iterator(out.pairs.end()));
    }
    if (plan.map_only()) {
      result.pairs_emitted = result.rows_written;
    } else {
      result.pairs_emitted = pairs.size();
      const auto groups = shuffle(std::move(pairs));
      result.rows_written = reduce_phase(plan, groups, *target, spec.worker_count);
    }
  } catch (...) {
    store_.drop_table(spec.target_table);
    throw;
  }
  result.duration_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - started)
                           .count();
  return result;
}

}  // namespace sentimill::mapreduce
