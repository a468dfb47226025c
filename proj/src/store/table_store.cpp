#include "sentimill/store/table_store.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <mutex>

#include <nlohmann/json.hpp>

#include "record_log.hpp"
#include "sentimill/common/clock.hpp"
#include "sentimill/common/error.hpp"

namespace sentimill::store {

namespace fs = std::filesystem;

namespace {

constexpr int kSchemaFormatVersion = 1;

using ColumnKey = std::pair<std::string, std::string>;
// Newest version first.
using Versions = std::map<Timestamp, std::string, std::greater<>>;
using StoredRow = std::map<ColumnKey, Versions>;
using ReplicaRows = std::map<std::string, StoredRow, std::less<>>;

bool valid_table_name(std::string_view name) {
  if (name.empty() || name.size() > 128 || name == "." || name == "..") return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
           c == '-' || c == '.';
  });
}

Row materialize(const std::string& key, const StoredRow& stored) {
  Row row;
  row.key = key;
  row.cells.reserve(stored.size());
  for (const auto& [column, versions] : stored) {
    if (versions.empty()) continue;
    const auto& [ts, value] = *versions.begin();
    row.cells.push_back(Cell{column.first, column.second, ts, value});
  }
  return row;
}

void append_u64(std::string& out, std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) out.push_back(static_cast<char>((v >> shift) & 0xff));
}

void append_str(std::string& out, std::string_view s) {
  append_u64(out, s.size());
  out.append(s);
}

fs::path log_path(const fs::path& dir, std::uint32_t partition, std::uint32_t replica) {
  return dir / ("p" + std::to_string(partition) + ".r" + std::to_string(replica) + ".log");
}

void write_schema_file(const fs::path& dir, const TableSchema& schema) {
  nlohmann::json j = {
      {"format_version", kSchemaFormatVersion},
      {"name", schema.name},
      {"families", schema.families},
      {"num_partitions", schema.num_partitions},
      {"replication_factor", schema.replication_factor},
      {"partition_hash", "fnv1a64"},
  };
  std::ofstream out(dir / "schema.json");
  out << j.dump(2) << '\n';
  if (!out) throw Error("IoError", "cannot write schema for " + schema.name);
}

TableSchema read_schema_file(const fs::path& file) {
  std::ifstream in(file);
  nlohmann::json j = nlohmann::json::parse(in);
  if (j.value("format_version", 0) != kSchemaFormatVersion) {
    throw Error("IoError", "unsupported schema format in " + file.string());
  }
  TableSchema schema;
  schema.name = j.at("name").get<std::string>();
  schema.families = j.at("families").get<std::set<std::string>>();
  schema.num_partitions = j.at("num_partitions").get<std::uint32_t>();
  schema.replication_factor = j.at("replication_factor").get<std::uint32_t>();
  return schema;
}

}  // namespace

// ---------------------------------------------------------------------------

const Cell* Row::find(std::string_view family, std::string_view qualifier) const {
  for (const auto& cell : cells) {
    if (cell.family == family && cell.qualifier == qualifier) return &cell;
  }
  return nullptr;
}

ColumnRef ColumnRef::parse(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 == text.size()) {
    throw Error("InvalidColumn", "column must be 'family:qualifier', got '" + std::string(text) + "'");
  }
  return ColumnRef{std::string(text.substr(0, colon)), std::string(text.substr(colon + 1))};
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint32_t partition_of(std::string_view row_key, std::uint32_t num_partitions) {
  if (num_partitions == 0) throw Error("InvalidSchema", "num_partitions must be >= 1");
  return static_cast<std::uint32_t>(fnv1a64(row_key) % num_partitions);
}

void validate_schema(const TableSchema& schema) {
  if (!valid_table_name(schema.name)) {
    throw Error("InvalidSchema", "invalid table name '" + schema.name + "'");
  }
  if (schema.families.empty()) throw Error("InvalidSchema", "schema needs at least one column family");
  for (const auto& family : schema.families) {
    if (family.empty() || family.find(':') != std::string::npos) {
      throw Error("InvalidSchema", "invalid column family '" + family + "'");
    }
  }
  if (schema.num_partitions == 0) throw Error("InvalidSchema", "num_partitions must be >= 1");
  if (schema.replication_factor == 0) throw Error("InvalidSchema", "replication_factor must be >= 1");
}

// ---------------------------------------------------------------------------

struct Table::Partition {
  struct Replica {
    ReplicaRows rows;
    std::unique_ptr<detail::LogWriter> log;
  };

  mutable std::shared_mutex mu;
  std::vector<Replica> replicas;
  Timestamp last_assigned = 0;

  // Caller holds `mu` exclusively.
  Timestamp next_timestamp() {
    last_assigned = std::max(system_now_ms(), last_assigned + 1);
    return last_assigned;
  }

  void apply(const detail::LogRecord& rec, Replica& replica) {
    if (rec.op == detail::RecordOp::kDeleteRow) {
      replica.rows.erase(rec.row_key);
      return;
    }
    auto it = replica.rows.find(rec.row_key);
    if (it == replica.rows.end()) it = replica.rows.emplace(rec.row_key, StoredRow{}).first;
    it->second[{rec.family, rec.qualifier}][rec.timestamp] = rec.value;
  }

  // Synchronous replication: every replica (and its log) is updated before
  // the caller's lock is released.
  void apply_all(std::span<const detail::LogRecord> records) {
    std::string framed;
    if (replicas.front().log) {
      for (const auto& rec : records) framed += detail::encode_record(rec);
    }
    for (auto& replica : replicas) {
      if (replica.log) replica.log->append(framed);
      for (const auto& rec : records) apply(rec, replica);
    }
    for (const auto& rec : records) {
      if (rec.op == detail::RecordOp::kPut) last_assigned = std::max(last_assigned, rec.timestamp);
    }
  }

  const ReplicaRows& primary() const { return replicas.front().rows; }
};

Table::Table(TableSchema schema, std::optional<fs::path> dir) : schema_(std::move(schema)), dir_(std::move(dir)) {
  partitions_.reserve(schema_.num_partitions);
  for (std::uint32_t p = 0; p < schema_.num_partitions; ++p) {
    auto part = std::make_unique<Partition>();
    part->replicas.resize(schema_.replication_factor);
    partitions_.push_back(std::move(part));
  }
}

Table::~Table() = default;

void Table::replay(const fs::path& dir) {
  for (std::uint32_t p = 0; p < schema_.num_partitions; ++p) {
    auto& part = *partitions_[p];
    for (std::uint32_t r = 0; r < schema_.replication_factor; ++r) {
      const auto path = log_path(dir, p, r);
      for (const auto& rec : detail::read_log(path)) {
        part.apply(rec, part.replicas[r]);
        if (rec.op == detail::RecordOp::kPut) part.last_assigned = std::max(part.last_assigned, rec.timestamp);
      }
      part.replicas[r].log = std::make_unique<detail::LogWriter>(path);
    }
  }
}

void Table::mark_dropped() {
  dropped_ = true;
  for (auto& part : partitions_) {
    std::unique_lock lock(part->mu);
    for (auto& replica : part->replicas) replica.log.reset();
  }
}

void Table::check_live() const {
  if (dropped_) throw Error("UnknownTable", "table '" + schema_.name + "' was dropped");
}

void Table::check_family(std::string_view family) const {
  if (schema_.families.find(std::string(family)) == schema_.families.end()) {
    throw Error("UnknownFamily", "table '" + schema_.name + "' has no column family '" + std::string(family) + "'");
  }
}

void Table::put(std::string_view row_key, std::string_view family, std::string_view qualifier,
                std::string_view value, std::optional<Timestamp> timestamp) {
  const CellWrite write{std::string(family), std::string(qualifier), std::string(value), timestamp};
  put_row(row_key, std::span<const CellWrite>(&write, 1));
}

void Table::put_row(std::string_view row_key, std::span<const CellWrite> cells) {
  check_live();
  if (row_key.empty()) throw Error("InvalidKey", "row key must be non-empty");
  for (const auto& cell : cells) {
    check_family(cell.family);
    if (cell.qualifier.empty()) throw Error("InvalidColumn", "qualifier must be non-empty");
  }
  if (cells.empty()) return;

  auto& part = *partitions_[partition_of(row_key, schema_.num_partitions)];
  std::unique_lock lock(part.mu);
  check_live();
  std::vector<detail::LogRecord> records;
  records.reserve(cells.size());
  std::optional<Timestamp> assigned;
  for (const auto& cell : cells) {
    detail::LogRecord rec;
    rec.op = detail::RecordOp::kPut;
    rec.row_key = std::string(row_key);
    rec.family = cell.family;
    rec.qualifier = cell.qualifier;
    if (cell.timestamp) {
      rec.timestamp = *cell.timestamp;
    } else {
      // One store-assigned timestamp per row write.
      if (!assigned) assigned = part.next_timestamp();
      rec.timestamp = *assigned;
    }
    rec.value = cell.value;
    records.push_back(std::move(rec));
  }
  part.apply_all(records);
}

std::optional<Row> Table::get(std::string_view row_key) const {
  check_live();
  const auto& part = *partitions_[partition_of(row_key, schema_.num_partitions)];
  std::shared_lock lock(part.mu);
  const auto& rows = part.primary();
  auto it = rows.find(row_key);
  if (it == rows.end()) return std::nullopt;
  return materialize(it->first, it->second);
}

std::vector<Row> Table::scan(const ScanOptions& options) const {
  check_live();
  if (options.start && options.end && *options.start >= *options.end) {
    throw Error("InvalidRange", "scan range start must be < end");
  }
  std::vector<Row> merged;
  for (const auto& part_ptr : partitions_) {
    const auto& part = *part_ptr;
    std::shared_lock lock(part.mu);
    const auto& rows = part.primary();
    auto it = options.start ? rows.lower_bound(*options.start) : rows.begin();
    std::size_t taken = 0;
    for (; it != rows.end(); ++it) {
      if (options.end && it->first >= *options.end) break;
      if (options.limit != 0 && taken == options.limit) break;
      merged.push_back(materialize(it->first, it->second));
      ++taken;
    }
  }
  // Partitions hold disjoint key sets, so a plain sort is a k-way merge.
  std::sort(merged.begin(), merged.end(), [](const Row& a, const Row& b) { return a.key < b.key; });
  if (options.limit != 0 && merged.size() > options.limit) merged.resize(options.limit);
  return merged;
}

std::vector<Row> Table::scan_partition(std::uint32_t index) const {
  check_live();
  if (index >= partitions_.size()) throw Error("InvalidPartition", "partition index out of range");
  const auto& part = *partitions_[index];
  std::shared_lock lock(part.mu);
  std::vector<Row> out;
  out.reserve(part.primary().size());
  for (const auto& [key, stored] : part.primary()) out.push_back(materialize(key, stored));
  return out;
}

void Table::delete_row(std::string_view row_key) {
  check_live();
  if (row_key.empty()) return;
  auto& part = *partitions_[partition_of(row_key, schema_.num_partitions)];
  std::unique_lock lock(part.mu);
  if (part.primary().find(row_key) == part.primary().end()) return;
  detail::LogRecord rec;
  rec.op = detail::RecordOp::kDeleteRow;
  rec.row_key = std::string(row_key);
  part.apply_all(std::span<const detail::LogRecord>(&rec, 1));
}

std::size_t Table::row_count() const {
  std::size_t n = 0;
  for (const auto& part : partitions_) {
    std::shared_lock lock(part->mu);
    n += part->primary().size();
  }
  return n;
}

std::string Table::replica_image(std::uint32_t partition, std::uint32_t replica) const {
  if (partition >= partitions_.size() || replica >= schema_.replication_factor) {
    throw Error("InvalidPartition", "partition or replica index out of range");
  }
  const auto& part = *partitions_[partition];
  std::shared_lock lock(part.mu);
  std::string out;
  for (const auto& [key, stored] : part.replicas[replica].rows) {
    append_str(out, key);
    append_u64(out, stored.size());
    for (const auto& [column, versions] : stored) {
      append_str(out, column.first);
      append_str(out, column.second);
      append_u64(out, versions.size());
      for (const auto& [ts, value] : versions) {
        append_u64(out, static_cast<std::uint64_t>(ts));
        append_str(out, value);
      }
    }
  }
  return out;
}

bool Table::replicas_identical() const {
  for (std::uint32_t p = 0; p < schema_.num_partitions; ++p) {
    const std::string reference = replica_image(p, 0);
    for (std::uint32_t r = 1; r < schema_.replication_factor; ++r) {
      if (replica_image(p, r) != reference) return false;
    }
  }
  return true;
}

std::string table_image(const Table& table) {
  std::string out;
  for (const auto& row : table.scan()) {
    append_str(out, row.key);
    append_u64(out, row.cells.size());
    for (const auto& cell : row.cells) {
      append_str(out, cell.family);
      append_str(out, cell.qualifier);
      append_u64(out, static_cast<std::uint64_t>(cell.timestamp));
      append_str(out, cell.value);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

TableStore::TableStore() = default;

TableStore::TableStore(fs::path data_dir) : data_dir_(std::move(data_dir)) {
  fs::create_directories(*data_dir_);
  for (const auto& entry : fs::directory_iterator(*data_dir_)) {
    if (!entry.is_directory()) continue;
    const auto schema_file = entry.path() / "schema.json";
    if (!fs::exists(schema_file)) continue;
    TableSchema schema = read_schema_file(schema_file);
    validate_schema(schema);
    std::shared_ptr<Table> table(new Table(schema, entry.path()));
    table->replay(entry.path());
    tables_.emplace(schema.name, std::move(table));
  }
}

TableStore::~TableStore() = default;

std::shared_ptr<Table> TableStore::create_table(TableSchema schema) {
  validate_schema(schema);
  std::unique_lock lock(mu_);
  if (tables_.find(schema.name) != tables_.end()) {
    throw Error("DuplicateTable", "table '" + schema.name + "' already exists");
  }
  std::optional<fs::path> dir;
  if (data_dir_) {
    dir = *data_dir_ / schema.name;
    fs::remove_all(*dir);
    fs::create_directories(*dir);
    write_schema_file(*dir, schema);
  }
  std::shared_ptr<Table> table(new Table(schema, dir));
  if (dir) table->replay(*dir);
  tables_.emplace(schema.name, table);
  return table;
}

std::shared_ptr<Table> TableStore::find_table(std::string_view name) const {
  std::shared_lock lock(mu_);
  auto it = tables_.find(name);
  return it == tables_.end() ? nullptr : it->second;
}

std::shared_ptr<Table> TableStore::table(std::string_view name) const {
  auto t = find_table(name);
  if (!t) throw Error("UnknownTable", "no table named '" + std::string(name) + "'");
  return t;
}

void TableStore::drop_table(std::string_view name) {
  std::shared_ptr<Table> victim;
  {
    std::unique_lock lock(mu_);
    auto it = tables_.find(name);
    if (it == tables_.end()) throw Error("UnknownTable", "no table named '" + std::string(name) + "'");
    victim = it->second;
    tables_.erase(it);
  }
  victim->mark_dropped();
  if (victim->dir_) fs::remove_all(*victim->dir_);
}

std::vector<std::string> TableStore::list_tables() const {
  std::shared_lock lock(mu_);
  std::vector<std::string> names;
  names.reserve(tables_.size());
  for (const auto& [name, _] : tables_) names.push_back(name);
  return names;
}

void TableStore::put(std::string_view table_name, std::string_view row_key, std::string_view family,
                     std::string_view qualifier, std::string_view value, std::optional<Timestamp> timestamp) {
  table(table_name)->put(row_key, family, qualifier, value, timestamp);
}

std::optional<Row> TableStore::get(std::string_view table_name, std::string_view row_key) const {
  return table(table_name)->get(row_key);
}

std::vector<Row> TableStore::scan(std::string_view table_name, const ScanOptions& options) const {
  return table(table_name)->scan(options);
}

void TableStore::delete_row(std::string_view table_name, std::string_view row_key) {
  table(table_name)->delete_row(row_key);
}

bool TableStore::all_replicas_identical() const {
  std::vector<std::shared_ptr<Table>> snapshot;
  {
    std::shared_lock lock(mu_);
    for (const auto& [_, t] : tables_) snapshot.push_back(t);
  }
  return std::all_of(snapshot.begin(), snapshot.end(), [](const auto& t) { return t->replicas_identical(); });
}

}  // namespace sentimill::store
