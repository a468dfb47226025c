#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sentimill::store {

using Timestamp = std::int64_t;

struct Cell {
  std::string family;
  std::string qualifier;
  Timestamp timestamp = 0;
  std::string value;

  bool operator==(const Cell&) const = default;
};

// A row as seen by readers: the latest version of every (family, qualifier),
// ordered by family then qualifier.
struct Row {
  std::string key;
  std::vector<Cell> cells;

  const Cell* find(std::string_view family, std::string_view qualifier) const;
  bool operator==(const Row&) const = default;
};

// "family:qualifier". The qualifier may itself contain ':'.
struct ColumnRef {
  std::string family;
  std::string qualifier;

  static ColumnRef parse(std::string_view text);
  std::string str() const { return family + ":" + qualifier; }
  bool operator==(const ColumnRef&) const = default;
  auto operator<=>(const ColumnRef&) const = default;
};

// One cell to be written. Without a timestamp the partition assigns one.
struct CellWrite {
  std::string family;
  std::string qualifier;
  std::string value;
  std::optional<Timestamp> timestamp;
};

struct TableSchema {
  std::string name;
  std::set<std::string> families;
  std::uint32_t num_partitions = 1;
  std::uint32_t replication_factor = 3;

  bool operator==(const TableSchema&) const = default;
};

// Half-open [start, end) key range plus an optional row limit (0 = no limit).
struct ScanOptions {
  std::optional<std::string> start;
  std::optional<std::string> end;
  std::size_t limit = 0;
};

/// 64-bit FNV-1a over the key bytes. Part of the on-disk format: a row's
/// partition is `fnv1a64(key) % num_partitions`.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

std::uint32_t partition_of(std::string_view row_key, std::uint32_t num_partitions);

class TableStore;

class Table {
 public:
  ~Table();
  Table(const Table&) = delete;
  Table& operator=(const Table&) = delete;

  const TableSchema& schema() const noexcept { return schema_; }
  const std::string& name() const noexcept { return schema_.name; }
  std::uint32_t num_partitions() const noexcept { return schema_.num_partitions; }

  void put(std::string_view row_key, std::string_view family, std::string_view qualifier,
           std::string_view value, std::optional<Timestamp> timestamp = std::nullopt);

  // Writes several cells of one row under a single partition lock.
  void put_row(std::string_view row_key, std::span<const CellWrite> cells);

  std::optional<Row> get(std::string_view row_key) const;

  std::vector<Row> scan(const ScanOptions& options = {}) const;

  // Rows of a single partition in ascending key order.
  std::vector<Row> scan_partition(std::uint32_t index) const;

  // Deleting a missing row is a no-op.
  void delete_row(std::string_view row_key);

  std::size_t row_count() const;

  // Canonical byte image of one replica, every version included.
  std::string replica_image(std::uint32_t partition, std::uint32_t replica) const;

  bool replicas_identical() const;

 private:
  friend class TableStore;
  struct Partition;

  Table(TableSchema schema, std::optional<std::filesystem::path> dir);

  void check_live() const;
  void check_family(std::string_view family) const;
  void replay(const std::filesystem::path& dir);
  void mark_dropped();

  TableSchema schema_;
  std::optional<std::filesystem::path> dir_;
  std::vector<std::unique_ptr<Partition>> partitions_;
  std::atomic<bool> dropped_{false};
};

class TableStore {
 public:
  // In-memory store.
  TableStore();
  // Persistent store rooted at `data_dir`; existing tables are replayed.
  explicit TableStore(std::filesystem::path data_dir);
  ~TableStore();

  TableStore(const TableStore&) = delete;
  TableStore& operator=(const TableStore&) = delete;

  std::shared_ptr<Table> create_table(TableSchema schema);
  std::shared_ptr<Table> table(std::string_view name) const;
  std::shared_ptr<Table> find_table(std::string_view name) const;
  bool has_table(std::string_view name) const { return find_table(name) != nullptr; }
  void drop_table(std::string_view name);
  std::vector<std::string> list_tables() const;

  void put(std::string_view table, std::string_view row_key, std::string_view family,
           std::string_view qualifier, std::string_view value,
           std::optional<Timestamp> timestamp = std::nullopt);
  std::optional<Row> get(std::string_view table, std::string_view row_key) const;
  std::vector<Row> scan(std::string_view table, const ScanOptions& options = {}) const;
  void delete_row(std::string_view table, std::string_view row_key);

  // True when every partition of every table has identical replicas.
  bool all_replicas_identical() const;

  const std::optional<std::filesystem::path>& data_dir() const noexcept { return data_dir_; }

 private:
  std::optional<std::filesystem::path> data_dir_;
  mutable std::shared_mutex mu_;
  std::map<std::string, std::shared_ptr<Table>, std::less<>> tables_;
};

void validate_schema(const TableSchema& schema);

// Canonical serialization of a full scan: used to compare tables across runs.
std::string table_image(const Table& table);

}  // namespace sentimill::store
