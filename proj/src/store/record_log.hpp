#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "sentimill/store/table_store.hpp"

namespace sentimill::store::detail {

// Replica log framing: each record is a 4-byte big-endian payload length
// followed by the payload. Payload layout:
//   u8 op | str row_key                                  (op = 2, delete row)
//   u8 op | str row_key | str family | str qualifier
//         | i64 timestamp | str value                    (op = 1, put)
// where str = u32 big-endian length + bytes and i64 is big-endian two's
// complement.
enum class RecordOp : std::uint8_t { kPut = 1, kDeleteRow = 2 };

struct LogRecord {
  RecordOp op = RecordOp::kPut;
  std::string row_key;
  std::string family;
  std::string qualifier;
  Timestamp timestamp = 0;
  std::string value;
};

std::string encode_record(const LogRecord& record);

// Reads all complete records. A truncated tail (torn write) is ignored.
std::vector<LogRecord> read_log(const std::filesystem::path& path);

class LogWriter {
 public:
  explicit LogWriter(const std::filesystem::path& path);
  ~LogWriter();
  LogWriter(const LogWriter&) = delete;
  LogWriter& operator=(const LogWriter&) = delete;

  void append(std::string_view framed);

 private:
  std::FILE* file_ = nullptr;
  std::filesystem::path path_;
};

}  // namespace sentimill::store::detail
