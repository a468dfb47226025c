#include "record_log.hpp"

#include <fstream>
#include <iterator>
#include <optional>

#include "sentimill/common/error.hpp"

namespace sentimill::store::detail {
namespace {

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>((v >> 24) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>(v & 0xff));
}

void put_i64(std::string& out, std::int64_t v) {
  const auto u = static_cast<std::uint64_t>(v);
  for (int shift = 56; shift >= 0; shift -= 8) out.push_back(static_cast<char>((u >> shift) & 0xff));
}

void put_str(std::string& out, std::string_view s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  bool empty() const { return pos_ >= data_.size(); }

  std::optional<std::uint32_t> u32() {
    if (data_.size() - pos_ < 4) return std::nullopt;
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | static_cast<unsigned char>(data_[pos_++]);
    return v;
  }

  std::optional<std::int64_t> i64() {
    if (data_.size() - pos_ < 8) return std::nullopt;
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | static_cast<unsigned char>(data_[pos_++]);
    return static_cast<std::int64_t>(v);
  }

  std::optional<std::uint8_t> u8() {
    if (empty()) return std::nullopt;
    return static_cast<std::uint8_t>(data_[pos_++]);
  }

  std::optional<std::string_view> bytes(std::size_t n) {
    if (data_.size() - pos_ < n) return std::nullopt;
    auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  std::optional<std::string> str() {
    auto n = u32();
    if (!n) return std::nullopt;
    auto b = bytes(*n);
    if (!b) return std::nullopt;
    return std::string(*b);
  }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

std::optional<LogRecord> decode_payload(std::string_view payload) {
  Reader r(payload);
  auto op = r.u8();
  if (!op) return std::nullopt;
  LogRecord rec;
  auto key = r.str();
  if (!key) return std::nullopt;
  rec.row_key = std::move(*key);
  if (*op == static_cast<std::uint8_t>(RecordOp::kDeleteRow)) {
    rec.op = RecordOp::kDeleteRow;
  } else if (*op == static_cast<std::uint8_t>(RecordOp::kPut)) {
    rec.op = RecordOp::kPut;
    auto family = r.str();
    auto qualifier = r.str();
    auto ts = r.i64();
    auto value = r.str();
    if (!family || !qualifier || !ts || !value) return std::nullopt;
    rec.family = std::move(*family);
    rec.qualifier = std::move(*qualifier);
    rec.timestamp = *ts;
    rec.value = std::move(*value);
  } else {
    return std::nullopt;
  }
  if (!r.empty()) return std::nullopt;
  return rec;
}

}  // namespace

std::string encode_record(const LogRecord& record) {
  std::string payload;
  payload.push_back(static_cast<char>(record.op));
  put_str(payload, record.row_key);
  if (record.op == RecordOp::kPut) {
    put_str(payload, record.family);
    put_str(payload, record.qualifier);
    put_i64(payload, record.timestamp);
    put_str(payload, record.value);
  }
  std::string framed;
  framed.reserve(payload.size() + 4);
  put_u32(framed, static_cast<std::uint32_t>(payload.size()));
  framed += payload;
  return framed;
}

std::vector<LogRecord> read_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(data);
  std::vector<LogRecord> out;
  while (!r.empty()) {
    auto len = r.u32();
    if (!len) break;
    auto payload = r.bytes(*len);
    if (!payload) break;
    auto rec = decode_payload(*payload);
    if (!rec) throw Error("CorruptLog", "corrupt record in " + path.string());
    out.push_back(std::move(*rec));
  }
  return out;
}

LogWriter::LogWriter(const std::filesystem::path& path) : path_(path) {
  file_ = std::fopen(path.c_str(), "ab");
  if (file_ == nullptr) throw Error("IoError", "cannot open log " + path.string());
}

LogWriter::~LogWriter() {
  if (file_ != nullptr) std::fclose(file_);
}

void LogWriter::append(std::string_view framed) {
  if (std::fwrite(framed.data(), 1, framed.size(), file_) != framed.size() || std::fflush(file_) != 0) {
    throw Error("IoError", "write failed on " + path_.string());
  }
}

}  // namespace sentimill::store::detail
