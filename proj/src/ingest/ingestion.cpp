#include "sentimill/ingest/ingestion.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "sentimill/common/error.hpp"
#include "sentimill/common/timefmt.hpp"
#include "sentimill/text/text_pipeline.hpp"

namespace sentimill::ingest {
namespace {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("FileNotFound", "cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// --- CSV record parser --------------------------------------------------------

struct CsvCursor {
  std::string_view s;
  std::size_t pos = 0;
  std::size_t line = 1;  // line of s[pos]

  bool at_end() const { return pos >= s.size(); }
  bool at_newline() const {
    return pos < s.size() && (s[pos] == '\n' || (s[pos] == '\r' && pos + 1 < s.size() && s[pos + 1] == '\n'));
  }
  void consume_newline() {
    pos += s[pos] == '\r' ? 2 : 1;
    ++line;
  }
  // Moves past the end of the physical line containing pos.
  void skip_line() {
    while (!at_end() && !at_newline()) ++pos;
    if (!at_end()) consume_newline();
  }
};

struct ParsedRecord {
  enum class Kind { kRecord, kBlank, kMalformed, kEnd } kind = Kind::kEnd;
  std::vector<std::string> fields;
  std::size_t line = 0;
  std::string error;
};

ParsedRecord next_record(CsvCursor& c) {
  ParsedRecord rec;
  rec.line = c.line;
  if (c.at_end()) return rec;
  if (c.at_newline()) {
    c.consume_newline();
    rec.kind = ParsedRecord::Kind::kBlank;
    return rec;
  }
  const std::size_t record_start = c.pos;
  auto malformed = [&](std::string why) {
    rec.kind = ParsedRecord::Kind::kMalformed;
    rec.error = std::move(why);
    rec.fields.clear();
    return rec;
  };

  while (true) {
    std::string field;
    if (!c.at_end() && c.s[c.pos] == '"') {
      ++c.pos;
      bool closed = false;
      while (!c.at_end()) {
        const char ch = c.s[c.pos];
        if (ch == '"') {
          if (c.pos + 1 < c.s.size() && c.s[c.pos + 1] == '"') {
            field += '"';
            c.pos += 2;
            continue;
          }
          ++c.pos;
          closed = true;
          break;
        }
        if (ch == '\n') ++c.line;
        field += ch;
        ++c.pos;
      }
      if (!closed) {
        // Restart right after the line the record began on.
        c.pos = record_start;
        c.line = rec.line;
        c.skip_line();
        return malformed("unterminated quoted field");
      }
      if (!c.at_end() && c.s[c.pos] != ',' && !c.at_newline()) {
        c.skip_line();
        return malformed("unexpected character after closing quote");
      }
    } else {
      while (!c.at_end() && c.s[c.pos] != ',' && !c.at_newline()) {
        if (c.s[c.pos] == '"') {
          c.skip_line();
          return malformed("quote inside unquoted field");
        }
        field += c.s[c.pos++];
      }
    }
    rec.fields.push_back(std::move(field));
    if (!c.at_end() && c.s[c.pos] == ',') {
      ++c.pos;
      continue;
    }
    if (!c.at_end()) c.consume_newline();
    break;
  }
  rec.kind = ParsedRecord::Kind::kRecord;
  return rec;
}

std::string line_prefix(std::size_t line) { return "line " + std::to_string(line) + ": "; }

// --- Tweets ------------------------------------------------------------------

std::optional<std::string> optional_string(const json& obj, const char* name) {
  auto it = obj.find(name);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw Error("MalformedRecord", std::string("field '") + name + "' must be a string");
  return it->get<std::string>();
}

std::string required_string(const json& obj, const char* name) {
  auto v = optional_string(obj, name);
  if (!v) throw Error("MalformedRecord", std::string("missing field '") + name + "'");
  return *v;
}

}  // namespace

// --- ImportLog -----------------------------------------------------------------

void ImportLog::reject(std::string reason) {
  ++records_read;
  ++records_rejected;
  if (rejections.size() < kMaxRejections) rejections.push_back(std::move(reason));
}

void to_json(json& j, const ImportLog& log) {
  j = json{{"job_id", log.job_id},
           {"source", log.source},
           {"records_read", log.records_read},
           {"records_stored", log.records_stored},
           {"records_rejected", log.records_rejected},
           {"started_at", format_iso8601(log.started_at)},
           {"finished_at", format_iso8601(log.finished_at)},
           {"started_at_ms", log.started_at},
           {"finished_at_ms", log.finished_at},
           {"rejections", log.rejections},
           {"notes", log.notes}};
}

void from_json(const json& j, ImportLog& log) {
  j.at("job_id").get_to(log.job_id);
  j.at("source").get_to(log.source);
  j.at("records_read").get_to(log.records_read);
  j.at("records_stored").get_to(log.records_stored);
  j.at("records_rejected").get_to(log.records_rejected);
  j.at("started_at_ms").get_to(log.started_at);
  j.at("finished_at_ms").get_to(log.finished_at);
  j.at("rejections").get_to(log.rejections);
  j.at("notes").get_to(log.notes);
}

// --- StopCondition ---------------------------------------------------------------

StopCondition StopCondition::duration(std::chrono::milliseconds span) {
  if (span.count() < 0) throw Error("InvalidStopCondition", "duration must not be negative");
  return StopCondition(span);
}

StopCondition StopCondition::record_count(std::uint64_t n) {
  if (n == 0) throw Error("InvalidStopCondition", "record_count must be positive");
  return StopCondition(n);
}

void to_json(json& j, const StopCondition& stop) {
  if (stop.is_duration()) j = json{{"duration_ms", stop.duration_value().count()}};
  else j = json{{"record_count", stop.record_count_value()}};
}

StopCondition stop_condition_from_json(const json& j) {
  if (!j.is_object() || j.size() != 1) {
    throw Error("InvalidStopCondition", "expected exactly one of duration_ms or record_count");
  }
  if (auto it = j.find("duration_ms"); it != j.end()) {
    if (!it->is_number_integer()) throw Error("InvalidStopCondition", "duration_ms must be an integer");
    return StopCondition::duration(std::chrono::milliseconds(it->get<std::int64_t>()));
  }
  if (auto it = j.find("record_count"); it != j.end()) {
    if (!it->is_number_integer() || it->get<std::int64_t>() <= 0) {
      throw Error("InvalidStopCondition", "record_count must be a positive integer");
    }
    return StopCondition::record_count(it->get<std::uint64_t>());
  }
  throw Error("InvalidStopCondition", "expected exactly one of duration_ms or record_count");
}

// --- CSV import ------------------------------------------------------------------

std::map<std::string, store::ColumnRef> parse_column_mapping(const json& j) {
  if (!j.is_object() || j.empty()) throw Error("InvalidMapping", "mapping must be a non-empty object");
  std::map<std::string, store::ColumnRef> out;
  for (const auto& [header, target] : j.items()) {
    if (!target.is_string()) throw Error("InvalidMapping", "mapping for '" + header + "' must be \"family:qualifier\"");
    try {
      out[header] = store::ColumnRef::parse(target.get<std::string>());
    } catch (const Error& e) {
      throw Error("InvalidMapping", "mapping for '" + header + "': " + e.what());
    }
  }
  return out;
}

json column_mapping_json(const std::map<std::string, store::ColumnRef>& mapping) {
  json j = json::object();
  for (const auto& [header, column] : mapping) j[header] = column.str();
  return j;
}

ImportLog import_csv(store::TableStore& store, const CsvImportSpec& spec, std::string job_id, const Clock& clock) {
  ImportLog log;
  log.job_id = std::move(job_id);
  log.source = "csv:" + spec.path.string();
  log.started_at = clock();

  if (spec.mapping.empty()) throw Error("InvalidMapping", "column mapping is empty");
  const std::string contents = read_file(spec.path);
  CsvCursor cursor{contents};
  if (contents.starts_with("\xEF\xBB\xBF")) cursor.pos = 3;

  auto header = next_record(cursor);
  if (header.kind != ParsedRecord::Kind::kRecord ||
      std::all_of(header.fields.begin(), header.fields.end(), [](const auto& f) { return f.empty(); })) {
    throw Error("EmptyHeader", "'" + spec.path.string() + "' has no header line");
  }
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < header.fields.size(); ++i) index.emplace(header.fields[i], i);
  auto key_it = index.find(spec.key_column);
  if (key_it == index.end()) {
    throw Error("MissingKeyColumn", "key column '" + spec.key_column + "' is not in the header");
  }
  std::vector<std::pair<std::size_t, const store::ColumnRef*>> mapped;
  std::set<std::string> families;
  for (const auto& [name, column] : spec.mapping) {
    auto it = index.find(name);
    if (it == index.end()) throw Error("InvalidMapping", "mapped column '" + name + "' is not in the header");
    mapped.emplace_back(it->second, &column);
    families.insert(column.family);
  }

  auto table = store.find_table(spec.target_table);
  if (!table) {
    table = store.create_table(
        {spec.target_table, families, spec.layout.num_partitions, spec.layout.replication_factor});
  } else {
    for (const auto& f : families) {
      if (table->schema().families.count(f) == 0) {
        throw Error("InvalidMapping", "table '" + spec.target_table + "' has no column family '" + f + "'");
      }
    }
  }

  std::vector<store::CellWrite> cells;
  while (true) {
    auto rec = next_record(cursor);
    if (rec.kind == ParsedRecord::Kind::kEnd) break;
    if (rec.kind == ParsedRecord::Kind::kBlank) continue;
    if (rec.kind == ParsedRecord::Kind::kMalformed) {
      log.reject(line_prefix(rec.line) + rec.error);
      continue;
    }
    if (rec.fields.size() != header.fields.size()) {
      log.reject(line_prefix(rec.line) + "expected " + std::to_string(header.fields.size()) + " fields, got " +
                 std::to_string(rec.fields.size()));
      continue;
    }
    if (std::any_of(rec.fields.begin(), rec.fields.end(), [](const auto& f) { return !text::is_valid_utf8(f); })) {
      log.reject(line_prefix(rec.line) + "invalid UTF-8");
      continue;
    }
    const std::string& key = rec.fields[key_it->second];
    if (key.empty()) {
      log.reject(line_prefix(rec.line) + "empty key");
      continue;
    }
    cells.clear();
    for (const auto& [i, column] : mapped) cells.push_back({column->family, column->qualifier, rec.fields[i], {}});
    table->put_row(key, cells);
    ++log.records_read;
    ++log.records_stored;
  }
  log.finished_at = clock();
  return log;
}

// --- Tweets ----------------------------------------------------------------------------

TweetRecord parse_tweet_json(std::string_view line) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::exception& e) {
    throw Error("MalformedRecord", std::string("not valid JSON: ") + e.what());
  }
  if (!obj.is_object()) throw Error("MalformedRecord", "record is not a JSON object");

  TweetRecord t;
  auto id = obj.find("id");
  if (id == obj.end()) throw Error("MalformedRecord", "missing field 'id'");
  if (id->is_string()) t.id = id->get<std::string>();
  else if (id->is_number_unsigned() || id->is_number_integer()) t.id = id->dump();
  else throw Error("MalformedRecord", "field 'id' must be a string");
  if (t.id.empty()) throw Error("MalformedRecord", "field 'id' is empty");

  const auto created = required_string(obj, "created_at");
  auto when = parse_timestamp(created);
  if (!when) throw Error("MalformedRecord", "unparsable created_at '" + created + "'");
  if (*when < 0) throw Error("MalformedRecord", "created_at before 1970");
  t.created_at = *when;

  t.user = required_string(obj, "user");
  t.text = required_string(obj, "text");
  t.lang = optional_string(obj, "lang");
  if (auto place = obj.find("place"); place != obj.end() && !place->is_null()) {
    if (!place->is_object()) throw Error("MalformedRecord", "field 'place' must be an object");
    t.country = optional_string(*place, "country");
  }
  std::set<std::string> seen;
  for (auto& tok : text::tokenize(t.text)) {
    if (tok.kind == text::TokenKind::kHashtag && seen.insert(tok.text).second) t.hashtags.push_back(tok.text);
  }
  return t;
}

std::string tweet_row_key(const TweetRecord& tweet) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%013" PRId64 ":", tweet.created_at);
  return buf + tweet.id;
}

std::vector<store::CellWrite> tweet_cells(const TweetRecord& tweet) {
  const std::string content(kContentFamily), meta(kMetaFamily);
  std::vector<store::CellWrite> cells{
      {content, "text", tweet.text, tweet.created_at},
      {meta, "id", tweet.id, tweet.created_at},
      {meta, "user", tweet.user, tweet.created_at},
      {meta, "created_at", format_iso8601(tweet.created_at), tweet.created_at},
  };
  if (tweet.lang) cells.push_back({meta, "lang", *tweet.lang, tweet.created_at});
  if (tweet.country) cells.push_back({meta, "country", *tweet.country, tweet.created_at});
  if (!tweet.hashtags.empty()) {
    std::string joined;
    for (const auto& h : tweet.hashtags) joined += (joined.empty() ? "" : " ") + h;
    cells.push_back({meta, "hashtags", joined, tweet.created_at});
  }
  return cells;
}

SimulatedStream::SimulatedStream(SimulatedStreamOptions options)
    : options_(std::move(options)), rng_(options_.seed), last_ms_(options_.start_ms),
      next_due_(std::chrono::steady_clock::now()) {
  if (options_.corpus.empty()) throw Error("EmptyCorpus", "simulated stream needs at least one template");
  if (options_.max_gap_ms < 1) options_.max_gap_ms = 1;
}

std::optional<std::string> SimulatedStream::next() {
  if (options_.max_records && emitted_ >= *options_.max_records) return std::nullopt;
  const auto& tpl = options_.corpus[rng_() % options_.corpus.size()];
  if (emitted_ > 0) last_ms_ += 1 + static_cast<Millis>(rng_() % static_cast<std::uint64_t>(options_.max_gap_ms));
  json j{{"id", std::to_string(options_.seed) + "-" + std::to_string(emitted_)},
         {"created_at", format_iso8601(last_ms_)},
         {"user", "user" + std::to_string(rng_() % 5000)},
         {"text", tpl.text}};
  if (tpl.lang) j["lang"] = *tpl.lang;
  if (tpl.country) j["place"] = json{{"country", *tpl.country}};
  ++emitted_;

  if (options_.rate > 0.0 && std::isfinite(options_.rate)) {
    std::this_thread::sleep_until(next_due_);
    next_due_ += std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(1.0 / options_.rate));
  }
  return j.dump();
}

std::string SimulatedStream::describe() const {
  return "simulated:seed=" + std::to_string(options_.seed) + ",templates=" + std::to_string(options_.corpus.size());
}

VectorSource::VectorSource(std::vector<std::string> lines, std::string name)
    : lines_(std::move(lines)), name_(std::move(name)) {}

std::optional<std::string> VectorSource::next() {
  if (pos_ >= lines_.size()) return std::nullopt;
  return lines_[pos_++];
}

std::vector<TweetTemplate> demo_corpus() {
  return {
      {"What a superb match tonight, the keeper was brilliant #worldcup", "en", "DE"},
      {"Terrible refereeing again, what a disaster #worldcup", "en", "GB"},
      {"I love my new Eisbox fridge, quiet and reliable", "en", "DE"},
      {"The Eisbox is noisy and overpriced, really disappointed", "en", "AT"},
      {"Great goal! Fantastic teamwork #football", "en", "BR"},
      {"Boring first half, slow and sloppy passing", "en", "FR"},
      {"Happy with the service, fast delivery and friendly staff", "en", "NL"},
      {"Worst customer support ever, useless and rude", "en", "US"},
      {"Red cars look stunning this year", "en", "IT"},
      {"That blue paint job is ugly and cheap", "en", "ES"},
      {"Proud of our team, incredible victory @coach", "en", "AR"},
      {"Sad defeat, we lost badly :(", "en", "AR"},
      {"The debate was interesting but a bit confusing", "en", "US"},
      {"Honest answers, strong arguments, well done", "en", "GB"},
      {"Another broken promise, what a shameful scandal", "en", "FR"},
      {"Nice weather for the final https://example.org/live", "en", "DE"},
  };
}

std::vector<TweetTemplate> load_corpus(const std::filesystem::path& path) {
  const std::string contents = read_file(path);
  std::vector<TweetTemplate> out;
  std::istringstream in(contents);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      auto j = json::parse(line);
      if (!j.is_object()) throw Error("InvalidCorpus", "not an object");
      TweetTemplate t;
      t.text = required_string(j, "text");
      t.lang = optional_string(j, "lang");
      t.country = optional_string(j, "country");
      out.push_back(std::move(t));
    } catch (const std::exception& e) {
      throw Error("InvalidCorpus", path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

ImportLog stream_ingest(store::TableStore& store, TweetSource& source, const StreamIngestSpec& spec,
                        std::string job_id, const Clock& clock, std::stop_token cancel) {
  ImportLog log;
  log.job_id = std::move(job_id);
  log.source = source.describe();
  log.started_at = clock();

  auto table = store.find_table(spec.target_table);
  if (!table) {
    table = store.create_table({spec.target_table,
                                {std::string(kContentFamily), std::string(kMetaFamily)},
                                spec.layout.num_partitions,
                                spec.layout.replication_factor});
  }

  auto satisfied = [&] {
    if (spec.stop.is_duration()) return clock() - log.started_at >= spec.stop.duration_value().count();
    return log.records_stored >= spec.stop.record_count_value();
  };

  while (true) {
    if (cancel.stop_requested()) {
      log.notes.push_back("cancelled");
      break;
    }
    auto line = source.next();
    if (!line) {
      log.notes.push_back("source ended early");
      break;
    }
    try {
      const auto tweet = parse_tweet_json(*line);
      table->put_row(tweet_row_key(tweet), tweet_cells(tweet));
      ++log.records_read;
      ++log.records_stored;
    } catch (const Error& e) {
      if (e.code() != "MalformedRecord") throw;
      log.reject("record " + std::to_string(log.records_read + 1) + ": " + e.what());
    }
    if (satisfied()) break;
  }
  log.finished_at = clock();
  return log;
}

}  // namespace sentimill::ingest
