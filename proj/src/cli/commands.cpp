#include "sentimill/cli/commands.hpp"

#include <signal.h>

#include <atomic>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "sentimill/api/http_server.hpp"
#include "sentimill/cli/runtime.hpp"
#include "sentimill/common/error.hpp"
#include "sentimill/ingest/ingestion.hpp"
#include "sentimill/sentiment/sentiment_jobs.hpp"

namespace sentimill::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Globals {
  std::string config;
  std::string data_dir;
  bool json = false;
  std::string log_level = "info";
};

// Blocks SIGINT/SIGTERM for the calling thread and every thread it starts,
// so they can be received synchronously. Restores the old mask on exit.
class SignalScope {
 public:
  SignalScope() {
    sigemptyset(&set_);
    sigaddset(&set_, SIGINT);
    sigaddset(&set_, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set_, &old_);
  }
  ~SignalScope() {
    // Drop a signal that raced with shutdown before unblocking.
    timespec zero{0, 0};
    while (sigtimedwait(&set_, nullptr, &zero) > 0) {
    }
    pthread_sigmask(SIG_SETMASK, &old_, nullptr);
  }

  /// Waits until a signal arrives (true) or `done` holds (false).
  template <typename Done>
  bool wait(Done&& done) {
    timespec tick{0, 100'000'000};
    while (!done()) {
      if (sigtimedwait(&set_, nullptr, &tick) > 0) return true;
    }
    return false;
  }

 private:
  sigset_t set_;
  sigset_t old_;
};

std::string read_file(const fs::path& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("FileNotFound", std::string("cannot read ") + what + " " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json summary_json(const sentiment::SentimentSummary& s) {
  return {{"keyword", s.keyword},
          {"overall_mean", s.overall_mean},
          {"total_matches", s.total_matches},
          {"classification", sentiment::to_string(s.classification)}};
}

void print_error(const Error& e, const Globals& g, std::ostream& out, std::ostream& err) {
  if (g.json) out << json{{"status", "error"}, {"code", e.code()}, {"message", e.what()}}.dump() << '\n';
  err << "error: " << e.code() << ": " << e.what() << '\n';
}

// Picks base, base_2, base_3, ... whichever does not exist yet.
std::string free_table_name(const store::TableStore& store, const std::string& base) {
  if (!store.has_table(base)) return base;
  for (int i = 2;; ++i) {
    auto name = base + "_" + std::to_string(i);
    if (!store.has_table(name)) return name;
  }
}

orchestrator::JobRecord run_mr(Runtime& rt, mapreduce::JobSpec spec) {
  const auto job = rt.orchestrator().create_mr_job(std::move(spec), "cli");
  return rt.orchestrator().run_now(job.job_id);
}

Error job_error(const orchestrator::JobRecord& job) {
  return Error(job.error_code.value_or("JobFailed"), job.job_id + ": " + job.error_message.value_or("failed"));
}

void print_import_log(const ingest::ImportLog& log, const Globals& g, std::ostream& out) {
  if (g.json) {
    out << json(log).dump() << '\n';
    return;
  }
  out << log.source << ": read " << log.records_read << ", stored " << log.records_stored << ", rejected "
      << log.records_rejected << '\n';
  for (const auto& r : log.rejections) out << "  rejected " << r << '\n';
  for (const auto& n : log.notes) out << "  note: " << n << '\n';
}

}  // namespace

bool is_usage_error(const std::string& code) {
  static const std::set<std::string> kUsage{
      "BadConfig",       "InvalidSpec",      "FileNotFound",   "InvalidMapping", "MissingKeyColumn",
      "InvalidStopCondition", "InvalidBucket", "InvalidColumn", "InvalidSchema",  "UnknownLexicon",
      "UnknownStopwords", "BadRequest",      "UnknownChart",   "InvalidCorpus",
  };
  return kUsage.count(code) != 0;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err, const EnvLookup& env) {
  CLI::App app{"sentimill: column-family table store with MapReduce sentiment analytics"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "JSON config file");
  app.add_option("--data-dir", g.data_dir, "Data directory (overrides config and DATA_DIR)");
  app.add_flag("--json", g.json, "Machine-readable output");
  app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error, off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP service and job dispatcher until SIGINT/SIGTERM");
  std::string bind;
  std::string static_dir;
  serve->add_option("--bind", bind, "host:port (overrides config and BIND_ADDR)");
  serve->add_option("--static-dir", static_dir, "Dashboard assets to serve");

  // import-csv
  auto* import = app.add_subcommand("import-csv", "Import a CSV file into a table");
  std::string csv_file, csv_table, csv_key, csv_mapping_file;
  std::vector<std::string> csv_map;
  bool allow_rejects = false;
  std::uint32_t partitions = 1, replication = 3;
  import->add_option("file", csv_file, "CSV file")->required();
  import->add_option("--table", csv_table, "Target table")->required();
  import->add_option("--key", csv_key, "Header whose value becomes the row key")->required();
  auto* mapping_opt = import->add_option("--mapping", csv_mapping_file, "JSON file {\"header\": \"family:qualifier\"}");
  import->add_option("--map", csv_map, "header=family:qualifier (repeatable)")->excludes(mapping_opt);
  import->add_flag("--allow-rejects", allow_rejects, "Exit 0 even when lines were rejected");
  import->add_option("--partitions", partitions, "Partitions when the table is created")->check(CLI::Range(1, 1024));
  import->add_option("--replication", replication, "Replicas when the table is created")->check(CLI::Range(1, 16));

  // run-analysis
  auto* analysis = app.add_subcommand("run-analysis", "Run a MapReduce job synchronously");
  std::string algorithm, source, target, column = "content:text", keyword, lexicon, stopwords;
  std::size_t workers = 1;
  analysis->add_option("algorithm", algorithm, "wordcount, sentiment or filter")
      ->required()
      ->check(CLI::Validator(
          [](std::string& s) { return mapreduce::parse_algorithm(s) ? std::string() : "unknown algorithm '" + s + "'"; },
          "ALGORITHM"));
  analysis->add_option("--source", source, "Source table")->required();
  analysis->add_option("--target", target, "Target table (must not exist)")->required();
  analysis->add_option("--column", column, "Input column family:qualifier")->capture_default_str();
  analysis->add_option("--keyword", keyword, "FILTER keyword");
  analysis->add_option("--lexicon", lexicon, "Lexicon name");
  analysis->add_option("--stopwords", stopwords, "Stopword list name, or none");
  analysis->add_option("--workers", workers, "Worker threads")->check(CLI::Range(1, 64));

  // analyze-sentiment
  auto* analyze = app.add_subcommand("analyze-sentiment", "FILTER (optional) then SENTIMENT; prints the summary");
  std::string a_source, a_target, a_keyword, a_column = "content:text", a_lexicon, a_stopwords;
  std::size_t a_workers = 1;
  analyze->add_option("--source", a_source, "Source table")->required();
  analyze->add_option("--keyword", a_keyword, "Only rows containing this keyword");
  analyze->add_option("--target", a_target, "Per-word score table (default <source>_sentiment)");
  analyze->add_option("--column", a_column, "Input column")->capture_default_str();
  analyze->add_option("--lexicon", a_lexicon, "Lexicon name");
  analyze->add_option("--stopwords", a_stopwords, "Stopword list name, or none");
  analyze->add_option("--workers", a_workers, "Worker threads")->check(CLI::Range(1, 64));

  // export-chart
  auto* exporter = app.add_subcommand("export-chart", "Write chart data exactly as GET /charts/{kind} returns it");
  std::string chart_kind, chart_source, chart_out;
  std::vector<std::string> chart_params;
  exporter->add_option("kind", chart_kind, "charttable, bubble, circle_packing, bar, line")
      ->required()
      ->check(CLI::Validator(
          [](std::string& s) { return api::parse_chart_kind(s) ? std::string() : "unknown chart kind '" + s + "'"; },
          "KIND"));
  exporter->add_option("--source", chart_source, "Source table")->required();
  exporter->add_option("--param", chart_params, "name=value chart parameter (repeatable)");
  exporter->add_option("--out", chart_out, "Output file, - for standard output")->required();

  // ingest-stream
  auto* stream = app.add_subcommand("ingest-stream", "Capture simulated tweets into a table");
  std::string s_table, s_corpus;
  std::uint64_t s_seed = 1;
  double s_rate = 0.0;
  std::uint64_t s_count = 0;
  std::int64_t s_duration = 0;
  std::uint32_t s_partitions = 1, s_replication = 3;
  stream->add_option("--table", s_table, "Target table")->required();
  auto* count_opt = stream->add_option("--count", s_count, "Stop after this many stored records");
  auto* duration_opt = stream->add_option("--duration-ms", s_duration, "Stop after this much wall time");
  count_opt->excludes(duration_opt);
  stream->add_option("--seed", s_seed, "Simulator seed");
  stream->add_option("--rate", s_rate, "Records per second, 0 for unthrottled")->check(CLI::NonNegativeNumber);
  stream->add_option("--corpus", s_corpus, "JSON lines of {text, lang, country}; default built-in corpus");
  stream->add_option("--partitions", s_partitions, "Partitions when the table is created")->check(CLI::Range(1, 1024));
  stream->add_option("--replication", s_replication, "Replicas when the table is created")->check(CLI::Range(1, 16));

  // user-add
  auto* user_add = app.add_subcommand("user-add", "Create an account");
  std::string u_name, u_password, u_role = "USER";
  user_add->add_option("name", u_name, "Username")->required();
  user_add->add_option("--password", u_password, "Password")->required();
  user_add->add_option("--role", u_role, "USER or ADMINISTRATOR")->capture_default_str()->check(CLI::IsMember({"USER", "ADMINISTRATOR"}));

  // jobs
  auto* jobs = app.add_subcommand("jobs", "List jobs in the registry");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  auto logger = spdlog::get("sentimill");
  if (!logger) logger = spdlog::stderr_color_mt("sentimill");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(g.log_level));

  try {
    auto config = load_config(g.config.empty() ? std::nullopt : std::optional<fs::path>(g.config), env);
    if (!g.data_dir.empty()) config.data_dir = g.data_dir;
    if (!bind.empty()) config.bind_addr = bind;
    if (!static_dir.empty()) config.static_dir = static_dir;

    if (*serve) {
      const auto addr = parse_bind_address(config.bind_addr);
      SignalScope signals;  // before any thread starts
      Runtime rt(config);
      api::HttpServer server(rt.service(), {addr.host, addr.port, config.static_dir, 8});
      const int port = server.start();
      rt.orchestrator().start();
      spdlog::info("serving {} on {}:{}", config.data_dir.string(), addr.host, port);
      if (g.json) {
        out << json{{"status", "ok"}, {"host", addr.host}, {"port", port}}.dump() << std::endl;
      } else {
        out << "listening on http://" << addr.host << ":" << port << std::endl;
      }
      signals.wait([] { return false; });
      spdlog::info("shutting down");
      server.stop();
      rt.orchestrator().stop();
      return kExitOk;
    }

    if (*import) {
      Runtime rt(config);
      ingest::CsvImportSpec spec;
      spec.path = csv_file;
      spec.key_column = csv_key;
      spec.target_table = csv_table;
      spec.layout = {partitions, replication};
      if (!csv_mapping_file.empty()) {
        json doc;
        try {
          doc = json::parse(read_file(csv_mapping_file, "mapping file"));
        } catch (const json::parse_error& e) {
          throw Error("InvalidMapping", csv_mapping_file + ": " + e.what());
        }
        spec.mapping = ingest::parse_column_mapping(doc);
      } else {
        json doc = json::object();
        for (const auto& m : csv_map) {
          const auto eq = m.find('=');
          if (eq == std::string::npos) throw Error("InvalidMapping", "--map expects header=family:qualifier, got '" + m + "'");
          doc[m.substr(0, eq)] = m.substr(eq + 1);
        }
        spec.mapping = ingest::parse_column_mapping(doc);
      }
      const auto log = ingest::import_csv(rt.store(), spec, "cli-import");
      print_import_log(log, g, out);
      return log.records_rejected == 0 || allow_rejects ? kExitOk : kExitFailure;
    }

    if (*analysis) {
      Runtime rt(config);
      mapreduce::JobSpec spec;
      spec.algorithm = *mapreduce::parse_algorithm(algorithm);
      spec.source_table = source;
      spec.target_table = target;
      spec.params["column"] = column;
      if (!keyword.empty()) spec.params["keyword"] = keyword;
      if (!lexicon.empty()) spec.params["lexicon"] = lexicon;
      if (!stopwords.empty()) spec.params["stopwords"] = stopwords;
      spec.worker_count = workers;
      const auto job = run_mr(rt, spec);
      if (job.status != orchestrator::JobStatus::kSuccess) {
        print_error(job_error(job), g, out, err);
        return kExitFailure;
      }
      if (g.json) {
        out << json(job).dump() << '\n';
        return kExitOk;
      }
      const auto& r = *job.result;
      out << job.job_id << " " << mapreduce::to_string(spec.algorithm) << " " << source << " -> " << target
          << ": read " << r.rows_read << " rows, emitted " << r.pairs_emitted << " pairs, wrote " << r.rows_written
          << " rows in " << r.duration_ms << " ms\n";
      const auto table = rt.store().table(target);
      if (spec.algorithm == mapreduce::Algorithm::kWordCount) {
        auto counts = sentiment::read_word_counts(*table);
        std::stable_sort(counts.begin(), counts.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
        for (std::size_t i = 0; i < counts.size() && i < 20; ++i) {
          out << "  " << counts[i].first << "\t" << counts[i].second << '\n';
        }
      } else if (spec.algorithm == mapreduce::Algorithm::kSentiment) {
        const auto s = sentiment::aggregate_sentiment(sentiment::read_word_scores(*table), "");
        out << "  overall mean " << sentiment::format_score_6(s.overall_mean) << " over " << s.total_matches
            << " matches: " << sentiment::to_string(s.classification) << '\n';
      }
      return kExitOk;
    }

    if (*analyze) {
      Runtime rt(config);
      std::string input = a_source;
      std::map<std::string, std::string> params{{"column", a_column}};
      if (!a_lexicon.empty()) params["lexicon"] = a_lexicon;
      if (!a_stopwords.empty()) params["stopwords"] = a_stopwords;
      if (!a_keyword.empty()) {
        mapreduce::JobSpec filter{"", mapreduce::Algorithm::kFilter, a_source,
                                  free_table_name(rt.store(), a_source + "_filtered"),
                                  {{"column", a_column}, {"keyword", a_keyword}}, a_workers};
        const auto job = run_mr(rt, filter);
        if (job.status != orchestrator::JobStatus::kSuccess) {
          print_error(job_error(job), g, out, err);
          return kExitFailure;
        }
        input = filter.target_table;
      }
      const auto scores = a_target.empty() ? free_table_name(rt.store(), a_source + "_sentiment") : a_target;
      const auto job = run_mr(rt, {"", mapreduce::Algorithm::kSentiment, input, scores, params, a_workers});
      if (job.status != orchestrator::JobStatus::kSuccess) {
        print_error(job_error(job), g, out, err);
        return kExitFailure;
      }
      const auto summary =
          sentiment::aggregate_sentiment(sentiment::read_word_scores(*rt.store().table(scores)), a_keyword);
      if (g.json) {
        out << summary_json(summary).dump() << '\n';
      } else {
        out << (a_keyword.empty() ? a_source : a_keyword) << ": " << sentiment::to_string(summary.classification)
            << " (mean " << sentiment::format_score_6(summary.overall_mean) << " over " << summary.total_matches
            << " matches; per-word scores in " << scores << ")\n";
      }
      return kExitOk;
    }

    if (*exporter) {
      Runtime rt(config);
      std::map<std::string, std::string> params;
      for (const auto& p : chart_params) {
        const auto eq = p.find('=');
        if (eq == std::string::npos) throw Error("InvalidSpec", "--param expects name=value, got '" + p + "'");
        params[p.substr(0, eq)] = p.substr(eq + 1);
      }
      params["source"] = chart_source;
      const auto response = rt.service().chart(*api::parse_chart_kind(chart_kind), params);
      if (response.http_status != 200) {
        const Error e(response.body["code"].get<std::string>(), response.body["message"].get<std::string>());
        print_error(e, g, out, err);
        return is_usage_error(e.code()) ? kExitUsage : kExitFailure;
      }
      const auto text = response.text();
      if (chart_out == "-") {
        out << text;
      } else {
        std::ofstream file(chart_out, std::ios::binary | std::ios::trunc);
        file << text;
        if (!file) throw Error("IoError", "cannot write " + chart_out);
        if (!g.json) out << "wrote " << text.size() << " bytes to " << chart_out << '\n';
      }
      return kExitOk;
    }

    if (*stream) {
      if (s_count == 0 && s_duration == 0) throw Error("InvalidStopCondition", "give --count or --duration-ms");
      SignalScope signals;
      Runtime rt(config);
      ingest::SimulatedStreamOptions options;
      options.seed = s_seed;
      options.rate = s_rate;
      options.corpus = s_corpus.empty() ? ingest::demo_corpus() : ingest::load_corpus(s_corpus);
      ingest::SimulatedStream source(options);
      ingest::StreamIngestSpec spec;
      spec.target_table = s_table;
      spec.stop = s_count > 0 ? ingest::StopCondition::record_count(s_count)
                              : ingest::StopCondition::duration(std::chrono::milliseconds(s_duration));
      spec.layout = {s_partitions, s_replication};
      std::stop_source cancel;
      std::atomic<bool> done{false};
      ingest::ImportLog log;
      std::exception_ptr failure;
      std::jthread worker([&] {
        try {
          log = ingest::stream_ingest(rt.store(), source, spec, "cli-stream", system_clock(), cancel.get_token());
        } catch (...) {
          failure = std::current_exception();
        }
        done = true;
      });
      if (signals.wait([&] { return done.load(); })) {
        spdlog::info("interrupted, stopping capture");
        cancel.request_stop();
      }
      worker.join();
      if (failure) std::rethrow_exception(failure);
      print_import_log(log, g, out);
      return kExitOk;
    }

    if (*user_add) {
      Runtime rt(config);
      const auto user = rt.users().create_user(u_name, u_password, *api::parse_role(u_role));
      if (g.json) {
        out << json{{"username", user.username}, {"role", api::to_string(user.role)}}.dump() << '\n';
      } else {
        out << "created " << api::to_string(user.role) << " " << user.username << '\n';
      }
      return kExitOk;
    }

    if (*jobs) {
      Runtime rt(config);
      const auto list = rt.orchestrator().list();
      if (g.json) {
        out << json(list).dump() << '\n';
      } else {
        for (const auto& j : list) {
          out << j.job_id << '\t' << orchestrator::to_string(j.kind) << '\t' << orchestrator::to_string(j.status)
              << '\t' << j.owner << (j.error_code ? "\t" + *j.error_code : "") << '\n';
        }
      }
      return kExitOk;
    }
  } catch (const Error& e) {
    print_error(e, g, out, err);
    return is_usage_error(e.code()) ? kExitUsage : kExitFailure;
  } catch (const std::exception& e) {
    print_error(Error("Internal", e.what()), g, out, err);
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace sentimill::cli
