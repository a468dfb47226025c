#include <gtest/gtest.h>

#include "../support/state_machine_fuzz.hpp"
#include "../support/temp_dir.hpp"
#include "sentimill/common/error.hpp"
#include "sentimill/orchestrator/orchestrator.hpp"
#include "sentimill/sentiment/sentiment_jobs.hpp"

using namespace sentimill;
using namespace sentimill::orchestrator;
using nlohmann::json;
using oracle::TempDir;

namespace {

template <typename Fn>
std::string error_code(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

std::vector<JobStatus> statuses(const JobRecord& job) {
  std::vector<JobStatus> out;
  for (const auto& h : job.history) out.push_back(h.status);
  return out;
}

class OrchestratorTest : public ::testing::Test {
 protected:
  OrchestratorTest() : engine_(store_, sentiment::builtin_plans(resources())) {
    store_.create_table({"src", {"content"}});
    store_.put("src", "r1", "content", "text", "a b a");
    csv_ = dir_.write("in.csv", "id,text\n1,hello\n2,world\n3,again\n");
  }

  static std::shared_ptr<sentiment::Resources> resources() {
    auto r = std::make_shared<sentiment::Resources>();
    r->lexicons["default"] = std::make_shared<sentiment::Lexicon>(
        std::map<std::string, double>{{"good", 0.5}}, std::map<std::string, double>{{"bad", -0.5}});
    return r;
  }

  Orchestrator::Options options(std::optional<std::filesystem::path> registry = std::nullopt) {
    Orchestrator::Options o;
    o.clock = [this] { return now_; };
    o.registry_path = std::move(registry);
    return o;
  }

  DataJobSpec csv_job(std::string target = "imported") {
    DataJobSpec spec;
    spec.source = CsvSource{csv_, {{"text", {"content", "text"}}}, "id"};
    spec.target_table = std::move(target);
    return spec;
  }

  DataJobSpec stream_job(std::uint64_t count, std::string target = "tweets") {
    DataJobSpec spec;
    spec.source = StreamSource{7, 0.0, std::nullopt, 100};
    spec.target_table = std::move(target);
    spec.stop = ingest::StopCondition::record_count(count);
    return spec;
  }

  static mapreduce::JobSpec wordcount(std::string source = "src", std::string target = "counts") {
    return {"", mapreduce::Algorithm::kWordCount, std::move(source), std::move(target), {{"column", "content:text"}}, 2};
  }

  TempDir dir_;
  std::filesystem::path csv_;
  Millis now_ = 1000;
  store::TableStore store_;
  mapreduce::Engine engine_;
};

}  // namespace

TEST(JobStatusNames, RoundTrip) {
  for (auto s : {JobStatus::kJobGenerated, JobStatus::kWaiting, JobStatus::kRunning, JobStatus::kSuccess,
                 JobStatus::kError}) {
    EXPECT_EQ(parse_status(to_string(s)), s);
  }
  EXPECT_EQ(to_string(JobStatus::kJobGenerated), "JOB_GENERATED");
  EXPECT_FALSE(parse_status("DONE"));
  EXPECT_EQ(parse_kind("MAPREDUCE"), JobKind::kMapReduce);
}

TEST(Transitions, ExactlyTheTwoLegalPaths) {
  const std::vector<JobStatus> all{JobStatus::kJobGenerated, JobStatus::kWaiting, JobStatus::kRunning,
                                   JobStatus::kSuccess, JobStatus::kError};
  std::set<std::tuple<JobKind, JobStatus, JobStatus>> legal{
      {JobKind::kData, JobStatus::kJobGenerated, JobStatus::kWaiting},
      {JobKind::kData, JobStatus::kWaiting, JobStatus::kRunning},
      {JobKind::kData, JobStatus::kRunning, JobStatus::kSuccess},
      {JobKind::kData, JobStatus::kRunning, JobStatus::kError},
      {JobKind::kMapReduce, JobStatus::kJobGenerated, JobStatus::kRunning},
      {JobKind::kMapReduce, JobStatus::kRunning, JobStatus::kSuccess},
      {JobKind::kMapReduce, JobStatus::kRunning, JobStatus::kError},
  };
  for (auto kind : {JobKind::kData, JobKind::kMapReduce}) {
    for (auto from : all) {
      for (auto to : all) {
        EXPECT_EQ(legal_transition(kind, from, to), legal.count({kind, from, to}) == 1)
            << to_string(kind) << " " << to_string(from) << "->" << to_string(to);
      }
    }
  }
  const std::vector<StatusChange> data{{JobStatus::kJobGenerated, 0}, {JobStatus::kWaiting, 1}, {JobStatus::kRunning, 2}};
  EXPECT_TRUE(legal_history(JobKind::kData, data));
  EXPECT_FALSE(legal_history(JobKind::kMapReduce, data));
  EXPECT_FALSE(legal_history(JobKind::kData, {}));
}

TEST_F(OrchestratorTest, CreateListDelete) {
  Orchestrator orch(store_, engine_, options());
  auto job = orch.create_data_job(csv_job(), "admin");
  EXPECT_EQ(job.job_id, "job-000001");
  EXPECT_EQ(job.status, JobStatus::kJobGenerated);
  EXPECT_EQ(job.owner, "admin");
  EXPECT_EQ(job.created_at, 1000);
  auto listed = orch.list();
  ASSERT_EQ(listed.size(), 1u);
  EXPECT_EQ(listed[0], job);

  auto mr = orch.create_mr_job(wordcount(), "bob");
  EXPECT_EQ(mr.mapreduce->job_id, mr.job_id);
  EXPECT_EQ(orch.list({JobKind::kMapReduce, std::nullopt}).size(), 1u);
  EXPECT_EQ(orch.list({std::nullopt, JobStatus::kRunning}).size(), 0u);

  orch.delete_job(job.job_id);
  EXPECT_EQ(error_code([&] { orch.get(job.job_id); }), "UnknownJob");
  EXPECT_EQ(error_code([&] { orch.delete_job(job.job_id); }), "UnknownJob");
}

TEST_F(OrchestratorTest, DeleteRunningJobRefused) {
  Orchestrator orch(store_, engine_, options());
  auto job = orch.create_mr_job(wordcount());
  orch.poll_and_dispatch(now_);
  EXPECT_EQ(error_code([&] { orch.delete_job(job.job_id); }), "JobRunning");
  ASSERT_TRUE(orch.execute(job.job_id));
  orch.delete_job(job.job_id);
  EXPECT_TRUE(store_.has_table("counts"));  // produced data stays
}

TEST_F(OrchestratorTest, ImmediateDataJobPassesThroughWaitingInOnePoll) {
  Orchestrator orch(store_, engine_, options());
  auto job = orch.create_data_job(csv_job());
  auto dispatched = orch.poll_and_dispatch(2000);
  EXPECT_EQ(dispatched, std::vector<std::string>{job.job_id});
  auto after = orch.get(job.job_id);
  EXPECT_EQ(statuses(after), (std::vector{JobStatus::kJobGenerated, JobStatus::kWaiting, JobStatus::kRunning}));
  EXPECT_EQ(after.history[1].at, 2000);
  EXPECT_EQ(after.history[2].at, 2000);
}

TEST_F(OrchestratorTest, ScheduledDataJobWaitsUntilDue) {
  Orchestrator orch(store_, engine_, options());
  auto spec = csv_job();
  spec.run_at = 5000;
  auto job = orch.create_data_job(spec);
  EXPECT_TRUE(orch.poll_and_dispatch(4999).empty());
  EXPECT_EQ(orch.get(job.job_id).status, JobStatus::kWaiting);
  EXPECT_EQ(orch.poll_and_dispatch(5000), std::vector<std::string>{job.job_id});
  EXPECT_EQ(orch.get(job.job_id).status, JobStatus::kRunning);
  EXPECT_TRUE(orch.poll_and_dispatch(6000).empty());
}

TEST_F(OrchestratorTest, MapReduceJobSkipsWaiting) {
  Orchestrator orch(store_, engine_, options());
  auto job = orch.create_mr_job(wordcount());
  orch.poll_and_dispatch(now_);
  EXPECT_EQ(statuses(orch.get(job.job_id)), (std::vector{JobStatus::kJobGenerated, JobStatus::kRunning}));
}

TEST_F(OrchestratorTest, CsvJobSucceedsWithLog) {
  Orchestrator orch(store_, engine_, options());
  auto job = orch.create_data_job(csv_job());
  orch.poll_and_dispatch(now_);
  now_ = 3000;
  ASSERT_TRUE(orch.execute(job.job_id));
  auto done = orch.get(job.job_id);
  EXPECT_EQ(done.status, JobStatus::kSuccess);
  ASSERT_TRUE(done.import_log);
  EXPECT_EQ(done.import_log->records_stored, 3u);
  EXPECT_EQ(done.import_log->job_id, job.job_id);
  EXPECT_EQ(done.history.back().at, 3000);
  EXPECT_EQ(store_.table("imported")->row_count(), 3u);
}

TEST_F(OrchestratorTest, MissingCsvBecomesError) {
  Orchestrator orch(store_, engine_, options());
  auto spec = csv_job();
  std::get<CsvSource>(spec.source).path = dir_.path() / "nope.csv";
  auto job = orch.create_data_job(spec);
  orch.poll_and_dispatch(now_);
  ASSERT_TRUE(orch.execute(job.job_id));
  auto done = orch.get(job.job_id);
  EXPECT_EQ(done.status, JobStatus::kError);
  EXPECT_EQ(done.error_code, "FileNotFound");
  EXPECT_FALSE(done.import_log);
}

TEST_F(OrchestratorTest, StreamJobStopsAtCount) {
  Orchestrator orch(store_, engine_, options());
  auto job = orch.create_data_job(stream_job(5));
  orch.poll_and_dispatch(now_);
  ASSERT_TRUE(orch.execute(job.job_id));
  auto done = orch.get(job.job_id);
  EXPECT_EQ(done.status, JobStatus::kSuccess);
  EXPECT_EQ(done.import_log->records_stored, 5u);
  EXPECT_EQ(store_.table("tweets")->row_count(), 5u);
}

TEST_F(OrchestratorTest, MapReduceOutcomes) {
  Orchestrator orch(store_, engine_, options());
  auto ok = orch.create_mr_job(wordcount());
  auto missing = orch.create_mr_job(wordcount("absent", "x1"));
  auto exists = orch.create_mr_job(wordcount("src", "src2"));
  store_.create_table({"src2", {"stats"}});
  orch.poll_and_dispatch(now_);
  for (const auto& id : {ok.job_id, missing.job_id, exists.job_id}) ASSERT_TRUE(orch.execute(id));

  auto done = orch.get(ok.job_id);
  EXPECT_EQ(done.status, JobStatus::kSuccess);
  ASSERT_TRUE(done.result);
  EXPECT_EQ(done.result->rows_read, 1u);
  EXPECT_EQ(done.result->pairs_emitted, 3u);
  EXPECT_EQ(done.result->rows_written, 2u);
  EXPECT_EQ(done.result->job_id, ok.job_id);
  EXPECT_EQ(orch.get(missing.job_id).error_code, "UnknownSourceTable");
  EXPECT_EQ(orch.get(exists.job_id).error_code, "TargetExists");
}

TEST_F(OrchestratorTest, ExecuteIsExactlyOnce) {
  Orchestrator orch(store_, engine_, options());
  auto job = orch.create_mr_job(wordcount());
  EXPECT_FALSE(orch.execute(job.job_id));  // not dispatched yet
  orch.poll_and_dispatch(now_);
  std::atomic<int> wins{0};
  {
    std::vector<std::jthread> threads;
    for (int i = 0; i < 8; ++i) threads.emplace_back([&] { wins += orch.execute(job.job_id) ? 1 : 0; });
  }
  EXPECT_EQ(wins.load(), 1);
  EXPECT_FALSE(orch.execute(job.job_id));
  EXPECT_FALSE(orch.execute("job-999999"));
}

TEST_F(OrchestratorTest, ConcurrentPollsDispatchOnce) {
  Orchestrator orch(store_, engine_, options());
  for (int i = 0; i < 50; ++i) orch.create_data_job(csv_job("t" + std::to_string(i)));
  std::atomic<std::size_t> total{0};
  {
    std::vector<std::jthread> threads;
    for (int i = 0; i < 4; ++i) threads.emplace_back([&] { total += orch.poll_and_dispatch(now_).size(); });
  }
  EXPECT_EQ(total.load(), 50u);
  for (const auto& [id, n] : orch.dispatch_counts()) EXPECT_EQ(n, 1) << id;
}

TEST_F(OrchestratorTest, UpdateOnlyBeforeRunning) {
  Orchestrator orch(store_, engine_, options());
  auto spec = csv_job();
  spec.run_at = 99'999;
  auto data = orch.create_data_job(spec);
  auto mr = orch.create_mr_job(wordcount());
  auto changed = orch.update_mr_job(mr.job_id, wordcount("src", "other"));
  EXPECT_EQ(changed.mapreduce->target_table, "other");
  EXPECT_EQ(changed.mapreduce->job_id, mr.job_id);
  orch.poll_and_dispatch(now_);
  EXPECT_EQ(orch.get(data.job_id).status, JobStatus::kWaiting);
  EXPECT_EQ(orch.update_data_job(data.job_id, csv_job("renamed")).data->target_table, "renamed");
  EXPECT_EQ(error_code([&] { orch.update_mr_job(mr.job_id, wordcount()); }), "JobImmutable");
  EXPECT_EQ(error_code([&] { orch.update_mr_job(data.job_id, wordcount()); }), "InvalidSpec");
  EXPECT_EQ(error_code([&] { orch.update_data_job("job-404", csv_job()); }), "UnknownJob");
  orch.poll_and_dispatch(100'000);
  EXPECT_EQ(error_code([&] { orch.update_data_job(data.job_id, csv_job()); }), "JobImmutable");
}

TEST_F(OrchestratorTest, InvalidSpecsRejectedAtCreate) {
  Orchestrator orch(store_, engine_, options());
  auto bad_target = csv_job("bad/name");
  EXPECT_EQ(error_code([&] { orch.create_data_job(bad_target); }), "InvalidSpec");
  auto csv_with_stop = csv_job();
  csv_with_stop.stop = ingest::StopCondition::record_count(1);
  EXPECT_EQ(error_code([&] { orch.create_data_job(csv_with_stop); }), "InvalidSpec");
  auto stream_without_stop = stream_job(1);
  stream_without_stop.stop.reset();
  EXPECT_EQ(error_code([&] { orch.create_data_job(stream_without_stop); }), "InvalidSpec");
  auto same = wordcount("src", "src");
  EXPECT_EQ(error_code([&] { orch.create_mr_job(same); }), "InvalidSpec");
  auto no_column = wordcount();
  no_column.params.clear();
  EXPECT_EQ(error_code([&] { orch.create_mr_job(no_column); }), "InvalidSpec");
  auto filter = wordcount();
  filter.algorithm = mapreduce::Algorithm::kFilter;
  EXPECT_EQ(error_code([&] { orch.create_mr_job(filter); }), "InvalidSpec");
  auto zero_workers = wordcount();
  zero_workers.worker_count = 0;
  EXPECT_EQ(error_code([&] { orch.create_mr_job(zero_workers); }), "InvalidSpec");
  EXPECT_TRUE(orch.list().empty());
}

TEST(SpecJson, DataJobRoundTripAndDiagnostics) {
  auto spec = data_job_spec_from_json(json::parse(R"({
    "source": {"type": "stream", "seed": 9, "rate": 2.5, "max_records": 40},
    "target_table": "tweets", "run_at": "2014-06-12T20:00:00Z",
    "stop": {"record_count": 10}, "layout": {"num_partitions": 4}})"));
  EXPECT_EQ(std::get<StreamSource>(spec.source), (StreamSource{9, 2.5, std::nullopt, 40}));
  EXPECT_EQ(spec.run_at, 1402603200000);
  EXPECT_EQ(spec.layout, (ingest::TableLayout{4, 3}));
  EXPECT_EQ(data_job_spec_from_json(json(spec)), spec);

  auto csv = data_job_spec_from_json(json::parse(R"({
    "source": {"type": "csv", "path": "/tmp/x.csv", "mapping": {"t": "content:text"}, "key_column": "id"},
    "target_table": "x", "run_at": 1234})"));
  EXPECT_EQ(csv.run_at, 1234);
  EXPECT_EQ(data_job_spec_from_json(json(csv)), csv);

  auto message = [](const char* text) {
    try {
      data_job_spec_from_json(json::parse(text));
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), "InvalidSpec");
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_EQ(message(R"({"target_table":"x"})").rfind("source:", 0), 0u);
  EXPECT_EQ(message(R"({"source":{"type":"ftp"},"target_table":"x"})").rfind("source.type:", 0), 0u);
  EXPECT_EQ(message(R"({"source":{"type":"csv","path":"p","mapping":{"a":"bad"},"key_column":"k"},"target_table":"x"})")
                .rfind("source.mapping:", 0),
            0u);
  EXPECT_EQ(message(R"({"source":{"type":"stream"},"target_table":"x","stop":{"record_count":0}})").rfind("stop:", 0), 0u);
  EXPECT_EQ(message(R"({"source":{"type":"stream"},"target_table":"x","stop":{"record_count":1},"run_at":"soon"})")
                .rfind("run_at:", 0),
            0u);
  EXPECT_EQ(message(R"({"source":{"type":"stream","seed":-1},"target_table":"x","stop":{"record_count":1}})")
                .rfind("source.seed:", 0),
            0u);
  EXPECT_EQ(message("[]").rfind("body:", 0), 0u);
}

TEST(SpecJson, MapReduceSpec) {
  auto spec = mr_job_spec_from_json(json::parse(
      R"({"algorithm":"sentiment","source_table":"a","target_table":"b","params":{"column":"content:text"}})"));
  EXPECT_EQ(spec.algorithm, mapreduce::Algorithm::kSentiment);
  EXPECT_EQ(spec.worker_count, 1u);
  EXPECT_EQ(json(spec).get<mapreduce::JobSpec>(), spec);
  for (const char* bad : {
           R"({"algorithm":"sort","source_table":"a","target_table":"b","params":{"column":"c:t"}})",
           R"({"algorithm":"FILTER","source_table":"a","target_table":"b","params":{"column":"c:t"}})",
           R"({"algorithm":"WORDCOUNT","source_table":"a","target_table":"b","params":{"column":3}})",
           R"({"algorithm":"WORDCOUNT","source_table":"a","params":{"column":"c:t"}})",
           R"({"algorithm":"WORDCOUNT","source_table":"a","target_table":"b","params":{"column":"c:t"},"worker_count":0})",
       }) {
    EXPECT_EQ(error_code([&] { mr_job_spec_from_json(json::parse(bad)); }), "InvalidSpec") << bad;
  }
}

TEST_F(OrchestratorTest, RegistrySurvivesRestart) {
  const auto registry = dir_.path() / "registry" / "jobs.json";
  std::vector<JobRecord> before;
  std::string running_id;
  {
    Orchestrator orch(store_, engine_, options(registry));
    auto waiting = csv_job("later");
    waiting.run_at = 1'000'000;
    orch.create_data_job(waiting);
    auto done = orch.create_mr_job(wordcount());
    orch.create_data_job(stream_job(3));
    orch.poll_and_dispatch(now_);
    orch.execute(done.job_id);
    orch.create_mr_job(wordcount("src", "fresh"));  // stays JOB_GENERATED
    for (const auto& job : orch.list()) {
      if (job.status == JobStatus::kRunning) running_id = job.job_id;
      else before.push_back(job);
    }
  }
  ASSERT_FALSE(running_id.empty());
  now_ = 50'000;
  Orchestrator restored(store_, engine_, options(registry));
  for (const auto& job : before) EXPECT_EQ(restored.get(job.job_id), job) << job.job_id;
  auto interrupted = restored.get(running_id);
  EXPECT_EQ(interrupted.status, JobStatus::kError);
  EXPECT_EQ(interrupted.error_code, "Interrupted");
  EXPECT_EQ(interrupted.history.back().at, 50'000);
  EXPECT_TRUE(legal_history(interrupted.kind, interrupted.history));
  // Ids keep counting after a restart.
  EXPECT_EQ(restored.create_mr_job(wordcount("src", "z")).job_id, "job-000005");
}

TEST_F(OrchestratorTest, CorruptRegistryRefused) {
  const auto bad = dir_.write("jobs.json", "{not json");
  EXPECT_EQ(error_code([&] { Orchestrator(store_, engine_, options(bad)); }), "CorruptRegistry");
  const auto future = dir_.write("future.json", R"({"format_version": 99, "next_id": 1, "jobs": []})");
  EXPECT_EQ(error_code([&] { Orchestrator(store_, engine_, options(future)); }), "CorruptRegistry");
}

TEST_F(OrchestratorTest, WorkerPoolRunsDispatchedJobs) {
  auto o = options();
  o.clock = system_clock();
  o.poll_interval = std::chrono::milliseconds(10);
  Orchestrator orch(store_, engine_, o);
  orch.start();
  std::vector<std::string> ids;
  for (int i = 0; i < 5; ++i) ids.push_back(orch.create_mr_job(wordcount("src", "out" + std::to_string(i))).job_id);
  ids.push_back(orch.create_data_job(csv_job()).job_id);
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(20);
  auto all_done = [&] {
    return std::all_of(ids.begin(), ids.end(), [&](const auto& id) { return is_terminal(orch.get(id).status); });
  };
  while (!all_done() && std::chrono::steady_clock::now() < deadline) {
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  orch.stop();
  for (const auto& id : ids) EXPECT_EQ(orch.get(id).status, JobStatus::kSuccess) << id;
}

TEST_F(OrchestratorTest, RunNowExecutesSynchronously) {
  Orchestrator orch(store_, engine_, options());
  auto job = orch.create_mr_job(wordcount());
  auto done = orch.run_now(job.job_id);
  EXPECT_EQ(done.status, JobStatus::kSuccess);
}

TEST(StateMachineFuzz, NoIllegalTransitionsOrDoubleDispatch) {
  auto report = oracle::run_state_machine_fuzz(2024, 1500);
  EXPECT_GT(report.jobs_created, 100u);
  EXPECT_TRUE(report.clean()) << (report.problems.empty() ? "" : report.problems.front());
}
