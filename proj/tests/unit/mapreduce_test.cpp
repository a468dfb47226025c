#include <gtest/gtest.h>

#include <random>
#include <thread>

#include "../support/oracles.hpp"
#include "sentimill/common/error.hpp"
#include "sentimill/mapreduce/engine.hpp"
#include "sentimill/sentiment/sentiment_jobs.hpp"

using namespace sentimill;
using mapreduce::Algorithm;
using mapreduce::Engine;
using mapreduce::Group;
using mapreduce::JobSpec;
using mapreduce::KeyValue;

namespace {

std::shared_ptr<sentiment::Resources> small_resources() {
  auto r = std::make_shared<sentiment::Resources>();
  r->lexicons["default"] = std::make_shared<sentiment::Lexicon>(
      std::map<std::string, double>{{"good", 0.7}}, std::map<std::string, double>{{"bad", -0.6}});
  r->stopwords["en"] = std::make_shared<text::StopwordList>(std::initializer_list<std::string>{"the", "a"});
  return r;
}

JobSpec spec(Algorithm algo, std::string source, std::string target, std::map<std::string, std::string> params,
             std::size_t workers = 1) {
  return JobSpec{"job-" + target, algo, std::move(source), std::move(target), std::move(params), workers};
}

std::map<std::string, std::uint64_t> counts_of(const store::Table& t) {
  std::map<std::string, std::uint64_t> out;
  for (auto& [w, c] : sentiment::read_word_counts(t)) out[w] = c;
  return out;
}

template <typename Fn>
std::string error_code(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

}  // namespace

TEST(Shuffle, GroupsSortedByKeyThenValue) {
  auto groups = mapreduce::shuffle({{"b", "1"}, {"a", "1"}, {"b", "2"}});
  std::vector<Group> expected{{"a", {"1"}}, {"b", {"1", "2"}}};
  EXPECT_EQ(groups, expected);
}

TEST(Shuffle, EmptyInput) { EXPECT_TRUE(mapreduce::shuffle({}).empty()); }

TEST(Shuffle, ValuesOrderedByBytesRegardlessOfInputOrder) {
  std::mt19937_64 rng(7);
  std::vector<KeyValue> pairs;
  for (int i = 0; i < 500; ++i) pairs.push_back({std::string(1, char('a' + rng() % 5)), std::to_string(rng() % 50)});
  const auto reference = mapreduce::shuffle(pairs);
  for (int round = 0; round < 10; ++round) {
    std::shuffle(pairs.begin(), pairs.end(), rng);
    EXPECT_EQ(mapreduce::shuffle(pairs), reference);
  }
}

TEST(Shuffle, RegroupingIsIdempotent) {
  const auto groups = mapreduce::shuffle({{"x", "3"}, {"y", "1"}, {"x", "1"}, {"z", "0"}, {"y", "1"}});
  std::vector<KeyValue> flat;
  for (const auto& g : groups)
    for (const auto& v : g.values) flat.push_back({g.key, v});
  EXPECT_EQ(mapreduce::shuffle(flat), groups);
}

TEST(MapContext, EmptyKeyRejected) {
  std::vector<KeyValue> pairs;
  mapreduce::MapContext ctx(pairs, nullptr);
  EXPECT_EQ(error_code([&] { ctx.emit("", "1"); }), "InvalidKey");
}

TEST(AlgorithmNames, RoundTrip) {
  for (auto a : {Algorithm::kFilter, Algorithm::kWordCount, Algorithm::kSentiment}) {
    EXPECT_EQ(mapreduce::parse_algorithm(mapreduce::to_string(a)), a);
  }
  EXPECT_EQ(mapreduce::parse_algorithm("wordcount"), Algorithm::kWordCount);
  EXPECT_FALSE(mapreduce::parse_algorithm("sort").has_value());
}

TEST(MapPhase, EmptyPartitionYieldsNothing) {
  store::TableStore store;
  auto src = oracle::load_texts(store, "src", {"only one row"}, 4);
  auto plan = sentiment::builtin_plans(small_resources())(
      spec(Algorithm::kWordCount, "src", "dst", {{"column", "content:text"}}), src->schema());
  std::uint32_t empty_partitions = 0;
  for (std::uint32_t p = 0; p < 4; ++p) {
    auto out = mapreduce::map_phase(plan, *src, p, nullptr);
    if (out.rows_read == 0) {
      ++empty_partitions;
      EXPECT_TRUE(out.pairs.empty());
    }
  }
  EXPECT_EQ(empty_partitions, 3u);
}

TEST(MapPhase, FilterWithoutMatchesEmitsNothing) {
  store::TableStore store;
  auto src = oracle::load_texts(store, "src", {"nothing relevant", "still nothing"});
  auto dst = store.create_table({"dst", {"content", "meta"}});
  auto plan = sentiment::builtin_plans(small_resources())(
      spec(Algorithm::kFilter, "src", "dst", {{"column", "content:text"}, {"keyword", "eisbox"}}), src->schema());
  auto out = mapreduce::map_phase(plan, *src, 0, dst.get());
  EXPECT_EQ(out.rows_read, 2u);
  EXPECT_TRUE(out.pairs.empty());
  EXPECT_EQ(out.rows_written, 0u);
}

TEST(MapPhase, PartitionsCoverDisjointRows) {
  store::TableStore store;
  std::vector<std::string> texts;
  for (int i = 0; i < 200; ++i) texts.push_back("w" + std::to_string(i));
  auto src = oracle::load_texts(store, "src", texts, 4);
  auto plan = sentiment::builtin_plans(small_resources())(
      spec(Algorithm::kWordCount, "src", "dst", {{"column", "content:text"}}), src->schema());
  std::set<std::string> seen;
  std::uint64_t total = 0;
  for (std::uint32_t p = 0; p < 4; ++p) {
    auto out = mapreduce::map_phase(plan, *src, p, nullptr);
    total += out.pairs.size();
    for (auto& kv : out.pairs) EXPECT_TRUE(seen.insert(kv.key).second) << kv.key;
  }
  EXPECT_EQ(total, 200u);
}

TEST(MapPhase, PreservesRowKeyOrderAndEmissionOrder) {
  store::TableStore store;
  auto src = store.create_table({"src", {"content"}});
  src->put("r2", "content", "text", "c d", 1);
  src->put("r1", "content", "text", "b a", 1);
  mapreduce::JobPlan plan;
  plan.map = [](const store::Row& row, mapreduce::MapContext& ctx) {
    for (auto& tok : text::tokenize(row.find("content", "text")->value)) ctx.emit(tok.text, row.key);
  };
  auto out = mapreduce::map_phase(plan, *src, 0, nullptr);
  std::vector<KeyValue> expected{{"b", "r1"}, {"a", "r1"}, {"c", "r2"}, {"d", "r2"}};
  EXPECT_EQ(out.pairs, expected);
}

TEST(RunJob, WordCountOverEmptyTable) {
  store::TableStore store;
  store.create_table({"src", {"content"}});
  Engine engine(store, sentiment::builtin_plans(small_resources()));
  auto r = engine.run_job(spec(Algorithm::kWordCount, "src", "dst", {{"column", "content:text"}}));
  EXPECT_EQ(r.rows_read, 0u);
  EXPECT_EQ(r.pairs_emitted, 0u);
  EXPECT_EQ(r.rows_written, 0u);
  ASSERT_TRUE(store.has_table("dst"));
  EXPECT_EQ(store.table("dst")->row_count(), 0u);
}

TEST(RunJob, WordCountSingleRow) {
  store::TableStore store;
  oracle::load_texts(store, "src", {"a b a"});
  Engine engine(store, sentiment::builtin_plans(small_resources()));
  auto r = engine.run_job(spec(Algorithm::kWordCount, "src", "dst", {{"column", "content:text"}, {"stopwords", "none"}}));
  EXPECT_EQ(r.job_id, "job-dst");
  EXPECT_EQ(r.rows_read, 1u);
  EXPECT_EQ(r.pairs_emitted, 3u);
  EXPECT_EQ(r.rows_written, 2u);
  EXPECT_EQ(counts_of(*store.table("dst")), (std::map<std::string, std::uint64_t>{{"a", 2}, {"b", 1}}));
}

TEST(RunJob, WordCountRespectsNamedStopwords) {
  store::TableStore store;
  oracle::load_texts(store, "src", {"the fridge", "a fridge #the"});
  Engine engine(store, sentiment::builtin_plans(small_resources()));
  engine.run_job(spec(Algorithm::kWordCount, "src", "dst", {{"column", "content:text"}, {"stopwords", "en"}}));
  EXPECT_EQ(counts_of(*store.table("dst")), (std::map<std::string, std::uint64_t>{{"#the", 1}, {"fridge", 2}}));
}

TEST(RunJob, SentimentGroupRow) {
  store::TableStore store;
  oracle::load_texts(store, "src", {"good bad good", "nothing here"});
  Engine engine(store, sentiment::builtin_plans(small_resources()));
  auto r = engine.run_job(spec(Algorithm::kSentiment, "src", "dst", {{"column", "content:text"}}));
  EXPECT_EQ(r.pairs_emitted, 3u);
  EXPECT_EQ(r.rows_written, 2u);
  auto good = store.get("dst", "good");
  ASSERT_TRUE(good);
  EXPECT_EQ(good->find("stats", "mean")->value, "0.700000");
  EXPECT_EQ(good->find("stats", "n")->value, "2");
  EXPECT_EQ(sentiment::decode_score(good->find("stats", "mean_exact")->value), 0.7);
  EXPECT_EQ(good->find("stats", "mean")->timestamp, mapreduce::kDerivedTimestamp);
  EXPECT_EQ(store.get("dst", "bad")->find("stats", "mean")->value, "-0.600000");
}

TEST(RunJob, FilterStoresRowsDuringMap) {
  store::TableStore store;
  oracle::load_texts(store, "src", {"I love my Eisbox", "nothing relevant", "EISBOX again"});
  Engine engine(store, sentiment::builtin_plans(small_resources()));
  auto r = engine.run_job(spec(Algorithm::kFilter, "src", "dst", {{"column", "content:text"}, {"keyword", "eisbox"}}));
  EXPECT_EQ(r.rows_read, 3u);
  EXPECT_EQ(r.rows_written, 2u);
  EXPECT_EQ(r.pairs_emitted, 2u);
  auto dst = store.table("dst");
  EXPECT_EQ(dst->schema().families, store.table("src")->schema().families);
  auto rows = dst->scan();
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], *store.get("src", rows[0].key));
  EXPECT_EQ(rows[1], *store.get("src", rows[1].key));
}

TEST(RunJob, FilterEmptyKeywordKeepsRowsWithColumn) {
  store::TableStore store;
  auto src = oracle::load_texts(store, "src", {"x", "y"});
  src->put("zz-no-text", "meta", "id", "1", 5);
  Engine engine(store, sentiment::builtin_plans(small_resources()));
  auto r = engine.run_job(spec(Algorithm::kFilter, "src", "dst", {{"column", "content:text"}, {"keyword", ""}}));
  EXPECT_EQ(r.rows_read, 3u);
  EXPECT_EQ(r.rows_written, 2u);
}

TEST(RunJob, TargetInheritsLayout) {
  store::TableStore store;
  store.create_table({"src", {"content"}, 4, 2});
  Engine engine(store, sentiment::builtin_plans(small_resources()));
  engine.run_job(spec(Algorithm::kWordCount, "src", "dst", {{"column", "content:text"}}));
  auto s = store.table("dst")->schema();
  EXPECT_EQ(s.num_partitions, 4u);
  EXPECT_EQ(s.replication_factor, 2u);
  EXPECT_EQ(s.families, (std::set<std::string>{"stats"}));
}

TEST(RunJob, SpecValidationErrors) {
  store::TableStore store;
  oracle::load_texts(store, "src", {"a"});
  store.create_table({"taken", {"x"}});
  Engine engine(store, sentiment::builtin_plans(small_resources()));
  const std::map<std::string, std::string> col{{"column", "content:text"}};
  EXPECT_EQ(error_code([&] { engine.run_job(spec(Algorithm::kWordCount, "src", "src", col)); }), "InvalidSpec");
  EXPECT_EQ(error_code([&] { engine.run_job(spec(Algorithm::kWordCount, "", "t", col)); }), "InvalidSpec");
  EXPECT_EQ(error_code([&] { engine.run_job(spec(Algorithm::kWordCount, "src", "t", col, 0)); }), "InvalidSpec");
  EXPECT_EQ(error_code([&] { engine.run_job(spec(Algorithm::kWordCount, "nope", "t", col)); }), "UnknownSourceTable");
  EXPECT_EQ(error_code([&] { engine.run_job(spec(Algorithm::kWordCount, "src", "taken", col)); }), "TargetExists");
  EXPECT_EQ(error_code([&] { engine.run_job(spec(Algorithm::kWordCount, "src", "t", {})); }), "AlgorithmParamMissing");
  EXPECT_EQ(error_code([&] { engine.run_job(spec(Algorithm::kFilter, "src", "t", col)); }), "AlgorithmParamMissing");
  EXPECT_EQ(error_code([&] { engine.run_job(spec(Algorithm::kWordCount, "src", "t", {{"column", "nocolon"}})); }),
            "InvalidSpec");
  EXPECT_EQ(error_code([&] { engine.run_job(spec(Algorithm::kWordCount, "src", "t", {{"column", "other:text"}})); }),
            "UnknownColumn");
  EXPECT_EQ(error_code([&] {
              engine.run_job(spec(Algorithm::kSentiment, "src", "t", {{"column", "content:text"}, {"lexicon", "fr"}}));
            }),
            "UnknownLexicon");
  EXPECT_EQ(error_code([&] {
              engine.run_job(spec(Algorithm::kWordCount, "src", "t", {{"column", "content:text"}, {"stopwords", "de"}}));
            }),
            "UnknownStopwords");
  EXPECT_FALSE(store.has_table("t"));
}

TEST(RunJob, MapperFailureDropsTarget) {
  store::TableStore store;
  auto src = oracle::load_texts(store, "src", {"fine", "also fine"}, 2);
  src->put("row-bad", "content", "text", std::string("bad \xff\xfe bytes"), 9);
  for (auto algo : {Algorithm::kFilter, Algorithm::kWordCount, Algorithm::kSentiment}) {
    Engine engine(store, sentiment::builtin_plans(small_resources()));
    std::string message;
    try {
      engine.run_job(spec(algo, "src", "dst", {{"column", "content:text"}, {"keyword", "fine"}}, 2));
      ADD_FAILURE() << "expected failure";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), "MapperFailure");
      message = e.what();
    }
    EXPECT_NE(message.find("row-bad"), std::string::npos) << message;
    EXPECT_NE(message.find("NonTextValue"), std::string::npos) << message;
    EXPECT_FALSE(store.has_table("dst"));
  }
}

TEST(RunJob, ReducerFailureDropsTarget) {
  store::TableStore store;
  oracle::load_texts(store, "src", {"a b c"});
  Engine engine(store, [](const JobSpec&, const store::TableSchema&) {
    mapreduce::JobPlan plan;
    plan.target_families = {"stats"};
    plan.map = [](const store::Row& row, mapreduce::MapContext& ctx) {
      for (auto& t : text::tokenize(row.find("content", "text")->value)) ctx.emit(t.text, "1");
    };
    plan.reduce = [](std::string_view key, std::span<const std::string>) -> std::vector<store::CellWrite> {
      if (key == "b") throw std::runtime_error("boom");
      return {{"stats", "count", "1", {}}};
    };
    return plan;
  });
  try {
    engine.run_job(spec(Algorithm::kWordCount, "src", "dst", {}, 4));
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "ReducerFailure");
    EXPECT_NE(std::string(e.what()).find("'b'"), std::string::npos);
  }
  EXPECT_FALSE(store.has_table("dst"));
}

TEST(RunJob, WordCountMatchesOracle) {
  std::mt19937_64 rng(11);
  for (int round = 0; round < 10; ++round) {
    const auto vocab = oracle::make_vocab(rng, 1 + rng() % 200);
    std::vector<std::string> texts(rng() % 300);
    for (auto& t : texts) t = oracle::random_sentence(rng, vocab, 12);
    store::TableStore store;
    oracle::load_texts(store, "src", texts, 1u << (rng() % 4));
    Engine engine(store, sentiment::builtin_plans(small_resources()));
    auto r = engine.run_job(spec(Algorithm::kWordCount, "src", "dst", {{"column", "content:text"}}, 1 + rng() % 8));
    const auto oracle = oracle::wordcount_oracle(texts, *small_resources()->default_stopwords());
    EXPECT_EQ(counts_of(*store.table("dst")), oracle);
    std::uint64_t total = 0;
    for (auto& [w, c] : oracle) total += c;
    EXPECT_EQ(r.pairs_emitted, total);
    EXPECT_EQ(r.rows_written, oracle.size());
    EXPECT_LE(r.rows_written, r.pairs_emitted);
  }
}

TEST(RunJob, FilterMatchesOracle) {
  std::mt19937_64 rng(12);
  for (int round = 0; round < 10; ++round) {
    const auto vocab = oracle::make_vocab(rng, 50);
    std::vector<std::string> texts(50 + rng() % 200);
    std::vector<std::pair<std::string, std::string>> rows;
    for (std::size_t i = 0; i < texts.size(); ++i) {
      texts[i] = oracle::random_sentence(rng, vocab, 8);
      rows.emplace_back(oracle::row_key(i), texts[i]);
    }
    std::string keyword = vocab[rng() % vocab.size()].substr(0, 2 + rng() % 2);
    if (rng() % 2) keyword[0] = static_cast<char>(keyword[0] - 'a' + 'A');
    store::TableStore store;
    oracle::load_texts(store, "src", texts, 1u << (rng() % 4));
    Engine engine(store, sentiment::builtin_plans(small_resources()));
    engine.run_job(spec(Algorithm::kFilter, "src", "dst", {{"column", "content:text"}, {"keyword", keyword}}, 3));
    std::set<std::string> got;
    for (auto& row : store.table("dst")->scan()) got.insert(row.key);
    EXPECT_EQ(got, oracle::filter_oracle(rows, keyword)) << keyword;
  }
}

TEST(RunJob, OutputIndependentOfPartitionsAndWorkers) {
  std::mt19937_64 rng(13);
  const auto vocab = oracle::make_vocab(rng, 120);
  std::vector<std::string> texts(600);
  for (auto& t : texts) t = oracle::random_sentence(rng, vocab, 15);
  auto resources = small_resources();
  resources->lexicons["default"] = std::make_shared<sentiment::Lexicon>(oracle::random_lexicon(rng, vocab));

  for (auto algo : {Algorithm::kFilter, Algorithm::kWordCount, Algorithm::kSentiment}) {
    std::optional<std::string> reference;
    for (std::uint32_t parts : {1u, 2u, 4u, 8u}) {
      for (std::size_t workers : {1u, 2u, 4u, 8u}) {
        store::TableStore store;
        oracle::load_texts(store, "src", texts, parts);
        Engine engine(store, sentiment::builtin_plans(resources));
        engine.run_job(spec(algo, "src", "dst", {{"column", "content:text"}, {"keyword", vocab[0].substr(0, 2)}}, workers));
        auto image = store::table_image(*store.table("dst"));
        if (!reference) reference = image;
        EXPECT_EQ(image, *reference) << mapreduce::to_string(algo) << " p=" << parts << " w=" << workers;
        EXPECT_TRUE(store.all_replicas_identical());
      }
    }
  }
}

TEST(RunJob, ConcurrentJobsOnDisjointTables) {
  store::TableStore store;
  std::mt19937_64 rng(14);
  const auto vocab = oracle::make_vocab(rng, 40);
  std::vector<std::vector<std::string>> corpora(4);
  for (std::size_t i = 0; i < corpora.size(); ++i) {
    corpora[i].resize(200);
    for (auto& t : corpora[i]) t = oracle::random_sentence(rng, vocab, 10);
    oracle::load_texts(store, "src" + std::to_string(i), corpora[i], 2);
  }
  Engine engine(store, sentiment::builtin_plans(small_resources()));
  {
    std::vector<std::jthread> threads;
    for (std::size_t i = 0; i < corpora.size(); ++i) {
      threads.emplace_back([&, i] {
        engine.run_job(spec(Algorithm::kWordCount, "src" + std::to_string(i), "dst" + std::to_string(i),
                            {{"column", "content:text"}}, 2));
      });
    }
  }
  for (std::size_t i = 0; i < corpora.size(); ++i) {
    EXPECT_EQ(counts_of(*store.table("dst" + std::to_string(i))),
              oracle::wordcount_oracle(corpora[i], *small_resources()->default_stopwords()));
  }
}

TEST(RunJob, JobsSharingSourceAreSerialized) {
  store::TableStore store;
  oracle::load_texts(store, "src", {"a b", "c"}, 2);
  std::atomic<int> active{0};
  std::atomic<int> max_active{0};
  auto inner = sentiment::builtin_plans(small_resources());
  Engine engine(store, [&](const JobSpec& s, const store::TableSchema& schema) {
    auto plan = inner(s, schema);
    auto map = plan.map;
    plan.map = [&, map](const store::Row& row, mapreduce::MapContext& ctx) {
      int now = ++active;
      int prev = max_active.load();
      while (now > prev && !max_active.compare_exchange_weak(prev, now)) {
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
      --active;
      map(row, ctx);
    };
    return plan;
  });
  {
    std::vector<std::jthread> threads;
    for (int i = 0; i < 4; ++i) {
      threads.emplace_back([&, i] {
        engine.run_job(spec(Algorithm::kWordCount, "src", "out" + std::to_string(i), {{"column", "content:text"}}, 1));
      });
    }
  }
  EXPECT_EQ(max_active.load(), 1);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(store.table("out" + std::to_string(i))->row_count(), 3u);
}
