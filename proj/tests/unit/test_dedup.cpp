#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "educhat/dedup.hpp"
#include "test_support.hpp"

using namespace educhat;
using educhat::testing::TempDir;
using nlohmann::json;

namespace {

std::vector<DatasetRecord> records_from(const educhat::testing::DedupFixture& f) {
  std::vector<DatasetRecord> out;
  for (std::size_t i = 0; i < f.ids.size(); ++i) out.push_back({f.ids[i], f.texts[i], f.embeddings[i]});
  return out;
}

std::vector<std::string> removed_ids(const DedupReport& r) {
  std::vector<std::string> out;
  for (const auto& x : r.removed) out.push_back(x.removed_id);
  return out;
}

class FailingAfter final : public EmbeddingProvider {
 public:
  FailingAfter(EmbeddingProvider& inner, std::size_t ok_calls) : inner_(inner), ok_calls_(ok_calls) {}
  std::vector<Embedding> embed(std::span<const std::string> texts) override {
    if (calls_++ >= ok_calls_) throw EmbeddingError("embedding service unavailable");
    return inner_.embed(texts);
  }

 private:
  EmbeddingProvider& inner_;
  std::size_t ok_calls_;
  std::size_t calls_ = 0;
};

}  // namespace

TEST(Cosine, Examples) {
  std::vector<double> a{0.6, 0.8};
  EXPECT_DOUBLE_EQ(cosine(a, a), 1.0);
  EXPECT_DOUBLE_EQ(cosine(std::vector<double>{1, 0}, std::vector<double>{0, 1}), 0.0);
  EXPECT_NEAR(cosine(std::vector<double>{1, 0}, std::vector<double>{1, 1}), 0.70710678, 1e-8);
  EXPECT_NEAR(cosine(std::vector<double>{1, 0}, std::vector<double>{1, 1}), 1.0 / std::sqrt(2.0), 1e-9);
}

TEST(Cosine, Errors) {
  try {
    cosine(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3});
    FAIL();
  } catch (const SimilarityError& e) {
    EXPECT_EQ(e.kind(), SimilarityError::Kind::DimensionMismatch);
  }
  try {
    cosine(std::vector<double>{0, 0}, std::vector<double>{1, 2});
    FAIL();
  } catch (const SimilarityError& e) {
    EXPECT_EQ(e.kind(), SimilarityError::Kind::ZeroNorm);
  }
  EXPECT_THROW(cosine(std::vector<double>{}, std::vector<double>{}), SimilarityError);
}

TEST(Cosine, AgreesWithHighPrecisionOracle) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0, 1);
  for (int i = 0; i < 1000; ++i) {
    std::size_t dim = std::uniform_int_distribution<std::size_t>(1, 64)(rng);
    std::vector<double> a(dim), b(dim);
    for (auto& x : a) x = n(rng) * 1e3;
    for (auto& x : b) x = n(rng) * 1e-3;
    ASSERT_NEAR(cosine(a, b), educhat::testing::cosine_oracle(a, b), 1e-9);
  }
}

TEST(Cosine, ClampedToUnitInterval) {
  std::vector<double> a{1e-300, 1e-300, 1e-300};
  double c = cosine(a, a);
  EXPECT_LE(c, 1.0);
  EXPECT_GE(c, -1.0);
}

TEST(Dedup, IdenticalTextRemovedWithSimilarityOne) {
  HashingEmbeddingProvider provider;
  std::vector<DatasetRecord> recs = {{"a", "the same words", {}}, {"b", "the same words", {}}};
  auto r = dedup(recs, provider);
  EXPECT_EQ(r.report.kept_ids, (std::vector<std::string>{"a"}));
  ASSERT_EQ(r.report.removed.size(), 1u);
  EXPECT_EQ(r.report.removed[0].removed_id, "b");
  EXPECT_EQ(r.report.removed[0].kept_id, "a");
  EXPECT_NEAR(r.report.removed[0].similarity, 1.0, 1e-12);
}

TEST(Dedup, AllDissimilarKept) {
  TableEmbeddingProvider provider({{"x", {1, 0, 0}}, {"y", {0, 1, 0}}, {"z", {0, 0, 1}}});
  std::vector<DatasetRecord> recs = {{"1", "x", {}}, {"2", "y", {}}, {"3", "z", {}}};
  auto r = dedup(recs, provider);
  EXPECT_EQ(r.kept.size(), 3u);
  EXPECT_TRUE(r.report.removed.empty());
  EXPECT_EQ(r.report.pairs_compared, 3u);
}

TEST(Dedup, ChainKeepsEnds) {
  // sim(A,B) = sim(B,C) = 0.8 and sim(A,C) = 0.28.
  std::vector<DatasetRecord> recs = {{"A", "a", Embedding{1.0, 0.0}}, {"B", "b", Embedding{0.8, 0.6}},
                                     {"C", "c", Embedding{0.28, 0.96}}};
  HashingEmbeddingProvider unused;
  auto r = dedup(recs, unused);
  EXPECT_EQ(r.report.kept_ids, (std::vector<std::string>{"A", "C"}));
  ASSERT_EQ(r.report.removed.size(), 1u);
  EXPECT_EQ(r.report.removed[0], (RemovedRecord{"B", "A", r.report.removed[0].similarity}));
  EXPECT_NEAR(r.report.removed[0].similarity, 0.8, 1e-12);

  // Brute force over every ordering of the three records.
  std::vector<std::size_t> order{0, 1, 2};
  do {
    std::vector<std::string> ids;
    std::vector<Embedding> embs;
    std::vector<DatasetRecord> perm;
    for (auto i : order) {
      ids.push_back(recs[i].id);
      embs.push_back(*recs[i].embedding);
      perm.push_back(recs[i]);
    }
    auto expected = educhat::testing::naive_dedup(ids, embs, 0.7);
    EXPECT_EQ(dedup(perm, unused).report.kept_ids, expected.kept);
  } while (std::next_permutation(order.begin(), order.end()));
}

TEST(Dedup, ThresholdIsStrict) {
  std::vector<DatasetRecord> recs = {{"a", "a", Embedding{1.0, 0.0}}, {"b", "b", Embedding{0.5, 0.0}}};
  HashingEmbeddingProvider unused;
  DedupOptions opts;
  opts.threshold = 1.0;
  EXPECT_EQ(dedup(recs, unused, opts).report.kept_ids.size(), 2u);
  opts.threshold = 0.999999;
  EXPECT_EQ(dedup(recs, unused, opts).report.kept_ids.size(), 1u);
}

TEST(Dedup, PartnerIsMostSimilarKeptRecord) {
  std::vector<DatasetRecord> recs = {
      {"p", "p", Embedding{1.0, 0.0}}, {"q", "q", Embedding{0.0, 1.0}}, {"r", "r", Embedding{0.2, 0.98}}};
  HashingEmbeddingProvider unused;
  DedupOptions opts;
  opts.threshold = 0.1;
  auto r = dedup(recs, unused, opts);
  ASSERT_EQ(r.report.removed.size(), 1u);
  EXPECT_EQ(r.report.removed[0].kept_id, "q");
}

TEST(Dedup, RejectsBadInput) {
  HashingEmbeddingProvider p;
  EXPECT_THROW(dedup(std::vector<DatasetRecord>{{"a", "x", {}}, {"a", "y", {}}}, p), std::invalid_argument);
  EXPECT_THROW(dedup(std::vector<DatasetRecord>{{"a", "", {}}}, p), std::invalid_argument);
  DedupOptions bad;
  bad.threshold = 0.0;
  EXPECT_THROW(dedup(std::vector<DatasetRecord>{{"a", "x", {}}}, p, bad), std::invalid_argument);
  bad.threshold = 1.5;
  EXPECT_THROW(dedup(std::vector<DatasetRecord>{{"a", "x", {}}}, p, bad), std::invalid_argument);
  EXPECT_THROW(dedup(std::vector<DatasetRecord>{{"a", "x", Embedding{1, 0}}, {"b", "y", Embedding{1, 0, 0}}}, p),
               SimilarityError);
}

TEST(Dedup, MatchesNaiveReferenceOnRandomFixtures) {
  std::mt19937_64 rng(5);
  HashingEmbeddingProvider unused;
  for (int trial = 0; trial < 20; ++trial) {
    auto n = std::uniform_int_distribution<std::size_t>(0, 120)(rng);
    auto f = educhat::testing::random_dedup_fixture(rng, n, 6);
    auto expected = educhat::testing::naive_dedup(f.ids, f.embeddings, 0.7);
    DedupOptions opts;
    opts.batch_size = std::uniform_int_distribution<std::size_t>(1, 40)(rng);
    opts.workers = std::uniform_int_distribution<std::size_t>(1, 4)(rng);
    auto r = dedup(records_from(f), unused, opts);
    ASSERT_EQ(r.report.kept_ids, expected.kept);
    ASSERT_EQ(r.report.removed.size(), expected.removed.size());
    for (std::size_t i = 0; i < expected.removed.size(); ++i) {
      EXPECT_EQ(r.report.removed[i].removed_id, expected.removed[i].removed_id);
      EXPECT_EQ(r.report.removed[i].kept_id, expected.removed[i].kept_id);
      EXPECT_NEAR(r.report.removed[i].similarity, expected.removed[i].similarity, 1e-12);
    }
  }
}

TEST(Dedup, PairsComparedCountsKeptPredecessors) {
  std::mt19937_64 rng(8);
  auto f = educhat::testing::random_dedup_fixture(rng, 90, 5);
  auto expected = educhat::testing::naive_dedup(f.ids, f.embeddings, 0.7);
  std::uint64_t pairs = 0, kept_so_far = 0;
  std::set<std::string> kept(expected.kept.begin(), expected.kept.end());
  for (const auto& id : f.ids) {
    pairs += kept_so_far;
    if (kept.count(id)) ++kept_so_far;
  }
  HashingEmbeddingProvider unused;
  for (std::size_t batch : {1, 7, 64, 500}) {
    DedupOptions opts;
    opts.batch_size = batch;
    EXPECT_EQ(dedup(records_from(f), unused, opts).report.pairs_compared, pairs) << batch;
  }
}

TEST(Dedup, ReportJsonRoundTrip) {
  DedupReport r;
  r.kept_ids = {"a", "c"};
  r.removed = {{"b", "a", 0.9}};
  r.pairs_compared = 3;
  r.error = "boom";
  r.aborted = true;
  json j = r;
  auto back = j.get<DedupReport>();
  EXPECT_EQ(back.kept_ids, r.kept_ids);
  EXPECT_EQ(back.removed, r.removed);
  EXPECT_EQ(back.pairs_compared, 3u);
  EXPECT_TRUE(back.aborted);
  EXPECT_EQ(back.error, r.error);
}

TEST(Pipeline, HundredRecordsEqualInMemory) {
  std::mt19937_64 rng(100);
  auto f = educhat::testing::random_dedup_fixture(rng, 100, 8);
  TempDir dir;
  educhat::testing::write_dataset(dir / "in.jsonl", f);
  TableEmbeddingProvider provider(educhat::testing::embedding_table(f));
  PipelineConfig cfg{dir / "in.jsonl", dir / "out.jsonl", dir / "report.json", {}};
  cfg.options.batch_size = 16;
  auto summary = dedup_jsonl(cfg, provider);
  HashingEmbeddingProvider unused;
  auto mem = dedup(records_from(f), unused);
  EXPECT_EQ(educhat::testing::read_ids(dir / "out.jsonl"), mem.report.kept_ids);
  auto report = json::parse(educhat::testing::read_file(dir / "report.json"));
  EXPECT_EQ(report["kept_ids"].get<std::vector<std::string>>(), mem.report.kept_ids);
  EXPECT_EQ(report["pairs_compared"].get<std::uint64_t>(), mem.report.pairs_compared);
  EXPECT_EQ(summary.input_count, 100u);
  EXPECT_EQ(summary.kept + summary.removed, 100u);
}

TEST(Pipeline, KeptLinesCopiedVerbatim) {
  TempDir dir;
  educhat::testing::write_file(dir / "in.jsonl",
                               "{\"id\":\"a\",  \"text\":\"alpha\", \"extra\": [1, 2]}\n"
                               "{\"id\":\"b\",\"text\":\"alpha\"}\n"
                               "\n"
                               "{\"text\":\"beta\",\"id\":\"c\"}\n");
  HashingEmbeddingProvider provider;
  PipelineConfig cfg{dir / "in.jsonl", dir / "out.jsonl", dir / "report.json", {}};
  dedup_jsonl(cfg, provider);
  EXPECT_EQ(educhat::testing::read_file(dir / "out.jsonl"),
            "{\"id\":\"a\",  \"text\":\"alpha\", \"extra\": [1, 2]}\n{\"text\":\"beta\",\"id\":\"c\"}\n");
}

TEST(Pipeline, EmptyInput) {
  TempDir dir;
  educhat::testing::write_file(dir / "in.jsonl", "");
  HashingEmbeddingProvider provider;
  PipelineConfig cfg{dir / "in.jsonl", dir / "out.jsonl", dir / "report.json", {}};
  auto s = dedup_jsonl(cfg, provider);
  EXPECT_EQ(s.input_count, 0u);
  EXPECT_EQ(educhat::testing::read_file(dir / "out.jsonl"), "");
  EXPECT_EQ(json::parse(educhat::testing::read_file(dir / "report.json"))["pairs_compared"], 0);
}

TEST(Pipeline, MalformedLineNamed) {
  TempDir dir;
  HashingEmbeddingProvider provider;
  PipelineConfig cfg{educhat::testing::fixtures_dir() / "dedup_malformed_line17.jsonl", dir / "out.jsonl",
                     dir / "report.json", {}};
  try {
    dedup_jsonl(cfg, provider);
    FAIL();
  } catch (const PipelineError& e) {
    EXPECT_EQ(e.line(), 17u);
  }
  std::ostringstream out, err;
  EXPECT_EQ(run_pipeline(cfg, provider, out, err), 1);
  EXPECT_NE(err.str().find("17"), std::string::npos);
}

TEST(Pipeline, SchemaErrors) {
  TempDir dir;
  HashingEmbeddingProvider provider;
  PipelineConfig cfg{dir / "in.jsonl", dir / "out.jsonl", dir / "report.json", {}};
  for (const char* bad : {"{\"id\": 1, \"text\": \"x\"}\n", "{\"id\": \"a\"}\n", "{\"id\": \"a\", \"text\": \"\"}\n",
                          "[1]\n", "{\"id\": \"a\", \"text\": \"x\"}\n{\"id\": \"a\", \"text\": \"y\"}\n"}) {
    educhat::testing::write_file(dir / "in.jsonl", bad);
    EXPECT_THROW(dedup_jsonl(cfg, provider), PipelineError) << bad;
  }
  cfg.input = dir / "missing.jsonl";
  EXPECT_THROW(dedup_jsonl(cfg, provider), PipelineError);
  educhat::testing::write_file(dir / "in.jsonl", "{\"id\": \"a\", \"text\": \"x\"}\n");
  cfg.input = dir / "in.jsonl";
  cfg.output = dir / "no-such-dir" / "out.jsonl";
  std::ostringstream out, err;
  EXPECT_EQ(run_pipeline(cfg, provider, out, err), 1);
}

TEST(Pipeline, ProviderFailureWritesPartialReport) {
  std::mt19937_64 rng(3);
  auto f = educhat::testing::random_dedup_fixture(rng, 50, 4);
  TempDir dir;
  educhat::testing::write_dataset(dir / "in.jsonl", f);
  TableEmbeddingProvider table(educhat::testing::embedding_table(f));
  FailingAfter provider(table, 2);
  PipelineConfig cfg{dir / "in.jsonl", dir / "out.jsonl", dir / "report.json", {}};
  cfg.options.batch_size = 10;
  std::ostringstream out, err;
  EXPECT_EQ(run_pipeline(cfg, provider, out, err), 2);
  auto report = json::parse(educhat::testing::read_file(dir / "report.json"));
  EXPECT_TRUE(report["aborted"].get<bool>());
  auto decided = report["kept_ids"].size() + report["removed"].size();
  EXPECT_EQ(decided, 20u);
  EXPECT_NE(report["error"].get<std::string>().find("unavailable"), std::string::npos);
}

TEST(HashingEmbedding, DeterministicAndSized) {
  HashingEmbeddingProvider p(32);
  std::vector<std::string> texts = {"hello world", "hello world", "你好世界"};
  auto e = p.embed(texts);
  ASSERT_EQ(e.size(), 3u);
  EXPECT_EQ(e[0], e[1]);
  EXPECT_EQ(e[2].size(), 32u);
  EXPECT_NE(e[0], e[2]);
}
