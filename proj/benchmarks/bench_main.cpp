#include <benchmark/benchmark.h>

#include <random>

#include "educhat/dedup.hpp"
#include "educhat/eval.hpp"
#include "educhat/mock_backend.hpp"
#include "educhat/prompt.hpp"
#include "educhat/retrieval.hpp"

using namespace educhat;

namespace {

std::vector<Embedding> random_embeddings(std::size_t n, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<Embedding> out(n, Embedding(dim));
  for (auto& e : out) {
    for (auto& x : e) x = normal(rng);
  }
  return out;
}

void BM_Cosine(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  auto v = random_embeddings(2, dim, 1);
  for (auto _ : state) benchmark::DoNotOptimize(cosine(v[0], v[1]));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Cosine)->Arg(64)->Arg(256)->Arg(1024);

// Records per second through the incremental deduplicator, by worker count.
void BM_DedupBlocks(benchmark::State& state) {
  const std::size_t n = 2000, dim = 256;
  auto embs = random_embeddings(n, dim, 2);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("r" + std::to_string(i));
  DedupOptions opts;
  opts.batch_size = 256;
  opts.workers = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    Deduplicator d(opts);
    for (std::size_t i = 0; i < n; i += opts.batch_size) {
      const auto m = std::min(opts.batch_size, n - i);
      d.add_block(std::span(ids).subspan(i, m), std::span(embs).subspan(i, m));
    }
    benchmark::DoNotOptimize(d.report().kept_ids.size());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_DedupBlocks)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_ComposeParse(benchmark::State& state) {
  auto spec = scene_defaults(FunctionScene::RetrievalQA, Locale::Zh);
  for (auto _ : state) benchmark::DoNotOptimize(parse(compose(spec)));
}
BENCHMARK(BM_ComposeParse);

void BM_SelfCheckFilter(benchmark::State& state) {
  MockBackend backend({MockRule::when_contains({"keep"}, "Yes")}, "No");
  std::vector<Snippet> snippets;
  for (int i = 0; i < 8; ++i) {
    snippets.push_back({"https://example.org/" + std::to_string(i), "t", i % 2 ? "keep this" : "drop this", std::nullopt});
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(filter_snippets("q", snippets, backend, true));
    backend.clear_calls();
  }
}
BENCHMARK(BM_SelfCheckFilter);

void BM_ExtractChoice(benchmark::State& state) {
  const std::string reply = "After weighing the options, the answer is (C) because of the second premise.";
  for (auto _ : state) benchmark::DoNotOptimize(extract_choice(reply));
}
BENCHMARK(BM_ExtractChoice);

}  // namespace

BENCHMARK_MAIN();
