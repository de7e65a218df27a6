#include <benchmark/benchmark.h>

#include <random>

#include "exprag/embedder.hpp"
#include "exprag/experience_index.hpp"

namespace {

exprag::EmbeddingVector random_unit(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> g;
  std::vector<double> raw(dim);
  for (auto& x : raw) x = g(rng);
  return exprag::EmbeddingVector::normalized(raw);
}

exprag::ExperienceIndex random_index(std::size_t n, std::size_t dim) {
  std::mt19937_64 rng(n * 31 + dim);
  std::vector<exprag::IndexEntry> entries;
  entries.reserve(n);
  for (std::size_t i = 0; i < n; ++i) entries.push_back({"t" + std::to_string(i), random_unit(rng, dim), {}, {}});
  return exprag::ExperienceIndex(std::move(entries), dim, {});
}

void BM_TopK(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto dim = static_cast<std::size_t>(state.range(1));
  const auto index = random_index(n, dim);
  std::mt19937_64 rng(7);
  const auto query = random_unit(rng, dim);
  for (auto _ : state) benchmark::DoNotOptimize(exprag::retrieve_top_k(index, query, 4));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_TopK)->Args({200, 32})->Args({1000, 256})->Args({10000, 256})->Args({10000, 1536});

void BM_LocalHashEmbed(benchmark::State& state) {
  const exprag::LocalHashEmbedder embedder;
  std::string text;
  for (int i = 0; i < state.range(0); ++i) text += "take apple " + std::to_string(i) + " from drawer 1 ";
  for (auto _ : state) benchmark::DoNotOptimize(embedder.embed(text));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(text.size()));
}
BENCHMARK(BM_LocalHashEmbed)->Arg(10)->Arg(200);

void BM_IndexDecode(benchmark::State& state) {
  const auto bytes = exprag::encode_index(random_index(static_cast<std::size_t>(state.range(0)), 256));
  for (auto _ : state) benchmark::DoNotOptimize(exprag::decode_index(bytes));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(bytes.size()));
}
BENCHMARK(BM_IndexDecode)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
