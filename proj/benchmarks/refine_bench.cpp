#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "refine/attention.hpp"
#include "refine/backend.hpp"
#include "refine/pope.hpp"

namespace {

using namespace refine;

attn::AttentionDump make_dump(std::uint32_t layers, std::uint32_t heads, std::uint32_t tokens) {
  attn::AttentionDump d;
  d.dims = {layers, heads, tokens, attn::kImageFeatures};
  d.weights.resize(d.dims.count());
  std::mt19937 rng(7);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (auto& w : d.weights) w = u(rng);
  return d;
}

void BM_Pool(benchmark::State& state) {
  const auto layers = static_cast<std::uint32_t>(state.range(0));
  const auto tokens = static_cast<std::uint32_t>(state.range(1));
  const auto dump = make_dump(layers, 32, tokens);
  for (auto _ : state) {
    auto m = attn::pool(dump, 3, std::min<std::uint32_t>(tokens, 8));
    benchmark::DoNotOptimize(m.grid.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(dump.dims.count()));
}
BENCHMARK(BM_Pool)->Args({8, 16})->Args({32, 16})->Args({32, 64})->Unit(benchmark::kMillisecond);

void BM_QuantileClamp(benchmark::State& state) {
  const auto m = attn::pool(make_dump(4, 4, 4), 3, 3);
  for (auto _ : state) {
    auto c = attn::quantile_clamp(m, 0.995);
    benchmark::DoNotOptimize(c.grid.data());
  }
}
BENCHMARK(BM_QuantileClamp);

void BM_ScorePope(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937 rng(3);
  std::vector<PopeItem> items(n);
  std::vector<std::string> responses(n);
  for (std::size_t i = 0; i < n; ++i) {
    items[i].id = std::to_string(i);
    items[i].label = rng() % 2 ? YesNo::yes : YesNo::no;
    items[i].split = static_cast<PopeSplit>(rng() % 3);
    responses[i] = rng() % 2 ? "Yes, there is one in the image." : "No, there is not.";
  }
  for (auto _ : state) {
    auto r = score_pope(items, responses);
    benchmark::DoNotOptimize(r.overall.counts.tp);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_ScorePope)->Arg(9000);

void BM_CanonicalRequestHash(benchmark::State& state) {
  GenerationRequest req;
  req.messages.push_back({Role::user,
                          {Segment::image("images/000000123.jpg"),
                           Segment::text(std::string(static_cast<std::size_t>(state.range(0)), 'x'))}});
  req.stage = "critique";
  for (auto _ : state) {
    auto h = canonical_request_hash(req);
    benchmark::DoNotOptimize(h.data());
  }
}
BENCHMARK(BM_CanonicalRequestHash)->Arg(256)->Arg(4096);

}  // namespace

BENCHMARK_MAIN();
