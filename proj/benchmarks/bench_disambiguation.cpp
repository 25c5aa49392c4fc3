#include <benchmark/benchmark.h>

#include "d2t/disambiguation.hpp"

namespace {

const d2t::Triple kTriple("Apollo 11", "operator", "NASA");

void BM_MineTemplate(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(d2t::mine_template(kTriple, "Apollo 11 is operated by NASA."));
}
BENCHMARK(BM_MineTemplate);

void BM_ApplyTemplate(benchmark::State& state) {
  auto tmpl = d2t::mine_template(kTriple, "Apollo 11 is operated by NASA.");
  d2t::Triple other("Apollo 12", "operator", "the National Aeronautics and Space Administration");
  for (auto _ : state) benchmark::DoNotOptimize(d2t::apply_template(tmpl, other));
}
BENCHMARK(BM_ApplyTemplate);

}  // namespace
