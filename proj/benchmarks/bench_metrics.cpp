#include <benchmark/benchmark.h>

#include "d2t/corpus.hpp"
#include "d2t/metrics.hpp"

namespace {

std::vector<d2t::DataInstance> corpus50() {
  return d2t::read_canonical(d2t::read_file(D2T_FIXTURE_DIR "/corpus50.jsonl"));
}

void BM_CorpusBleu(benchmark::State& state) {
  auto corpus = corpus50();
  std::vector<d2t::Tokens> hyps;
  std::vector<std::vector<d2t::Tokens>> refs;
  for (const auto& inst : corpus) {
    hyps.push_back(d2t::tokenize(inst.references.back()));
    refs.emplace_back();
    for (const auto& r : inst.references) refs.back().push_back(d2t::tokenize(r));
  }
  for (auto _ : state) benchmark::DoNotOptimize(d2t::corpus_bleu(hyps, refs));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(hyps.size()));
}
BENCHMARK(BM_CorpusBleu);

void BM_ParentInstance(benchmark::State& state) {
  std::vector<d2t::EvalExample> examples;
  for (const auto& inst : corpus50()) examples.push_back(d2t::make_eval_example(inst.references.back(), inst));
  for (auto _ : state)
    for (const auto& ex : examples) benchmark::DoNotOptimize(d2t::parent_instance(ex));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(examples.size()));
}
BENCHMARK(BM_ParentInstance);

void BM_Tokenize(benchmark::State& state) {
  const std::string s = "Alan Shepard, born in New Hampshire, was a crew member of Apollo 14 operated by NASA.";
  for (auto _ : state) benchmark::DoNotOptimize(d2t::tokenize(s));
}
BENCHMARK(BM_Tokenize);

}  // namespace
