#include <benchmark/benchmark.h>

#include "d2t/corpus.hpp"

namespace {

void parse_fixture(benchmark::State& state, d2t::CorpusFormat format, const char* name) {
  auto bytes = d2t::read_file(std::string(D2T_FIXTURE_DIR "/") + name);
  for (auto _ : state) benchmark::DoNotOptimize(d2t::parse_corpus(format, bytes));
  state.SetBytesProcessed(state.iterations() * static_cast<int64_t>(bytes.size()));
}
BENCHMARK_CAPTURE(parse_fixture, webnlg, d2t::CorpusFormat::kWebnlgXml, "webnlg_sample.xml");
BENCHMARK_CAPTURE(parse_fixture, dart, d2t::CorpusFormat::kDartJson, "dart_sample.json");
BENCHMARK_CAPTURE(parse_fixture, e2e, d2t::CorpusFormat::kE2eCsv, "e2e_sample.csv");

void BM_CanonicalRoundTrip(benchmark::State& state) {
  auto corpus = d2t::read_canonical(d2t::read_file(D2T_FIXTURE_DIR "/corpus50.jsonl"));
  for (auto _ : state) benchmark::DoNotOptimize(d2t::read_canonical(d2t::write_canonical(corpus)));
}
BENCHMARK(BM_CanonicalRoundTrip);

}  // namespace
