#include <benchmark/benchmark.h>

#include <sstream>

#include "medbase/corpusgen.hpp"
#include "medbase/load.hpp"
#include "medbase/parse.hpp"

namespace {

std::string document(std::uint64_t citations) {
  medbase::CorpusSpec spec;
  spec.citations = citations;
  spec.seed = 42;
  spec.distinct_journals = 25;
  std::ostringstream out;
  medbase::write_single_document(spec, out);
  return out.str();
}

// Streaming parse of an in-memory citation set into records.
void BM_ParseCitations(benchmark::State& state) {
  const std::string xml = document(static_cast<std::uint64_t>(state.range(0)));
  for (auto _ : state) {
    std::istringstream in(xml);
    medbase::CitationStream stream(in);
    std::uint64_t n = 0;
    while (auto ev = stream.next()) ++n;
    benchmark::DoNotOptimize(n);
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * xml.size()));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ParseCitations)->Arg(100)->Arg(2000)->Unit(benchmark::kMillisecond);

// Parse plus the record-to-row mapping the loader stages.
void BM_ParseAndMapRows(benchmark::State& state) {
  const std::string xml = document(static_cast<std::uint64_t>(state.range(0)));
  std::uint64_t rows = 0;
  for (auto _ : state) {
    std::istringstream in(xml);
    medbase::CitationStream stream(in);
    while (auto ev = stream.next())
      if (auto* rec = std::get_if<medbase::CitationRecord>(&*ev)) rows += medbase::rows_for_citation(*rec).size();
  }
  benchmark::DoNotOptimize(rows);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ParseAndMapRows)->Arg(2000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
