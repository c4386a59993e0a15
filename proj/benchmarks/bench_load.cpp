#include <benchmark/benchmark.h>

#include <sstream>

#include "medbase/corpusgen.hpp"
#include "medbase/load.hpp"
#include "medbase/parse.hpp"
#include "medbase/schema.hpp"
#include "medbase/sql.hpp"

namespace {

std::vector<medbase::CitationRecord> records(std::uint64_t citations) {
  medbase::CorpusSpec spec;
  spec.citations = citations;
  spec.seed = 9;
  std::ostringstream out;
  medbase::write_single_document(spec, out);
  std::istringstream in(out.str());
  medbase::CitationStream stream(in);
  std::vector<medbase::CitationRecord> recs;
  while (auto ev = stream.next())
    if (auto* rec = std::get_if<medbase::CitationRecord>(&*ev)) recs.push_back(std::move(*rec));
  return recs;
}

// Loads the same citations into a fresh in-memory database with the batch
// size given by the argument; shows what multi-row inserts buy.
void BM_LoadByBatchSize(benchmark::State& state) {
  static const auto recs = records(500);
  std::uint64_t rows = 0, statements = 0;
  for (auto _ : state) {
    state.PauseTiming();
    auto conn = medbase::open_connection("sqlite::memory:");
    medbase::ensure_database(*conn, medbase::medline_schema());
    medbase::LoaderOptions options;
    options.batch_size = static_cast<std::size_t>(state.range(0));
    medbase::Loader loader(*conn, medbase::medline_schema(), options);
    state.ResumeTiming();
    for (const auto& r : recs) loader.stage_citation(r);
    loader.flush_all();
    rows = loader.stats().total_committed();
    statements = 0;
    for (const auto& [_, n] : loader.stats().insert_statements) statements += n;
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(recs.size()));
  state.counters["rows"] = static_cast<double>(rows);
  state.counters["statements"] = static_cast<double>(statements);
}
BENCHMARK(BM_LoadByBatchSize)->Arg(1)->Arg(10)->Arg(100)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);

// Deferred index build over a loaded database.
void BM_ApplyIndexes(benchmark::State& state) {
  static const auto recs = records(2000);
  for (auto _ : state) {
    state.PauseTiming();
    auto conn = medbase::open_connection("sqlite::memory:");
    medbase::ensure_database(*conn, medbase::medline_schema());
    medbase::Loader loader(*conn, medbase::medline_schema(), {});
    for (const auto& r : recs) loader.stage_citation(r);
    loader.flush_all();
    state.ResumeTiming();
    benchmark::DoNotOptimize(loader.apply_indexes());
  }
}
BENCHMARK(BM_ApplyIndexes)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
