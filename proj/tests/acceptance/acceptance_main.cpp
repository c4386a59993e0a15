// Runs every acceptance criterion against generated corpora and prints one
// PASS/FAIL line each. Exit status is nonzero when any criterion fails.

#include <fmt/format.h>
#include <spdlog/spdlog.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <csignal>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <tuple>

#include "db_snapshot.hpp"
#include "medbase/corpusgen.hpp"
#include "medbase/parse.hpp"
#include "medbase/pipeline.hpp"
#include "medbase/schema.hpp"
#include "mirror_server.hpp"
#include "temp_dir.hpp"

using namespace medbase;
using testing_support::TempDir;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Failed checks accumulate into the detail string.
struct Checker {
  std::vector<std::string> failures;
  std::vector<std::string> notes;

  bool check(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
    return ok;
  }
  void note(std::string s) { notes.push_back(std::move(s)); }

  Outcome outcome() const {
    std::string d;
    const auto& parts = failures.empty() ? notes : failures;
    for (const auto& p : parts) d += (d.empty() ? "" : "; ") + p;
    return {failures.empty(), d};
  }
};

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

PipelineConfig config_for(const TempDir& work, const std::string& mirror_url, std::size_t batch = 5000) {
  PipelineConfig cfg;
  cfg.db_url = work.db_url();
  cfg.mirror_url = mirror_url;
  cfg.workdir = work / "files";
  cfg.batch_size = batch;
  return cfg;
}

std::string file_url(const TempDir& d) { return "file://" + d.path().string(); }

std::string describe_counts(const std::map<std::string, std::uint64_t>& got,
                            const std::map<std::string, std::uint64_t>& want) {
  std::string d;
  for (const auto& [t, n] : want) {
    auto it = got.find(t);
    std::uint64_t g = it == got.end() ? 0 : it->second;
    if (g != n) d += fmt::format(" {}={} (want {})", t, g, n);
  }
  return d;
}

CorpusSpec round_trip_spec() {
  CorpusSpec spec;
  spec.citations = 10000;
  spec.files = 4;
  spec.seed = 2017;
  spec.distinct_journals = 25;
  return spec;
}

struct RoundTrip {
  CorpusManifest manifest;
  RunReport report;
  double seconds = 0.0;
  std::string db_url;
};

// Round trip and the two criteria that reuse its database.
Outcome round_trip(const TempDir& mirror, const TempDir& work, RoundTrip& rt) {
  Checker c;
  rt.manifest = generate(round_trip_spec(), mirror.path());
  testing_support::MirrorServer server(mirror.path());
  auto cfg = config_for(work, server.url());
  rt.db_url = cfg.db_url;
  auto t0 = std::chrono::steady_clock::now();
  rt.report = run_pipeline(cfg);
  rt.seconds = seconds_since(t0);
  c.check(!rt.report.aborted, "aborted: " + rt.report.abort_reason);
  auto counts = testing_support::row_counts(cfg.db_url);
  c.check(counts == rt.manifest.table_rows, "row counts differ:" + describe_counts(counts, rt.manifest.table_rows));
  c.check(counts.size() == 13, fmt::format("{} tables", counts.size()));
  c.check(rt.report.files_processed == 4, fmt::format("{} files processed", rt.report.files_processed));
  c.check(rt.seconds < 120.0, fmt::format("took {:.1f} s", rt.seconds));
  std::uint64_t rows = 0;
  for (const auto& [_, n] : counts) rows += n;
  c.note(fmt::format("{} citations, {} rows in 13 tables match the manifest, {:.1f} s over HTTP",
                     rt.report.citations_loaded, rows, rt.seconds));
  return c.outcome();
}

Outcome throughput(const RoundTrip& rt) {
  Checker c;
  const double rate = rt.report.citations_loaded / rt.seconds;
  c.check(!rt.report.aborted && rt.report.citations_loaded == rt.manifest.citations_loaded, "incomplete load");
  c.check(rate >= 65.0, fmt::format("{:.1f} citations/s", rate));
  c.note(fmt::format("{:.1f} citations/s end to end (floor 65)", rate));
  return c.outcome();
}

Outcome verify_queries(const RoundTrip& rt) {
  Checker c;
  auto conn = open_connection(rt.db_url);
  auto results = verify_database(*conn);
  c.check(results.size() == 4, fmt::format("{} queries", results.size()));
  for (const auto& r : results) {
    c.check(!r.error, r.label + ": " + r.error.value_or(""));
    if (r.label == "citation count")
      c.check(static_cast<std::uint64_t>(r.result) == rt.manifest.citations_loaded,
              fmt::format("citation count {} (want {})", r.result, rt.manifest.citations_loaded));
    if (r.label == "distinct journal titles")
      c.check(r.result == 25, fmt::format("distinct journals {} (want 25)", r.result));
  }
  c.note(fmt::format("citation count {}, 25 distinct journals, 4 queries without error",
                     rt.manifest.citations_loaded));
  return c.outcome();
}

Outcome batch_invariance() {
  Checker c;
  CorpusSpec spec;
  spec.citations = 1000;
  spec.files = 2;
  spec.seed = 7;
  spec.distinct_journals = 12;
  TempDir mirror("acc-batch-mirror"), small("acc-batch-1"), large("acc-batch-5000");
  generate(spec, mirror.path());

  auto r1 = run_pipeline(config_for(small, file_url(mirror), 1));
  auto r5000 = run_pipeline(config_for(large, file_url(mirror), 5000));
  c.check(!r1.aborted && !r5000.aborted, "aborted");
  c.check(testing_support::snapshot(small.db_url()) == testing_support::snapshot(large.db_url()),
          "table contents differ between batch sizes 1 and 5000");
  std::uint64_t worst = 0;
  for (const auto& [table, rows] : r5000.rows_by_table) {
    const std::uint64_t bound = (rows + 4999) / 5000 + 1;
    const std::uint64_t stmts = r5000.insert_statements.count(table) ? r5000.insert_statements.at(table) : 0;
    c.check(stmts <= bound, fmt::format("{}: {} statements for {} rows", table, stmts, rows));
    worst = std::max(worst, stmts);
  }
  c.check(r5000.rows_by_table.size() == 13, fmt::format("{} tables loaded", r5000.rows_by_table.size()));
  c.note(fmt::format("identical contents; {} vs {} INSERT statements; at most {} per table at 5000",
                     [&] {
                       std::uint64_t n = 0;
                       for (const auto& [_, s] : r1.insert_statements) n += s;
                       return n;
                     }(),
                     [&] {
                       std::uint64_t n = 0;
                       for (const auto& [_, s] : r5000.insert_statements) n += s;
                       return n;
                     }(),
                     worst));
  return c.outcome();
}

// Runs the pipeline in a child that SIGKILLs itself when `arm` says so.
// Returns true if the child died by the signal.
bool run_until_killed(const PipelineConfig& cfg, const std::function<void(PipelineHooks&)>& arm) {
  std::fflush(stdout);
  pid_t pid = fork();
  if (pid == 0) {
    PipelineHooks hooks;
    arm(hooks);
    try {
      run_pipeline(cfg, hooks);
    } catch (...) {
    }
    _exit(0);
  }
  int status = 0;
  waitpid(pid, &status, 0);
  return WIFSIGNALED(status) && WTERMSIG(status) == SIGKILL;
}

void die() { ::kill(::getpid(), SIGKILL); }

Outcome crash_convergence() {
  Checker c;
  CorpusSpec spec;
  spec.citations = 1500;
  spec.files = 5;
  spec.update_files = 2;
  spec.seed = 99;
  spec.distinct_journals = 10;
  TempDir mirror("acc-crash-mirror"), clean("acc-crash-clean");
  auto m = generate(spec, mirror.path());
  auto reference_report = run_pipeline(config_for(clean, file_url(mirror), 200));
  auto reference = testing_support::snapshot(clean.db_url());
  std::map<std::string, std::uint64_t> clean_rows;
  for (const auto& f : reference_report.files) clean_rows[f.name] = f.rows_loaded;

  std::mt19937_64 rng(20170521);
  const char* kinds[] = {"mid-download", "mid-parse", "post-flush/pre-ledger"};
  std::vector<std::string> summary;
  for (int kind = 0; kind < 3; ++kind) {
    TempDir work(fmt::format("acc-crash-{}", kind));
    auto cfg = config_for(work, file_url(mirror), 200);
    const auto& victim = m.files[std::uniform_int_distribution<std::size_t>(0, m.files.size() - 1)(rng)];
    const std::uint64_t at = std::uniform_int_distribution<std::uint64_t>(1, victim.citations - 1)(rng);
    bool killed = run_until_killed(cfg, [&](PipelineHooks& h) {
      switch (kind) {
        case 0:
          h.on_download_progress = [&](const RemoteFileEntry& e, std::uint64_t) {
            if (e.name == victim.name) die();
          };
          break;
        case 1:
          h.on_citation = [&](const RemoteFileEntry& e, std::uint64_t n) {
            if (e.name == victim.name && n == at) die();
          };
          break;
        default:
          h.after_flush = [&](const RemoteFileEntry& e) {
            if (e.name == victim.name) die();
          };
      }
    });
    c.check(killed, fmt::format("{}: child was not killed", kinds[kind]));

    auto resumed = run_pipeline(cfg);
    c.check(!resumed.aborted, fmt::format("{}: resumed run aborted: {}", kinds[kind], resumed.abort_reason));
    c.check(testing_support::snapshot(cfg.db_url) == reference,
            fmt::format("{} in {}: contents differ from the uninterrupted run", kinds[kind], victim.name));
    for (const auto& code : {"FieldTooLong", "StorageFull", "Other"})
      c.check(resumed.errors_by_code.at(code) == 0, fmt::format("{}: {} errors after restart", kinds[kind], code));
    std::uint64_t dup = resumed.errors_by_code.at("DuplicateKey");
    for (const auto& f : resumed.files)
      c.check(f.errors == 0 || f.name == victim.name,
              fmt::format("{}: errors reported for {}, not the interrupted file", kinds[kind], f.name));
    // Rows of the interrupted file that were committed before the kill
    // collide on restart; after the final flush that is all of them.
    if (kind == 2)
      c.check(dup == clean_rows[victim.name],
              fmt::format("post-flush: {} DuplicateKey, want {}", dup, clean_rows[victim.name]));
    else
      c.check(dup <= clean_rows[victim.name], fmt::format("{}: {} DuplicateKey", kinds[kind], dup));
    summary.push_back(fmt::format("{} in {} -> {} DuplicateKey", kinds[kind], victim.name, dup));
  }
  std::string d = "converged after SIGKILL at ";
  for (std::size_t i = 0; i < summary.size(); ++i) d += (i ? ", " : "") + summary[i];
  c.note(d);
  return c.outcome();
}

Outcome error_taxonomy() {
  Checker c;
  CorpusSpec spec;
  spec.citations = 400;
  spec.files = 3;
  spec.seed = 1406;
  spec.overlong_fields = 3;
  spec.duplicate_pmids = 5;
  TempDir mirror("acc-err-mirror"), work("acc-err");
  auto m = generate(spec, mirror.path());
  auto cfg = config_for(work, file_url(mirror), 50);
  auto report = run_pipeline(cfg);
  c.check(!report.aborted, "aborted: " + report.abort_reason);

  const std::uint64_t want_dup = m.errors_by_code.at("DuplicateKey");
  c.check(report.errors_by_code.at("FieldTooLong") == 3,
          fmt::format("FieldTooLong={}", report.errors_by_code.at("FieldTooLong")));
  c.check(report.errors_by_code.at("DuplicateKey") == want_dup,
          fmt::format("DuplicateKey={} (want {})", report.errors_by_code.at("DuplicateKey"), want_dup));
  c.check(report.errors_by_code.at("StorageFull") == 0 && report.errors_by_code.at("Other") == 0,
          "unexpected StorageFull or Other errors");

  using Key = std::tuple<std::string, std::string, Pmid, std::string>;
  std::map<Key, std::uint64_t> want, got;
  for (const auto& g : m.expected_errors)
    want[{std::string(to_string(g.code)), g.table, g.pmid, g.code == ErrorCode::FieldTooLong ? g.field : ""}] +=
        g.count;
  for (const auto& e : read_error_log(cfg.error_log_path()))
    got[{std::string(to_string(e.code)), e.table, e.pmid.value_or(0),
         e.code == ErrorCode::FieldTooLong ? e.field.value_or("") : ""}] += 1;
  c.check(got == want, fmt::format("error log attribution differs: {} groups logged, {} expected", got.size(),
                                   want.size()));
  for (const auto& [k, _] : got)
    if (std::get<0>(k) == "FieldTooLong")
      c.check(std::get<1>(k) == "medline_author" && std::get<3>(k) == "initials",
              "FieldTooLong attributed to " + std::get<1>(k) + "." + std::get<3>(k));
  c.note(fmt::format("FieldTooLong=3 on medline_author.initials, DuplicateKey={} across {} tables, as in the manifest",
                     want_dup, [&] {
                       std::set<std::string> t;
                       for (const auto& [k, _] : got)
                         if (std::get<0>(k) == "DuplicateKey") t.insert(std::get<1>(k));
                       return t.size();
                     }()));
  return c.outcome();
}

Outcome deferred_indexes() {
  Checker c;
  CorpusSpec spec;
  spec.citations = 800;
  spec.files = 2;
  spec.seed = 13;
  spec.distinct_journals = 8;
  TempDir mirror("acc-idx-mirror"), work("acc-idx");
  generate(spec, mirror.path());
  auto cfg = config_for(work, file_url(mirror));
  cfg.skip_index = true;
  auto report = run_pipeline(cfg);
  c.check(!report.aborted && report.indexes_created == 0, "load with skipped indexes failed");

  auto conn = open_connection(cfg.db_url);
  auto query_results = [&] {
    std::vector<std::string> out;
    for (const auto& r : verify_database(*conn)) out.push_back(r.label + "=" + std::to_string(r.result));
    for (const auto& t : medline_schema().tables)
      for (const auto& row : conn->query("SELECT * FROM " + t.name + " WHERE pmid IN (SELECT pmid FROM "
                                         "medline_citation ORDER BY pmid LIMIT 25) ORDER BY 1, 2"))
        out.push_back(t.name + ":" + testing_support::render(row));
    return out;
  };
  auto before = query_results();
  auto snap_before = testing_support::snapshot(*conn);

  Loader loader(*conn, medline_schema(), {});
  const std::size_t first = loader.apply_indexes();
  const std::size_t second = loader.apply_indexes();
  c.check(second == 0, fmt::format("second apply created {}", second));
  c.check(first == index_statements(medline_schema(), *dialect_by_name("sqlite")).size(),
          fmt::format("first apply created {}", first));
  c.check(query_results() == before, "query results changed after indexing");
  c.check(testing_support::snapshot(*conn) == snap_before, "contents changed after indexing");

  std::size_t covered = 0;
  for (const auto& t : medline_schema().tables) {
    bool has_pmid_index = false;
    for (const auto& idx : conn->query("SELECT name FROM pragma_index_list(?) WHERE origin = 'c'", {t.name})) {
      auto cols = conn->query("SELECT name FROM pragma_index_info(?) ORDER BY seqno", {idx[0]});
      has_pmid_index = has_pmid_index || (!cols.empty() && std::get<std::string>(cols[0][0]) == "pmid");
    }
    covered += has_pmid_index;
    c.check(has_pmid_index, "no pmid index on " + t.name);
  }
  c.note(fmt::format("{} indexes created then 0; pmid index on {} of 13 tables; {} query results unchanged", first,
                     covered, before.size()));
  return c.outcome();
}

Outcome deletions() {
  Checker c;
  CorpusSpec spec;
  spec.citations = 600;
  spec.files = 3;
  spec.seed = 31;
  spec.deletions = 10;
  CorpusSpec control_spec = spec;
  control_spec.deletions = 0;
  TempDir mirror("acc-del-mirror"), control_mirror("acc-del-control-mirror"), work("acc-del"),
      control("acc-del-control");
  auto m = generate(spec, mirror.path());
  generate(control_spec, control_mirror.path());
  auto r = run_pipeline(config_for(work, file_url(mirror), 100));
  auto rc = run_pipeline(config_for(control, file_url(control_mirror), 100));
  c.check(!r.aborted && !rc.aborted, "aborted");
  c.check(r.deletions_applied == 10 && m.deleted_pmids.size() == 10,
          fmt::format("{} deletions applied", r.deletions_applied));

  auto conn = open_connection(work.db_url());
  auto control_conn = open_connection(control.db_url());
  std::uint64_t removed = 0;
  for (Pmid p : m.deleted_pmids) {
    for (const auto& [table, n] : testing_support::pmid_presence(*conn, p))
      c.check(n == 0, fmt::format("pmid {} still in {}", p, table));
    for (const auto& [_, n] : testing_support::pmid_presence(*control_conn, p)) removed += n;
  }
  // The control minus the deleted citations must equal the run with deletions.
  {
    Transaction tx(*control_conn);
    for (Pmid p : m.deleted_pmids)
      for (const auto& t : medline_schema().tables)
        control_conn->query("DELETE FROM " + t.name + " WHERE pmid = ?", {std::int64_t{p}});
    tx.commit();
  }
  c.check(testing_support::snapshot(*conn) == testing_support::snapshot(*control_conn),
          "remaining contents differ from the deletion-free control");
  c.note(fmt::format("10 pmids absent from all 13 tables ({} control rows); all other rows equal the control",
                     removed));
  return c.outcome();
}

// Child mode: parse one document and print the resident high-water mark.
int parse_peak(const char* path) {
  std::uint64_t citations = 0;
  {
    CitationStream stream{fs::path(path)};
    while (auto ev = stream.next()) ++citations;
  }
  std::ifstream status("/proc/self/status");
  std::uint64_t hwm_kb = 0;
  for (std::string line; std::getline(status, line);)
    if (line.rfind("VmHWM:", 0) == 0) hwm_kb = std::stoull(line.substr(6));
  std::printf("%llu %llu\n", static_cast<unsigned long long>(hwm_kb), static_cast<unsigned long long>(citations));
  return 0;
}

// Generates a document of roughly `target` bytes in a child so the parent's
// footprint stays small.
void write_document(const fs::path& path, std::uint64_t target) {
  CorpusSpec probe;
  probe.citations = 200;
  probe.seed = 5;
  std::ostringstream sample;
  write_single_document(probe, sample);
  CorpusSpec spec = probe;
  spec.citations = std::max<std::uint64_t>(1, target * probe.citations / sample.str().size());
  std::fflush(stdout);
  pid_t pid = fork();
  if (pid == 0) {
    std::ofstream out(path, std::ios::binary);
    write_single_document(spec, out);
    out.close();
    _exit(out ? 0 : 1);
  }
  waitpid(pid, nullptr, 0);
}

std::pair<std::uint64_t, std::uint64_t> measure_parse(const std::string& self, const fs::path& doc) {
  std::string cmd = fmt::format("'{}' --parse-peak '{}'", self, doc.string());
  FILE* p = popen(cmd.c_str(), "r");
  unsigned long long kb = 0, n = 0;
  if (!p || std::fscanf(p, "%llu %llu", &kb, &n) != 2) kb = n = 0;
  if (p) pclose(p);
  return {kb, n};
}

Outcome memory_bound(const std::string& self) {
  Checker c;
  TempDir dir("acc-mem");
  write_document(dir / "small.xml", 2ull << 20);
  write_document(dir / "large.xml", 200ull << 20);
  const auto small_bytes = fs::file_size(dir / "small.xml");
  const auto large_bytes = fs::file_size(dir / "large.xml");
  auto [small_kb, small_n] = measure_parse(self, dir / "small.xml");
  auto [large_kb, large_n] = measure_parse(self, dir / "large.xml");
  c.check(small_kb > 0 && large_kb > 0, "child did not report its peak");
  c.check(large_bytes >= 190ull << 20, fmt::format("large document only {} bytes", large_bytes));
  c.check(large_n > 50 * small_n, fmt::format("{} vs {} citations parsed", large_n, small_n));
  c.check(large_kb <= 2 * small_kb, fmt::format("peak {} KiB vs {} KiB", large_kb, small_kb));
  c.note(fmt::format("peak RSS {} KiB for {:.0f} MB ({} citations) vs {} KiB for {:.1f} MB ({:.2f}x)", large_kb,
                     large_bytes / 1048576.0, large_n, small_kb, small_bytes / 1048576.0,
                     small_kb ? static_cast<double>(large_kb) / small_kb : 0.0));
  return c.outcome();
}

}  // namespace

int main(int argc, char** argv) {
  if (argc == 3 && std::string(argv[1]) == "--parse-peak") return parse_peak(argv[2]);
  spdlog::set_level(spdlog::level::off);
  const std::string self = fs::canonical("/proc/self/exe").string();

  int failed = 0;
  auto report = [&](const char* name, const std::function<Outcome()>& fn) {
    Outcome o;
    auto t0 = std::chrono::steady_clock::now();
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  };

  TempDir rt_mirror("acc-rt-mirror"), rt_work("acc-rt");
  RoundTrip rt;
  report("round-trip fidelity", [&] { return round_trip(rt_mirror, rt_work, rt); });
  report("batch-size invariance", batch_invariance);
  report("crash convergence", crash_convergence);
  report("error taxonomy", error_taxonomy);
  report("deferred indexing equivalence", deferred_indexes);
  report("deletion correctness", deletions);
  report("streaming memory bound", [&] { return memory_bound(self); });
  report("throughput", [&] { return throughput(rt); });
  report("verify subcommand", [&] { return verify_queries(rt); });
  return failed ? 1 : 0;
}
