#include "medbase/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <fstream>
#include <map>
#include <unordered_map>

#include "medbase/error.hpp"
#include "medbase/load.hpp"
#include "medbase/parse.hpp"
#include "medbase/schema.hpp"

namespace fs = std::filesystem;

namespace medbase {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Writes to the error log and keeps the run and per-file tallies in step with it.
class RunErrorSink final : public ErrorSink {
 public:
  RunErrorSink(const fs::path& path, RunReport& report) : log_(path), report_(report) {}

  void record(const LoadError& e) override {
    log_.record(e);
    ++report_.errors_by_code[std::string(to_string(e.code))];
    ++file_errors;
  }

  std::uint64_t file_errors = 0;

 private:
  ErrorLog log_;
  RunReport& report_;
};

void remove_quietly(const fs::path& p) {
  std::error_code ec;
  fs::remove(p, ec);
}

}  // namespace

RunReport run_pipeline(const PipelineConfig& config, const PipelineHooks& hooks) {
  config.validate();
  const auto started = Clock::now();
  RunReport report;
  for (auto code : {ErrorCode::FieldTooLong, ErrorCode::DuplicateKey, ErrorCode::StorageFull, ErrorCode::Other})
    report.errors_by_code[std::string(to_string(code))] = 0;

  fs::create_directories(config.workdir);
  if (auto log = config.error_log_path(); log.has_parent_path()) fs::create_directories(log.parent_path());

  auto conn = open_connection(config.db_url);
  const SchemaModel& model = medline_schema();
  std::optional<Ledger> ledger;
  RunErrorSink errors(config.error_log_path(), report);

  try {
    ensure_database(*conn, model);
    ledger.emplace(*conn);
    if (config.reset) ledger->reset();

    auto endpoint = open_endpoint(config.mirror_url);
    ListOptions list_options;
    list_options.baseline = !config.update_only;
    list_options.updates = !config.baseline_only;
    Manifest manifest = list_remote_files(*endpoint, list_options);
    report.files_listed = manifest.entries.size();

    FetchOptions fetch_options;
    if (hooks.sleep) fetch_options.sleep = hooks.sleep;
    if (hooks.on_download_progress) {
      fetch_options.on_progress = [&](const RemoteFileEntry& e, std::uint64_t bytes) { hooks.on_download_progress(e, bytes); };
    }
    Fetcher fetcher(*endpoint, fetch_options);

    LoaderOptions loader_options;
    loader_options.batch_size = config.batch_size;
    loader_options.policy = config.duplicate_policy;
    loader_options.truncate_overflow = config.truncate_overflow;
    Loader loader(*conn, model, loader_options, &errors);

    std::size_t index = 0;
    for (const auto& entry : manifest.entries) {
      ++index;
      if (ledger->is_done(entry.name)) {
        ++report.files_skipped;
        continue;
      }
      const auto file_started = Clock::now();
      FileReport fr;
      fr.name = entry.name;
      fr.repository = entry.repository;
      errors.file_errors = 0;
      const auto committed_before = loader.stats().total_committed();

      auto transfers_before = fetcher.transfers();
      fs::path archive = fetcher.download(entry, config.workdir);
      report.downloads += fetcher.transfers() - transfers_before;
      fr.compressed_bytes = fs::file_size(archive);
      fs::path xml = extract(archive);

      {
        CitationStream stream(xml);
        std::size_t seen_diagnostics = 0;
        auto drain_diagnostics = [&] {
          const auto& diags = stream.diagnostics();
          for (; seen_diagnostics < diags.size(); ++seen_diagnostics) {
            LoadError e;
            e.code = ErrorCode::Other;
            e.table = std::string(kCitationTable);
            e.field = "pmid";
            e.message = fmt::format("{} line {}: {}", entry.file_name(), diags[seen_diagnostics].line,
                                    diags[seen_diagnostics].message);
            errors.record(e);
          }
        };
        // Highest version of each pmid seen in this file; lower versions
        // are dropped and a higher one replaces what was staged.
        std::unordered_map<Pmid, int> versions;
        while (auto event = stream.next()) {
          if (auto* rec = std::get_if<CitationRecord>(&*event)) {
            auto [it, inserted] = versions.try_emplace(rec->pmid, rec->pmid_version);
            if (!inserted) {
              if (rec->pmid_version < it->second) continue;
              if (rec->pmid_version > it->second) {
                loader.delete_citation(rec->pmid);
                it->second = rec->pmid_version;
              }
            }
            loader.stage_citation(*rec);
            ++fr.citations;
            if (hooks.on_citation) hooks.on_citation(entry, fr.citations);
          } else {
            Pmid pmid = std::get<Deletion>(*event).pmid;
            loader.delete_citation(pmid);
            versions.erase(pmid);
            ++fr.deletions;
          }
          drain_diagnostics();
        }
        drain_diagnostics();
        for (const auto& [name, n] : stream.unknown_elements()) report.unknown_elements[name] += n;
      }

      loader.flush_all();
      if (hooks.after_flush) hooks.after_flush(entry);

      fr.rows_loaded = loader.stats().total_committed() - committed_before;
      fr.errors = errors.file_errors;
      fr.seconds = seconds_since(file_started);

      LedgerEntry le;
      le.file_name = entry.name;
      le.repository = entry.repository;
      le.rows_loaded = fr.rows_loaded;
      le.errors = fr.errors;
      le.duration_seconds = fr.seconds;
      ledger->mark_done(le);

      if (!config.keep_files) {
        remove_quietly(xml);
        remove_quietly(archive);
      }
      ++report.files_processed;
      report.citations_loaded += fr.citations;
      report.deletions_applied += fr.deletions;
      report.files.push_back(fr);
      if (hooks.on_file_done) hooks.on_file_done(fr, index, manifest.entries.size());
    }

    if (!config.skip_index) report.indexes_created = loader.apply_indexes();
    report.rows_staged = loader.stats().total_staged();
    report.rows_committed = loader.stats().total_committed();
    report.rows_by_table = loader.stats().rows_committed;
    report.insert_statements = loader.stats().insert_statements;
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    report.aborted = true;
    report.abort_reason = e.what();
    spdlog::error("run aborted: {}", e.what());
  }

  report.wall_seconds = seconds_since(started);
  if (ledger) {
    try {
      ledger->write_snapshot(config.ledger_snapshot_path());
    } catch (const Error& e) {
      spdlog::warn("{}", e.what());
    }
  }
  if (config.report_path) {
    if (config.report_path->has_parent_path()) fs::create_directories(config.report_path->parent_path());
    std::ofstream(*config.report_path, std::ios::trunc) << report_to_json(report) << '\n';
  }
  return report;
}

std::vector<VerifyResult> verify_database(SqlConnection& conn) {
  struct Query {
    const char* label;
    const char* sql;
    bool scalar;
  };
  static const Query kQueries[] = {
      {"citation count", "SELECT COUNT(pmid) FROM medline_citation", true},
      {"distinct journal titles", "SELECT COUNT(DISTINCT journal_title) FROM medline_citation", true},
      {"substance groups",
       "SELECT name_of_substance, COUNT(*) FROM medline_chemical_list GROUP BY name_of_substance", false},
      {"join (representative): human-descriptor citations since 2000",
       "SELECT c.pmid, c.article_title FROM medline_citation c INNER JOIN medline_mesh m ON m.pmid = c.pmid "
       "WHERE m.descriptor_name = 'Humans' AND c.pub_date_year >= 2000",
       false},
  };
  std::vector<VerifyResult> out;
  for (const auto& q : kQueries) {
    VerifyResult r;
    r.label = q.label;
    r.sql = q.sql;
    auto start = Clock::now();
    try {
      auto rows = conn.query(q.sql);
      if (q.scalar) {
        r.result = rows.empty() ? 0 : std::get<std::int64_t>(rows.front().front());
      } else {
        r.result = static_cast<std::int64_t>(rows.size());
      }
    } catch (const Error& e) {
      r.error = e.what();
    }
    r.seconds = seconds_since(start);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<VerifyResult> verify(const PipelineConfig& config) {
  config.validate(false);
  auto conn = open_connection(config.db_url);
  return verify_database(*conn);
}

}  // namespace medbase
