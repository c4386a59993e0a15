#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "medbase/config.hpp"
#include "medbase/corpusgen.hpp"
#include "medbase/error.hpp"
#include "medbase/load.hpp"
#include "medbase/pipeline.hpp"
#include "medbase/schema.hpp"
#include "medbase/state.hpp"

namespace fs = std::filesystem;
using namespace medbase;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitAborted = 1;
constexpr int kExitConfig = 2;

// Options that map onto configuration keys; only flags actually given on
// the command line land in the CLI layer.
struct ConfigFlags {
  std::optional<std::string> config_file;
  std::optional<std::string> db_url, mirror_url, workdir, on_duplicate, report_path, error_log;
  std::optional<long long> batch_size;
  bool truncate_overflow = false, skip_index = false, baseline_only = false, update_only = false, keep_files = false;

  void add_db(CLI::App* app) {
    app->add_option("--config", config_file, "Config file (default: ./medbase.toml when present)");
    app->add_option("--db-url", db_url, "Database URL, e.g. sqlite:medline.db");
  }

  void add_run(CLI::App* app) {
    add_db(app);
    app->add_option("--mirror-url", mirror_url, "Repository root (file://, http(s)://, ftp://)");
    app->add_option("--workdir", workdir, "Download and extraction directory");
    app->add_option("--batch-size", batch_size, "Rows buffered per table before one multi-row insert");
    app->add_option("--on-duplicate", on_duplicate, "Duplicate key policy")
        ->check(CLI::IsMember({"skip", "replace", "fail"}));
    app->add_flag("--truncate-overflow", truncate_overflow, "Truncate over-long values instead of rejecting rows");
    app->add_flag("--skip-index", skip_index, "Do not build indexes after loading");
    app->add_flag("--baseline-only", baseline_only, "Only process the baseline repository");
    app->add_flag("--update-only", update_only, "Only process the update repository");
    app->add_flag("--keep-files", keep_files, "Keep downloaded and extracted files");
    app->add_option("--report-path", report_path, "Write the run report as JSON");
    app->add_option("--error-log", error_log, "Error log path (default: <workdir>/errors.log)");
  }

  PipelineConfig resolve() const {
    ConfigLayer file;
    if (config_file) {
      file = read_config_file(*config_file);
    } else if (fs::exists("medbase.toml")) {
      file = read_config_file("medbase.toml");
    }
    ConfigLayer cli;
    auto put = [&](const char* key, const std::optional<std::string>& v) {
      if (v) cli[key] = *v;
    };
    put("db_url", db_url);
    put("mirror_url", mirror_url);
    put("workdir", workdir);
    put("on_duplicate", on_duplicate);
    put("report_path", report_path);
    put("error_log", error_log);
    if (batch_size) cli["batch_size"] = std::to_string(*batch_size);
    if (truncate_overflow) cli["truncate_overflow"] = "true";
    if (skip_index) cli["skip_index"] = "true";
    if (baseline_only) cli["baseline_only"] = "true";
    if (update_only) cli["update_only"] = "true";
    if (keep_files) cli["keep_files"] = "true";
    return resolve_config(file, environment_layer(), cli);
  }
};

std::string human_bytes(std::uint64_t n) {
  if (n >= (1u << 20)) return fmt::format("{:.1f} MiB", n / 1048576.0);
  if (n >= 1024) return fmt::format("{:.1f} KiB", n / 1024.0);
  return fmt::format("{} B", n);
}

int cmd_run(const ConfigFlags& flags, bool reset) {
  PipelineConfig config = flags.resolve();
  config.reset = reset;
  PipelineHooks hooks;
  hooks.on_file_done = [](const FileReport& f, std::size_t i, std::size_t n) {
    fmt::print("[{}/{}] {} ({}) {}, {} citations, {} rows, {} errors, {:.2f} s\n", i, n, f.name,
               to_string(f.repository), human_bytes(f.compressed_bytes), f.citations, f.rows_loaded, f.errors,
               f.seconds);
    std::fflush(stdout);
  };
  RunReport report = run_pipeline(config, hooks);
  fmt::print("{}", report.summary());
  return report.aborted ? kExitAborted : kExitOk;
}

int cmd_verify(const ConfigFlags& flags) {
  PipelineConfig config = flags.resolve();
  auto results = verify(config);
  bool failed = false;
  for (const auto& r : results) {
    if (r.error) {
      failed = true;
      fmt::print("{:<64} {:>10.3f} s  ERROR: {}\n", r.label, r.seconds, *r.error);
    } else {
      fmt::print("{:<64} {:>10.3f} s  {}\n", r.label, r.seconds, r.result);
    }
  }
  return failed ? kExitAborted : kExitOk;
}

int cmd_index(const ConfigFlags& flags) {
  PipelineConfig config = flags.resolve();
  config.validate(false);
  auto conn = open_connection(config.db_url);
  ensure_database(*conn, medline_schema());
  Loader loader(*conn, medline_schema(), {});
  fmt::print("indexes created: {}\n", loader.apply_indexes());
  return kExitOk;
}

int cmd_schema_dump(const std::string& dialect_name, bool deferred, const std::optional<std::string>& out_path) {
  const Dialect* dialect = dialect_by_name(dialect_name);
  if (!dialect) throw ConfigError("unknown dialect '" + dialect_name + "' (sqlite, mysql, mariadb)");
  std::string text;
  for (const auto& stmt : ddl_statements(medline_schema(), deferred, *dialect)) text += stmt + "\n\n";
  if (deferred) {
    text += "-- deferred: apply after loading\n";
    for (const auto& stmt : index_statements(medline_schema(), *dialect)) text += stmt + "\n";
  }
  if (!out_path) {
    fmt::print("{}", text);
    return kExitOk;
  }
  std::ofstream out(*out_path, std::ios::binary | std::ios::trunc);
  out << text;
  out.flush();
  if (!out) throw Error("cannot write " + *out_path);
  spdlog::info("wrote {} bytes of {} DDL to {}", text.size(), dialect->name(), *out_path);
  return kExitOk;
}

int cmd_report(const ConfigFlags& flags, const std::optional<std::string>& report_file, bool show_ledger) {
  if (!report_file && !show_ledger) throw ConfigError("report needs --report-path or --ledger");
  if (report_file) {
    std::ifstream in(*report_file, std::ios::binary);
    if (!in) throw ConfigError("cannot read report " + *report_file);
    std::stringstream ss;
    ss << in.rdbuf();
    RunReport r = report_from_json(ss.str());
    for (const auto& f : r.files)
      fmt::print("{}\t{}\t{} citations\t{} rows\t{} errors\t{:.2f} s\n", f.name, to_string(f.repository), f.citations,
                 f.rows_loaded, f.errors, f.seconds);
    fmt::print("{}", r.summary());
  }
  if (show_ledger) {
    PipelineConfig config = flags.resolve();
    config.validate(false);
    auto conn = open_connection(config.db_url);
    Ledger ledger(*conn);
    for (const auto& e : ledger.entries()) {
      auto t = std::chrono::system_clock::to_time_t(e.completed_at);
      std::tm tm{};
      gmtime_r(&t, &tm);
      char stamp[32];
      std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
      fmt::print("{}\t{}\t{}\t{} rows\t{} errors\t{:.2f} s\n", e.file_name, to_string(e.repository), stamp,
                 e.rows_loaded, e.errors, e.duration_seconds);
    }
    fmt::print("{} files recorded\n", ledger.size());
  }
  return kExitOk;
}
}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("medbase"));

  CLI::App app{"Download, parse and load MEDLINE citation archives into a relational database"};
  app.require_subcommand(1);

  ConfigFlags flags;
  bool reset = false;
  auto* run = app.add_subcommand("run", "Run the download/parse/load pipeline");
  flags.add_run(run);
  run->add_flag("--reset", reset, "Forget every processed file before running");

  auto* verify_cmd = app.add_subcommand("verify", "Run the canned verification queries");
  flags.add_db(verify_cmd);

  auto* index_cmd = app.add_subcommand("index", "Build the deferred indexes");
  flags.add_db(index_cmd);

  CorpusSpec spec;
  std::string out_dir;
  std::optional<std::uint32_t> update_files;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic corpus with a manifest of expected counts");
  gen->add_option("--citations", spec.citations, "Citation elements to write, duplicates included")->required();
  gen->add_option("--files", spec.files, "Number of archives")->check(CLI::PositiveNumber);
  gen->add_option("--seed", spec.seed, "Generator seed");
  gen->add_option("--out", out_dir, "Output directory")->required();
  gen->add_option("--duplicates", spec.duplicate_pmids, "Re-sent copies of earlier citations");
  gen->add_option("--overlong", spec.overlong_fields, "Citations with an over-long author initials value");
  gen->add_option("--deletions", spec.deletions, "DeleteCitation entries in the last archive");
  gen->add_option("--journals", spec.distinct_journals, "Distinct journal titles")->check(CLI::PositiveNumber);
  gen->add_option("--update-files", update_files, "Archives placed in the update repository");
  gen->add_option("--abstract-sentences", spec.abstract_sentences, "Sentences per abstract");

  auto* schema = app.add_subcommand("schema", "Schema utilities");
  schema->require_subcommand(1);
  std::string dialect = "sqlite";
  bool deferred = true;
  auto* dump = schema->add_subcommand("dump", "Print the DDL");
  dump->add_option("--dialect", dialect, "sqlite, mysql or mariadb");
  dump->add_flag("!--inline-indexes", deferred, "Emit indexes with the tables instead of as a deferred step");
  std::optional<std::string> dump_out;
  dump->add_option("--out", dump_out, "Write the DDL to this file instead of standard output");

  std::optional<std::string> report_file;
  bool show_ledger = false;
  auto* report = app.add_subcommand("report", "Print a saved run report or the ledger");
  flags.add_db(report);
  report->add_option("--report-path", report_file, "Report JSON written by run");
  report->add_flag("--ledger", show_ledger, "List processed files recorded in the database");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return cmd_run(flags, reset);
    if (*verify_cmd) return cmd_verify(flags);
    if (*index_cmd) return cmd_index(flags);
    if (*gen) {
      spec.update_files = update_files;
      auto m = generate(spec, out_dir);
      fmt::print("wrote {} archives to {} ({} citations expected in the database)\n", m.files.size(), out_dir,
                 m.citations_loaded);
      return kExitOk;
    }
    if (*dump) return cmd_schema_dump(dialect, deferred, dump_out);
    if (*report) return cmd_report(flags, report_file, show_ledger);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InvalidSpec& e) {
    std::cerr << "invalid corpus spec: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitAborted;
  }
  return kExitOk;
}
