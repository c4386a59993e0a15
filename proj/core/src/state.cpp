#include "medbase/state.hpp"

#include <fmt/format.h>

#include <fstream>
#include <nlohmann/json.hpp>

#include "medbase/error.hpp"
#include "medbase/time_util.hpp"

namespace medbase {

Ledger::Ledger(SqlConnection& conn) : conn_(conn) {
  try {
    conn_.execute(
        "CREATE TABLE IF NOT EXISTS medoc_ledger (\n"
        "  file_name TEXT NOT NULL PRIMARY KEY,\n"
        "  repository TEXT NOT NULL,\n"
        "  completed_at TEXT NOT NULL,\n"
        "  rows_loaded INTEGER NOT NULL,\n"
        "  errors INTEGER NOT NULL,\n"
        "  duration_seconds REAL NOT NULL\n"
        ");");
    for (auto& row : conn_.query("SELECT file_name FROM medoc_ledger")) done_.insert(std::get<std::string>(row[0]));
  } catch (const DatabaseError& e) {
    throw PersistenceError(std::string("cannot open ledger: ") + e.what());
  }
}

bool Ledger::is_done(std::string_view file_name) const { return done_.find(file_name) != done_.end(); }

void Ledger::mark_done(const LedgerEntry& e) {
  try {
    conn_.execute("PRAGMA synchronous=FULL");
    conn_.query(
        "INSERT OR REPLACE INTO medoc_ledger (file_name, repository, completed_at, rows_loaded, errors, "
        "duration_seconds) VALUES (?, ?, ?, ?, ?, ?)",
        {e.file_name, std::string(to_string(e.repository)), format_timestamp(e.completed_at),
         static_cast<std::int64_t>(e.rows_loaded), static_cast<std::int64_t>(e.errors), e.duration_seconds});
    conn_.execute("PRAGMA synchronous=NORMAL");
  } catch (const DatabaseError& err) {
    throw PersistenceError("cannot record " + e.file_name + " in ledger: " + err.what());
  }
  done_.insert(e.file_name);
}

std::vector<LedgerEntry> Ledger::entries() const {
  std::vector<LedgerEntry> out;
  auto rows = conn_.query(
      "SELECT file_name, repository, completed_at, rows_loaded, errors, duration_seconds FROM medoc_ledger "
      "ORDER BY file_name");
  for (auto& r : rows) {
    LedgerEntry e;
    e.file_name = std::get<std::string>(r[0]);
    e.repository = repository_from_string(std::get<std::string>(r[1])).value_or(Repository::Baseline);
    if (auto at = parse_timestamp(std::get<std::string>(r[2]))) e.completed_at = *at;
    e.rows_loaded = static_cast<std::uint64_t>(std::get<std::int64_t>(r[3]));
    e.errors = static_cast<std::uint64_t>(std::get<std::int64_t>(r[4]));
    if (auto* d = std::get_if<double>(&r[5])) {
      e.duration_seconds = *d;
    } else if (auto* i = std::get_if<std::int64_t>(&r[5])) {
      e.duration_seconds = static_cast<double>(*i);
    }
    out.push_back(std::move(e));
  }
  return out;
}

void Ledger::reset() {
  try {
    conn_.execute("DELETE FROM medoc_ledger");
  } catch (const DatabaseError& err) {
    throw PersistenceError(std::string("cannot reset ledger: ") + err.what());
  }
  done_.clear();
}

void Ledger::write_snapshot(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  for (const auto& name : done_) out << name << '\n';
  if (!out) throw PersistenceError("cannot write ledger snapshot " + path.string());
}

std::uint64_t RunReport::total_errors() const {
  std::uint64_t n = 0;
  for (const auto& [_, v] : errors_by_code) n += v;
  return n;
}

std::string RunReport::summary() const {
  std::string s;
  s += fmt::format("files: {} listed, {} processed, {} skipped, {} downloaded\n", files_listed, files_processed,
                   files_skipped, downloads);
  s += fmt::format("citations loaded: {}, deletions applied: {}\n", citations_loaded, deletions_applied);
  s += fmt::format("rows: {} staged, {} committed; indexes created: {}\n", rows_staged, rows_committed,
                   indexes_created);
  s += "errors:";
  for (const auto& [code, n] : errors_by_code) s += fmt::format(" {}={}", code, n);
  s += '\n';
  if (!unknown_elements.empty()) {
    std::uint64_t total = 0;
    for (const auto& [_, n] : unknown_elements) total += n;
    s += fmt::format("unrecognised elements ignored: {} ({} distinct)\n", total, unknown_elements.size());
  }
  s += fmt::format("wall time: {:.2f} s", wall_seconds);
  if (wall_seconds > 0) s += fmt::format(" ({:.1f} citations/s)", citations_loaded / wall_seconds);
  s += '\n';
  if (aborted) s += "ABORTED: " + abort_reason + '\n';
  return s;
}

std::string report_to_json(const RunReport& r) {
  nlohmann::json j;
  j["files_listed"] = r.files_listed;
  j["files_processed"] = r.files_processed;
  j["files_skipped"] = r.files_skipped;
  j["downloads"] = r.downloads;
  j["citations_loaded"] = r.citations_loaded;
  j["deletions_applied"] = r.deletions_applied;
  j["rows_staged"] = r.rows_staged;
  j["rows_committed"] = r.rows_committed;
  j["indexes_created"] = r.indexes_created;
  j["rows_by_table"] = r.rows_by_table;
  j["insert_statements"] = r.insert_statements;
  j["errors_by_code"] = r.errors_by_code;
  j["unknown_elements"] = r.unknown_elements;
  j["wall_seconds"] = r.wall_seconds;
  j["aborted"] = r.aborted;
  j["abort_reason"] = r.abort_reason;
  auto files = nlohmann::json::array();
  for (const auto& f : r.files) {
    files.push_back({{"name", f.name},
                     {"repository", std::string(to_string(f.repository))},
                     {"compressed_bytes", f.compressed_bytes},
                     {"citations", f.citations},
                     {"deletions", f.deletions},
                     {"rows_loaded", f.rows_loaded},
                     {"errors", f.errors},
                     {"seconds", f.seconds}});
  }
  j["files"] = std::move(files);
  return j.dump(2);
}

RunReport report_from_json(std::string_view text) try {
  auto j = nlohmann::json::parse(text);
  RunReport r;
  r.files_listed = j.value("files_listed", 0ull);
  r.files_processed = j.at("files_processed").get<std::uint64_t>();
  r.files_skipped = j.at("files_skipped").get<std::uint64_t>();
  r.downloads = j.value("downloads", 0ull);
  r.citations_loaded = j.at("citations_loaded").get<std::uint64_t>();
  r.deletions_applied = j.at("deletions_applied").get<std::uint64_t>();
  r.rows_staged = j.value("rows_staged", 0ull);
  r.rows_committed = j.value("rows_committed", 0ull);
  r.indexes_created = j.value("indexes_created", 0ull);
  r.rows_by_table = j.value("rows_by_table", std::map<std::string, std::uint64_t>{});
  r.insert_statements = j.value("insert_statements", std::map<std::string, std::uint64_t>{});
  r.errors_by_code = j.at("errors_by_code").get<std::map<std::string, std::uint64_t>>();
  r.unknown_elements = j.value("unknown_elements", std::map<std::string, std::uint64_t>{});
  r.wall_seconds = j.at("wall_seconds").get<double>();
  r.aborted = j.value("aborted", false);
  r.abort_reason = j.value("abort_reason", std::string());
  for (const auto& f : j.at("files")) {
    FileReport fr;
    fr.name = f.at("name").get<std::string>();
    fr.repository = repository_from_string(f.at("repository").get<std::string>()).value_or(Repository::Baseline);
    fr.compressed_bytes = f.value("compressed_bytes", 0ull);
    fr.citations = f.value("citations", 0ull);
    fr.deletions = f.value("deletions", 0ull);
    fr.rows_loaded = f.value("rows_loaded", 0ull);
    fr.errors = f.value("errors", 0ull);
    fr.seconds = f.value("seconds", 0.0);
    r.files.push_back(std::move(fr));
  }
  return r;
} catch (const nlohmann::json::exception& e) {
  throw Error(std::string("malformed run report: ") + e.what());
}

}  // namespace medbase
