#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "medbase/fetch.hpp"
#include "medbase/sql.hpp"

namespace medbase {

struct LedgerEntry {
  std::string file_name;
  Repository repository = Repository::Baseline;
  std::chrono::system_clock::time_point completed_at = std::chrono::system_clock::now();
  std::uint64_t rows_loaded = 0;
  std::uint64_t errors = 0;
  double duration_seconds = 0.0;
};

// Processed-file ledger, stored in a tool-owned table next to the data so a
// completion and the rows it covers share one durability domain.
class Ledger {
 public:
  static constexpr std::string_view kTable = "medoc_ledger";

  explicit Ledger(SqlConnection& conn);

  bool is_done(std::string_view file_name) const;
  // Persists (or replaces) the entry and syncs it before returning. Throws
  // PersistenceError if the write does not land.
  void mark_done(const LedgerEntry& entry);
  std::vector<LedgerEntry> entries() const;
  std::size_t size() const { return done_.size(); }

  // The only path that removes entries.
  void reset();

  // One file name per line, sorted.
  void write_snapshot(const std::filesystem::path& path) const;

 private:
  SqlConnection& conn_;
  std::set<std::string, std::less<>> done_;
};

struct FileReport {
  std::string name;
  Repository repository = Repository::Baseline;
  std::uint64_t compressed_bytes = 0;
  std::uint64_t citations = 0;
  std::uint64_t deletions = 0;
  std::uint64_t rows_loaded = 0;
  std::uint64_t errors = 0;
  double seconds = 0.0;
};

struct RunReport {
  std::uint64_t files_listed = 0;
  std::uint64_t files_processed = 0;
  std::uint64_t files_skipped = 0;
  std::uint64_t downloads = 0;
  std::uint64_t citations_loaded = 0;
  std::uint64_t deletions_applied = 0;
  std::uint64_t rows_staged = 0;
  std::uint64_t rows_committed = 0;
  std::uint64_t indexes_created = 0;
  std::map<std::string, std::uint64_t> rows_by_table;      // committed
  std::map<std::string, std::uint64_t> insert_statements;  // multi-row INSERTs issued
  std::map<std::string, std::uint64_t> errors_by_code;  // all four codes present
  std::map<std::string, std::uint64_t> unknown_elements;
  double wall_seconds = 0.0;
  std::vector<FileReport> files;
  bool aborted = false;
  std::string abort_reason;

  std::uint64_t total_errors() const;
  std::string summary() const;
};

std::string report_to_json(const RunReport& report);
RunReport report_from_json(std::string_view json);

}  // namespace medbase
