#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "medbase/record.hpp"
#include "medbase/schema.hpp"
#include "medbase/sql.hpp"

namespace medbase {

// Error classes of the load step. The server engine reports these as
// 1406 (data too long), 1062 (duplicate entry) and 1114 (table full).
enum class ErrorCode { FieldTooLong, DuplicateKey, StorageFull, Other };

std::string_view to_string(ErrorCode code);
std::optional<ErrorCode> error_code_from_string(std::string_view s);

enum class DuplicatePolicy { Skip, Replace, Fail };

std::string_view to_string(DuplicatePolicy policy);
std::optional<DuplicatePolicy> duplicate_policy_from_string(std::string_view s);

struct LoadError {
  ErrorCode code = ErrorCode::Other;
  std::string table;
  std::optional<Pmid> pmid;
  std::optional<std::string> field;
  std::string message;
  std::chrono::system_clock::time_point at = std::chrono::system_clock::now();
};

// Total mapping from an engine error onto the four codes. `table` is used
// when the message itself does not name one.
LoadError classify_error(const NativeError& native, std::string_view table = {});

class ErrorSink {
 public:
  virtual ~ErrorSink() = default;
  virtual void record(const LoadError& error) = 0;
};

// `timestamp \t code \t table \t pmid \t field \t message`, one per line.
std::string format_error_line(const LoadError& error);
std::optional<LoadError> parse_error_line(std::string_view line);
std::vector<LoadError> read_error_log(const std::filesystem::path& path);

// Append-only error log file.
class ErrorLog final : public ErrorSink {
 public:
  explicit ErrorLog(const std::filesystem::path& path);
  void record(const LoadError& error) override;

  std::uint64_t lines_written() const { return lines_; }
  const std::map<ErrorCode, std::uint64_t>& counts() const { return counts_; }

 private:
  std::ofstream out_;
  std::uint64_t lines_ = 0;
  std::map<ErrorCode, std::uint64_t> counts_;
};

struct TableRow {
  std::string_view table;
  Row values;
};

// Relational rows for one citation, citation row first. MeSH and data-bank
// entries yield one row per qualifier/accession, or one row with NULLs when
// there are none.
std::vector<TableRow> rows_for_citation(const CitationRecord& record, const SchemaModel& model = medline_schema());

struct InsertBuffer {
  std::string table;
  std::vector<Row> rows;
  std::size_t threshold = 1;
};

struct LoaderOptions {
  std::size_t batch_size = 5000;  // insert_command_limit
  DuplicatePolicy policy = DuplicatePolicy::Skip;
  bool truncate_overflow = false;
};

struct StageOutcome {
  bool flushed = false;
  std::size_t rows = 0;  // rows carried by the flush
};

struct LoaderStats {
  std::map<std::string, std::uint64_t> rows_staged;
  std::map<std::string, std::uint64_t> rows_committed;
  std::map<std::string, std::uint64_t> insert_statements;
  std::map<ErrorCode, std::uint64_t> errors_by_code;
  std::uint64_t row_errors = 0;
  std::uint64_t rows_purged = 0;
  std::uint64_t truncations = 0;

  std::uint64_t total_staged() const;
  std::uint64_t total_committed() const;
};

// Single-writer loader: per-table buffers flushed as one multi-row INSERT
// inside one transaction. A failing batch is replayed row by row in the same
// transaction so each offending row is logged and handled by the duplicate
// policy. StorageFull and duplicates under Fail raise LoadAborted.
class Loader {
 public:
  Loader(SqlConnection& conn, const SchemaModel& model, LoaderOptions options, ErrorSink* errors = nullptr);

  StageOutcome stage_row(std::string_view table, Row row);
  void stage_citation(const CitationRecord& record);

  // Flushes every non-empty buffer; returns rows committed.
  std::uint64_t flush_all();

  // Removes the pmid from all tables in one transaction, and drops any of
  // its rows still buffered. Returns rows deleted per table.
  std::map<std::string, std::int64_t> delete_citation(Pmid pmid);

  // Applies the deferred index statements; returns the number created.
  std::size_t apply_indexes();

  std::size_t pending_rows() const;
  const LoaderStats& stats() const { return stats_; }
  const InsertBuffer& buffer(std::string_view table) const;

 private:
  struct Slot {
    const TableDef* def;
    InsertBuffer buffer;
  };

  Slot& slot(std::string_view table);
  std::uint64_t flush(Slot& s);
  std::string insert_sql(const TableDef& t, const std::vector<Row>& rows, bool replace) const;
  void truncate_overflow(const TableDef& t, Row& row);
  void report(LoadError e);

  SqlConnection& conn_;
  const SchemaModel& model_;
  const Dialect& dialect_;
  LoaderOptions options_;
  ErrorSink* errors_;
  std::vector<Slot> slots_;
  LoaderStats stats_;
};

std::size_t utf8_length(std::string_view s);

}  // namespace medbase
