#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "medbase/sql.hpp"

namespace medbase {

enum class ColumnType {
  Integer,
  Text,      // bounded by ColumnDef::max_length
  LongText,  // large object, unbounded
  Date,      // ISO yyyy-mm-dd
  Flag,      // 0/1
  Real,
};

struct ColumnDef {
  std::string name;
  ColumnType type = ColumnType::Text;
  std::optional<std::size_t> max_length;
  bool nullable = true;
};

struct TableDef {
  std::string name;
  std::vector<ColumnDef> columns;
  // medline_citation: {pmid} primary key. Child tables: pmid plus the
  // ordinal columns that make a row unique within a citation.
  std::vector<std::string> key_columns;
  std::vector<std::string> indexed_columns;

  const ColumnDef* column(std::string_view col) const;
  std::optional<std::size_t> column_index(std::string_view col) const;
};

struct SchemaModel {
  std::vector<TableDef> tables;
  std::string version;

  const TableDef* table(std::string_view name) const;
  std::vector<std::string> table_names() const;
};

inline constexpr std::string_view kCitationTable = "medline_citation";
inline constexpr std::size_t kTableCount = 13;

// Length caps for bounded text columns.
inline constexpr std::size_t kIdentityLength = 64;
inline constexpr std::size_t kNameLength = 255;
inline constexpr std::size_t kTitleLength = 4000;

// The 13-table MEDLINE model, citation table first.
const SchemaModel& medline_schema();

// Throws InvalidSchema when the model violates the structural invariants.
void validate(const SchemaModel& model);

class Dialect {
 public:
  virtual ~Dialect() = default;
  virtual std::string_view name() const = 0;
  virtual std::string create_table(const TableDef& table, const TableDef& parent) const = 0;
  virtual std::string create_index(const TableDef& table, const std::string& column) const = 0;
  virtual std::string quote_literal(const SqlValue& value) const = 0;
  // Prefix up to and including "INTO"; `replace` selects upsert semantics.
  virtual std::string insert_verb(bool replace) const = 0;
};

// MariaDB/MySQL server dialect (used for `schema dump`).
const Dialect& server_dialect();
// Embedded engine dialect (SQLite), the one the loader executes against.
const Dialect& embedded_dialect();
const Dialect* dialect_by_name(std::string_view name);

std::string index_name(const TableDef& table, const std::string& column);

std::vector<std::string> ddl_statements(const SchemaModel& model, bool defer_indexes,
                                        const Dialect& dialect = embedded_dialect());

// Create-if-absent index statements; safe to re-apply.
std::vector<std::string> index_statements(const SchemaModel& model,
                                          const Dialect& dialect = embedded_dialect());

enum class EnsureOutcome { Created, Exists };

// Builds the schema on an empty database. Throws SchemaMismatch when the
// database already holds a different table set. Tables named in `ignored`
// (tool-owned bookkeeping) are excluded from the comparison.
EnsureOutcome ensure_database(SqlConnection& conn, const SchemaModel& model,
                              const std::vector<std::string>& ignored = {"medoc_ledger"});

}  // namespace medbase
