#include "medbase/schema.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <set>

namespace medbase {
namespace {

ColumnDef col(std::string name, ColumnType type, std::optional<std::size_t> len = std::nullopt,
              bool nullable = true) {
  return ColumnDef{std::move(name), type, len, nullable};
}

ColumnDef pmid_col() { return col("pmid", ColumnType::Integer, std::nullopt, false); }
ColumnDef ordinal(std::string name) { return col(std::move(name), ColumnType::Integer, std::nullopt, false); }
ColumnDef ident(std::string name) { return col(std::move(name), ColumnType::Text, kIdentityLength); }
ColumnDef name_text(std::string name) { return col(std::move(name), ColumnType::Text, kNameLength); }
ColumnDef title_text(std::string name) { return col(std::move(name), ColumnType::Text, kTitleLength); }

TableDef child(std::string name, std::vector<std::string> ordinals, std::vector<ColumnDef> payload,
               std::vector<std::string> extra_indexes = {}) {
  TableDef t;
  t.name = std::move(name);
  t.columns.push_back(pmid_col());
  t.key_columns.push_back("pmid");
  for (auto& o : ordinals) {
    t.columns.push_back(ordinal(o));
    t.key_columns.push_back(o);
  }
  for (auto& c : payload) t.columns.push_back(std::move(c));
  t.indexed_columns.push_back("pmid");
  for (auto& i : extra_indexes) t.indexed_columns.push_back(std::move(i));
  return t;
}

SchemaModel build_medline_schema() {
  SchemaModel m;
  m.version = "medbase-1";

  TableDef citation;
  citation.name = std::string(kCitationTable);
  citation.columns = {
      pmid_col(),
      col("date_created", ColumnType::Date),
      col("date_completed", ColumnType::Date),
      col("date_revised", ColumnType::Date),
      title_text("article_title"),
      col("abstract_text", ColumnType::LongText),
      title_text("journal_title"),
      name_text("journal_iso_abbrev"),
      ident("issn"),
      ident("volume"),
      ident("issue"),
      col("pub_date_year", ColumnType::Integer),
      ident("pub_date_month"),
      ident("pub_date_day"),
      name_text("medline_date_raw"),
      name_text("pagination"),
      ident("language"),
      name_text("country"),
      ident("nlm_unique_id"),
      ident("citation_status"),
  };
  citation.key_columns = {"pmid"};
  citation.indexed_columns = {"pmid", "pub_date_year"};
  m.tables.push_back(std::move(citation));

  m.tables.push_back(child("medline_author", {"author_order"},
                           {name_text("last_name"), name_text("fore_name"), ident("initials"),
                            ident("suffix"), name_text("collective_name"),
                            col("affiliation", ColumnType::LongText)},
                           {"last_name"}));
  m.tables.push_back(child("medline_chemical_list", {"chemical_order"},
                           {ident("registry_number"),
                            col("name_of_substance", ColumnType::Text, kNameLength, false)},
                           {"name_of_substance"}));
  m.tables.push_back(child("medline_mesh", {"mesh_order", "qualifier_order"},
                           {col("descriptor_name", ColumnType::Text, kNameLength, false),
                            col("descriptor_major", ColumnType::Flag, std::nullopt, false),
                            name_text("qualifier_name"), col("qualifier_major", ColumnType::Flag)},
                           {"descriptor_name"}));
  m.tables.push_back(child("medline_keyword_list", {"keyword_order"},
                           {name_text("keyword"), col("keyword_major", ColumnType::Flag)}));
  m.tables.push_back(child("medline_grant", {"grant_order"},
                           {name_text("grant_id"), ident("acronym"), name_text("agency"),
                            name_text("country")}));
  m.tables.push_back(child("medline_publication_type", {"type_order"}, {name_text("publication_type")}));
  m.tables.push_back(child("medline_data_bank", {"data_bank_order", "accession_order"},
                           {name_text("data_bank_name"), ident("accession_number")}));
  m.tables.push_back(child("medline_gene_symbol", {"gene_symbol_order"}, {ident("gene_symbol")}));
  m.tables.push_back(child("medline_comments_corrections", {"comment_order"},
                           {ident("ref_type"), col("ref_pmid", ColumnType::Integer), title_text("note")},
                           {"ref_pmid"}));
  m.tables.push_back(child("medline_personal_name_subject", {"subject_order"},
                           {name_text("last_name"), name_text("fore_name"), ident("initials"),
                            ident("suffix")}));
  m.tables.push_back(child("medline_investigator", {"investigator_order"},
                           {name_text("last_name"), name_text("fore_name"), ident("initials"),
                            ident("suffix"), col("affiliation", ColumnType::LongText)}));
  m.tables.push_back(child("medline_citation_subset", {"subset_order"}, {ident("citation_subset")}));
  return m;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string quote_text(std::string_view s, bool escape_backslash) {
  std::string out;
  out.reserve(s.size() + 2);
  out.push_back('\'');
  for (char c : s) {
    if (c == '\'') {
      out += "''";
    } else if (escape_backslash && c == '\\') {
      out += "\\\\";
    } else {
      out.push_back(c);
    }
  }
  out.push_back('\'');
  return out;
}

std::string quote_value(const SqlValue& v, bool escape_backslash) {
  if (is_null(v)) return "NULL";
  if (auto* n = std::get_if<std::int64_t>(&v)) return std::to_string(*n);
  if (auto* d = std::get_if<double>(&v)) return fmt::format("{:.17g}", *d);
  return quote_text(std::get<std::string>(v), escape_backslash);
}

class ServerDialect final : public Dialect {
 public:
  std::string_view name() const override { return "mysql"; }

  std::string create_table(const TableDef& t, const TableDef& parent) const override {
    std::vector<std::string> parts;
    for (const auto& c : t.columns) {
      std::string type;
      switch (c.type) {
        case ColumnType::Integer: type = c.name == "pmid" ? "INT UNSIGNED" : "INT"; break;
        case ColumnType::Text: type = fmt::format("VARCHAR({})", c.max_length.value_or(kNameLength)); break;
        case ColumnType::LongText: type = "LONGTEXT"; break;
        case ColumnType::Date: type = "DATE"; break;
        case ColumnType::Flag: type = "TINYINT(1)"; break;
        case ColumnType::Real: type = "DOUBLE"; break;
      }
      parts.push_back(fmt::format("  {} {}{}", c.name, type, c.nullable ? "" : " NOT NULL"));
    }
    parts.push_back(fmt::format("  PRIMARY KEY ({})", join(t.key_columns, ", ")));
    if (t.name != parent.name) {
      parts.push_back(fmt::format("  FOREIGN KEY (pmid) REFERENCES {} (pmid)", parent.name));
    }
    return fmt::format("CREATE TABLE {} (\n{}\n) ENGINE=InnoDB DEFAULT CHARSET=utf8mb4;", t.name,
                       join(parts, ",\n"));
  }

  std::string create_index(const TableDef& t, const std::string& column) const override {
    return fmt::format("CREATE INDEX IF NOT EXISTS {} ON {} ({});", index_name(t, column), t.name, column);
  }

  std::string quote_literal(const SqlValue& v) const override { return quote_value(v, true); }

  std::string insert_verb(bool replace) const override { return replace ? "REPLACE INTO" : "INSERT INTO"; }
};

class EmbeddedDialect final : public Dialect {
 public:
  std::string_view name() const override { return "sqlite"; }

  std::string create_table(const TableDef& t, const TableDef& parent) const override {
    bool is_root = t.name == parent.name;
    std::vector<std::string> parts;
    for (const auto& c : t.columns) {
      std::string type;
      switch (c.type) {
        case ColumnType::Integer:
        case ColumnType::Flag: type = "INTEGER"; break;
        case ColumnType::Real: type = "REAL"; break;
        default: type = "TEXT"; break;
      }
      std::string line = fmt::format("  {} {}{}", c.name, type, c.nullable ? "" : " NOT NULL");
      if (is_root && t.key_columns.size() == 1 && t.key_columns[0] == c.name) line += " PRIMARY KEY";
      parts.push_back(std::move(line));
    }
    for (const auto& c : t.columns) {
      if (c.type == ColumnType::Text && c.max_length) {
        // Named so a violation reports the column ("CHECK constraint failed: maxlen_<col>").
        parts.push_back(fmt::format("  CONSTRAINT maxlen_{0} CHECK (length({0}) <= {1})", c.name, *c.max_length));
      }
    }
    if (!is_root) {
      if (!t.key_columns.empty()) parts.push_back(fmt::format("  UNIQUE ({})", join(t.key_columns, ", ")));
      parts.push_back(fmt::format("  FOREIGN KEY (pmid) REFERENCES {} (pmid)", parent.name));
    }
    return fmt::format("CREATE TABLE {} (\n{}\n);", t.name, join(parts, ",\n"));
  }

  std::string create_index(const TableDef& t, const std::string& column) const override {
    return fmt::format("CREATE INDEX IF NOT EXISTS {} ON {} ({});", index_name(t, column), t.name, column);
  }

  std::string quote_literal(const SqlValue& v) const override { return quote_value(v, false); }

  std::string insert_verb(bool replace) const override {
    return replace ? "INSERT OR REPLACE INTO" : "INSERT INTO";
  }
};

const TableDef& root_table(const SchemaModel& model) {
  const TableDef* root = model.table(kCitationTable);
  if (!root) throw InvalidSchema("schema has no medline_citation table");
  return *root;
}

}  // namespace

const ColumnDef* TableDef::column(std::string_view col) const {
  for (const auto& c : columns)
    if (c.name == col) return &c;
  return nullptr;
}

std::optional<std::size_t> TableDef::column_index(std::string_view col) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i].name == col) return i;
  return std::nullopt;
}

const TableDef* SchemaModel::table(std::string_view name) const {
  for (const auto& t : tables)
    if (t.name == name) return &t;
  return nullptr;
}

std::vector<std::string> SchemaModel::table_names() const {
  std::vector<std::string> out;
  for (const auto& t : tables) out.push_back(t.name);
  return out;
}

const SchemaModel& medline_schema() {
  static const SchemaModel model = build_medline_schema();
  return model;
}

void validate(const SchemaModel& model) {
  if (model.tables.size() != kTableCount) {
    throw InvalidSchema(fmt::format("schema must have {} tables, has {}", kTableCount, model.tables.size()));
  }
  std::set<std::string> seen;
  int pmid_primary = 0;
  for (const auto& t : model.tables) {
    if (!seen.insert(t.name).second) throw InvalidSchema("duplicate table name: " + t.name);
    if (!t.column("pmid")) throw InvalidSchema("table " + t.name + " has no pmid column");
    if (std::find(t.indexed_columns.begin(), t.indexed_columns.end(), "pmid") == t.indexed_columns.end()) {
      throw InvalidSchema("table " + t.name + " does not index pmid");
    }
    for (const auto& k : t.key_columns)
      if (!t.column(k)) throw InvalidSchema("table " + t.name + " keys unknown column " + k);
    for (const auto& k : t.indexed_columns)
      if (!t.column(k)) throw InvalidSchema("table " + t.name + " indexes unknown column " + k);

    bool pmid_is_key = t.key_columns == std::vector<std::string>{"pmid"};
    if (pmid_is_key) {
      ++pmid_primary;
      if (t.name != kCitationTable) throw InvalidSchema("only medline_citation may key on pmid alone: " + t.name);
    } else if (t.name == kCitationTable) {
      throw InvalidSchema("medline_citation must use pmid as its primary key");
    }
  }
  if (pmid_primary != 1) throw InvalidSchema("expected exactly one table keyed on pmid");
}

const Dialect& server_dialect() {
  static const ServerDialect d;
  return d;
}

const Dialect& embedded_dialect() {
  static const EmbeddedDialect d;
  return d;
}

const Dialect* dialect_by_name(std::string_view name) {
  if (name == "mysql" || name == "mariadb") return &server_dialect();
  if (name == "sqlite") return &embedded_dialect();
  return nullptr;
}

std::string index_name(const TableDef& table, const std::string& column) {
  return "idx_" + table.name + "_" + column;
}

std::vector<std::string> ddl_statements(const SchemaModel& model, bool defer_indexes, const Dialect& dialect) {
  validate(model);
  const TableDef& root = root_table(model);
  std::vector<std::string> out;
  out.push_back(dialect.create_table(root, root));
  for (const auto& t : model.tables)
    if (t.name != root.name) out.push_back(dialect.create_table(t, root));
  if (!defer_indexes) {
    auto idx = index_statements(model, dialect);
    out.insert(out.end(), idx.begin(), idx.end());
  }
  return out;
}

std::vector<std::string> index_statements(const SchemaModel& model, const Dialect& dialect) {
  validate(model);
  const TableDef& root = root_table(model);
  std::vector<std::string> out;
  auto emit = [&](const TableDef& t) {
    for (const auto& c : t.indexed_columns) out.push_back(dialect.create_index(t, c));
  };
  emit(root);
  for (const auto& t : model.tables)
    if (t.name != root.name) emit(t);
  return out;
}

EnsureOutcome ensure_database(SqlConnection& conn, const SchemaModel& model,
                              const std::vector<std::string>& ignored) {
  validate(model);
  std::set<std::string> present;
  for (auto& name : conn.table_names())
    if (std::find(ignored.begin(), ignored.end(), name) == ignored.end()) present.insert(name);

  auto names = model.table_names();
  std::set<std::string> expected(names.begin(), names.end());

  if (present.empty()) {
    Transaction tx(conn);
    for (const auto& stmt : ddl_statements(model, /*defer_indexes=*/true)) conn.execute(stmt);
    tx.commit();
    return EnsureOutcome::Created;
  }
  if (present == expected) return EnsureOutcome::Exists;

  std::vector<std::string> missing, extra;
  std::set_difference(expected.begin(), expected.end(), present.begin(), present.end(), std::back_inserter(missing));
  std::set_difference(present.begin(), present.end(), expected.begin(), expected.end(), std::back_inserter(extra));
  throw SchemaMismatch(fmt::format("database table set differs from schema (missing: [{}], unexpected: [{}])",
                                   join(missing, ", "), join(extra, ", ")));
}

}  // namespace medbase
