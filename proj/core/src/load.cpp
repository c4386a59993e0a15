#include "medbase/load.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <ctime>
#include <stdexcept>

#include "medbase/error.hpp"
#include "medbase/time_util.hpp"

namespace medbase {
namespace {

// SQLite result codes used below (kept local so callers need not include sqlite3.h).
constexpr int kSqliteFull = 13;
constexpr int kSqliteTooBig = 18;
constexpr int kSqliteConstraint = 19;
constexpr int kSqliteConstraintCheck = kSqliteConstraint | (1 << 8);
constexpr int kSqliteConstraintPrimaryKey = kSqliteConstraint | (6 << 8);
constexpr int kSqliteConstraintUnique = kSqliteConstraint | (8 << 8);

constexpr int kMysqlDataTooLong = 1406;
constexpr int kMysqlDuplicateEntry = 1062;
constexpr int kMysqlTableFull = 1114;

bool contains(std::string_view hay, std::string_view needle) { return hay.find(needle) != std::string_view::npos; }

// Text between the first pair of single quotes after `marker`.
std::optional<std::string> quoted_after(std::string_view msg, std::string_view marker) {
  auto pos = msg.find(marker);
  if (pos == std::string_view::npos) return std::nullopt;
  auto open = msg.find('\'', pos + marker.size());
  if (open == std::string_view::npos) return std::nullopt;
  auto close = msg.find('\'', open + 1);
  if (close == std::string_view::npos) return std::nullopt;
  return std::string(msg.substr(open + 1, close - open - 1));
}

std::optional<Pmid> leading_integer(std::string_view s) {
  Pmid v = 0;
  std::size_t i = 0;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) v = v * 10 + (s[i++] - '0');
  if (i == 0) return std::nullopt;
  return v;
}

std::string sanitize(std::string_view s) {
  std::string out(s);
  for (auto& c : out)
    if (c == '\t' || c == '\n' || c == '\r') c = ' ';
  return out;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (;;) {
    auto tab = line.find('\t', start);
    parts.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return parts;
}

SqlValue text(const std::optional<std::string>& s) {
  if (!s) return std::monostate{};
  return *s;
}

SqlValue integer(const std::optional<std::int64_t>& v) {
  if (!v) return std::monostate{};
  return *v;
}

SqlValue date(const std::optional<CalendarDate>& d) {
  if (!d) return std::monostate{};
  return d->iso();
}

SqlValue flag(bool b) { return static_cast<std::int64_t>(b ? 1 : 0); }

class RowBuilder {
 public:
  RowBuilder(const SchemaModel& model, std::string_view table, std::vector<TableRow>& out)
      : def_(*model.table(table)), out_(out) {}

  Row& start(Pmid pmid) {
    out_.push_back(TableRow{def_.name, Row(def_.columns.size())});
    current_ = &out_.back().values;
    (*current_)[0] = pmid;
    return *current_;
  }

  RowBuilder& set(std::string_view column, SqlValue v) {
    auto idx = def_.column_index(column);
    if (!idx) throw std::logic_error(fmt::format("no column {} in {}", column, def_.name));
    (*current_)[*idx] = std::move(v);
    return *this;
  }

 private:
  const TableDef& def_;
  std::vector<TableRow>& out_;
  Row* current_ = nullptr;
};

}  // namespace

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::FieldTooLong: return "FieldTooLong";
    case ErrorCode::DuplicateKey: return "DuplicateKey";
    case ErrorCode::StorageFull: return "StorageFull";
    case ErrorCode::Other: return "Other";
  }
  return "Other";
}

std::optional<ErrorCode> error_code_from_string(std::string_view s) {
  for (auto c : {ErrorCode::FieldTooLong, ErrorCode::DuplicateKey, ErrorCode::StorageFull, ErrorCode::Other})
    if (to_string(c) == s) return c;
  return std::nullopt;
}

std::string_view to_string(DuplicatePolicy policy) {
  switch (policy) {
    case DuplicatePolicy::Skip: return "skip";
    case DuplicatePolicy::Replace: return "replace";
    case DuplicatePolicy::Fail: return "fail";
  }
  return "skip";
}

std::optional<DuplicatePolicy> duplicate_policy_from_string(std::string_view s) {
  for (auto p : {DuplicatePolicy::Skip, DuplicatePolicy::Replace, DuplicatePolicy::Fail})
    if (to_string(p) == s) return p;
  return std::nullopt;
}

LoadError classify_error(const NativeError& native, std::string_view table) {
  LoadError e;
  e.table = std::string(table);
  e.message = native.message;
  std::string_view msg = native.message;

  if (native.engine == NativeError::Engine::Mysql) {
    switch (native.code) {
      case kMysqlDataTooLong:
        e.code = ErrorCode::FieldTooLong;
        e.field = quoted_after(msg, "for column");
        return e;
      case kMysqlDuplicateEntry:
        e.code = ErrorCode::DuplicateKey;
        if (auto entry = quoted_after(msg, "Duplicate entry")) e.pmid = leading_integer(*entry);
        e.field = "pmid";
        return e;
      case kMysqlTableFull:
        e.code = ErrorCode::StorageFull;
        if (auto t = quoted_after(msg, "The table")) e.table = *t;
        return e;
      default:
        e.code = ErrorCode::Other;
        return e;
    }
  }

  if (native.extended_code == kSqliteConstraintCheck && contains(msg, "maxlen_")) {
    e.code = ErrorCode::FieldTooLong;
    e.field = std::string(msg.substr(msg.find("maxlen_") + 7));
    return e;
  }
  if (native.code == kSqliteTooBig) {
    e.code = ErrorCode::FieldTooLong;
    return e;
  }
  if (native.extended_code == kSqliteConstraintPrimaryKey || native.extended_code == kSqliteConstraintUnique) {
    e.code = ErrorCode::DuplicateKey;
    // "UNIQUE constraint failed: medline_author.pmid, medline_author.author_order"
    if (auto colon = msg.find(": "); colon != std::string_view::npos) {
      auto first = msg.substr(colon + 2);
      first = first.substr(0, first.find(','));
      if (auto dot = first.find('.'); dot != std::string_view::npos) {
        e.table = std::string(first.substr(0, dot));
        e.field = std::string(first.substr(dot + 1));
      }
    }
    return e;
  }
  if (native.code == kSqliteFull) {
    e.code = ErrorCode::StorageFull;
    return e;
  }
  e.code = ErrorCode::Other;
  return e;
}

std::string format_error_line(const LoadError& e) {
  return fmt::format("{}\t{}\t{}\t{}\t{}\t{}", format_timestamp(e.at), to_string(e.code), sanitize(e.table),
                     e.pmid ? std::to_string(*e.pmid) : "", e.field ? sanitize(*e.field) : "", sanitize(e.message));
}

std::optional<LoadError> parse_error_line(std::string_view line) {
  auto parts = split_tabs(line);
  if (parts.size() != 6) return std::nullopt;
  auto code = error_code_from_string(parts[1]);
  if (!code) return std::nullopt;
  LoadError e;
  e.code = *code;
  if (auto at = parse_timestamp(parts[0])) e.at = *at;
  e.table = std::string(parts[2]);
  if (!parts[3].empty()) e.pmid = leading_integer(parts[3]);
  if (!parts[4].empty()) e.field = std::string(parts[4]);
  e.message = std::string(parts[5]);
  return e;
}

std::vector<LoadError> read_error_log(const std::filesystem::path& path) {
  std::vector<LoadError> out;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (auto e = parse_error_line(line)) out.push_back(std::move(*e));
  }
  return out;
}

ErrorLog::ErrorLog(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::app);
  if (!out_) throw Error("cannot open error log " + path.string());
}

void ErrorLog::record(const LoadError& error) {
  out_ << format_error_line(error) << '\n';
  out_.flush();
  ++lines_;
  ++counts_[error.code];
}

std::vector<TableRow> rows_for_citation(const CitationRecord& r, const SchemaModel& model) {
  std::vector<TableRow> out;
  const Pmid pmid = r.pmid;

  RowBuilder citation(model, "medline_citation", out);
  citation.start(pmid);
  citation.set("date_created", date(r.date_created))
      .set("date_completed", date(r.date_completed))
      .set("date_revised", date(r.date_revised))
      .set("article_title", text(r.article_title))
      .set("abstract_text", text(r.abstract_text))
      .set("journal_title", text(r.journal.title))
      .set("journal_iso_abbrev", text(r.journal.iso_abbrev))
      .set("issn", text(r.journal.issn))
      .set("volume", text(r.journal.volume))
      .set("issue", text(r.journal.issue))
      .set("pub_date_year", r.journal.pub_year ? SqlValue(static_cast<std::int64_t>(*r.journal.pub_year)) : SqlValue())
      .set("pub_date_month", text(r.journal.pub_month))
      .set("pub_date_day", text(r.journal.pub_day))
      .set("medline_date_raw", text(r.journal.medline_date_raw))
      .set("pagination", text(r.pagination))
      .set("language", text(r.language))
      .set("country", text(r.country))
      .set("nlm_unique_id", text(r.nlm_unique_id))
      .set("citation_status", text(r.status));

  RowBuilder author(model, "medline_author", out);
  for (const auto& a : r.authors) {
    author.start(pmid);
    author.set("author_order", static_cast<std::int64_t>(a.ordinal))
        .set("last_name", text(a.last_name))
        .set("fore_name", text(a.fore_name))
        .set("initials", text(a.initials))
        .set("suffix", text(a.suffix))
        .set("collective_name", text(a.collective_name))
        .set("affiliation", text(a.affiliation));
  }

  RowBuilder chemical(model, "medline_chemical_list", out);
  std::int64_t n = 0;
  for (const auto& c : r.chemicals) {
    chemical.start(pmid);
    chemical.set("chemical_order", ++n)
        .set("registry_number", c.registry_number.empty() ? SqlValue() : SqlValue(c.registry_number))
        .set("name_of_substance", c.name_of_substance);
  }

  RowBuilder mesh(model, "medline_mesh", out);
  n = 0;
  for (const auto& m : r.mesh) {
    ++n;
    auto base = [&](std::int64_t q) -> RowBuilder& {
      mesh.start(pmid);
      return mesh.set("mesh_order", n)
          .set("qualifier_order", q)
          .set("descriptor_name", m.descriptor)
          .set("descriptor_major", flag(m.descriptor_major));
    };
    if (m.qualifiers.empty()) {
      base(0);
      continue;
    }
    std::int64_t q = 0;
    for (const auto& qual : m.qualifiers) {
      base(++q).set("qualifier_name", qual.name).set("qualifier_major", flag(qual.major));
    }
  }

  RowBuilder keyword(model, "medline_keyword_list", out);
  n = 0;
  for (const auto& k : r.keywords) {
    keyword.start(pmid);
    keyword.set("keyword_order", ++n).set("keyword", k.keyword).set("keyword_major", flag(k.major));
  }

  RowBuilder grant(model, "medline_grant", out);
  n = 0;
  for (const auto& g : r.grants) {
    grant.start(pmid);
    grant.set("grant_order", ++n)
        .set("grant_id", text(g.grant_id))
        .set("acronym", text(g.acronym))
        .set("agency", text(g.agency))
        .set("country", text(g.country));
  }

  RowBuilder ptype(model, "medline_publication_type", out);
  n = 0;
  for (const auto& p : r.publication_types) {
    ptype.start(pmid);
    ptype.set("type_order", ++n).set("publication_type", p);
  }

  RowBuilder bank(model, "medline_data_bank", out);
  n = 0;
  for (const auto& d : r.data_banks) {
    ++n;
    auto base = [&](std::int64_t a) -> RowBuilder& {
      bank.start(pmid);
      return bank.set("data_bank_order", n)
          .set("accession_order", a)
          .set("data_bank_name", d.name.empty() ? SqlValue() : SqlValue(d.name));
    };
    if (d.accession_numbers.empty()) {
      base(0);
      continue;
    }
    std::int64_t a = 0;
    for (const auto& acc : d.accession_numbers) base(++a).set("accession_number", acc);
  }

  RowBuilder gene(model, "medline_gene_symbol", out);
  n = 0;
  for (const auto& g : r.gene_symbols) {
    gene.start(pmid);
    gene.set("gene_symbol_order", ++n).set("gene_symbol", g);
  }

  RowBuilder comment(model, "medline_comments_corrections", out);
  n = 0;
  for (const auto& c : r.comments_corrections) {
    comment.start(pmid);
    comment.set("comment_order", ++n)
        .set("ref_type", c.ref_type.empty() ? SqlValue() : SqlValue(c.ref_type))
        .set("ref_pmid", integer(c.ref_pmid))
        .set("note", text(c.note));
  }

  RowBuilder subject(model, "medline_personal_name_subject", out);
  n = 0;
  for (const auto& p : r.personal_name_subjects) {
    subject.start(pmid);
    subject.set("subject_order", ++n)
        .set("last_name", text(p.last_name))
        .set("fore_name", text(p.fore_name))
        .set("initials", text(p.initials))
        .set("suffix", text(p.suffix));
  }

  RowBuilder investigator(model, "medline_investigator", out);
  n = 0;
  for (const auto& i : r.investigators) {
    investigator.start(pmid);
    investigator.set("investigator_order", ++n)
        .set("last_name", text(i.name.last_name))
        .set("fore_name", text(i.name.fore_name))
        .set("initials", text(i.name.initials))
        .set("suffix", text(i.name.suffix))
        .set("affiliation", text(i.affiliation));
  }

  RowBuilder subset(model, "medline_citation_subset", out);
  n = 0;
  for (const auto& s : r.citation_subsets) {
    subset.start(pmid);
    subset.set("subset_order", ++n).set("citation_subset", s);
  }

  return out;
}

std::size_t utf8_length(std::string_view s) {
  std::size_t n = 0;
  for (unsigned char c : s)
    if ((c & 0xC0) != 0x80) ++n;
  return n;
}

std::uint64_t LoaderStats::total_staged() const {
  std::uint64_t n = 0;
  for (const auto& [_, v] : rows_staged) n += v;
  return n;
}

std::uint64_t LoaderStats::total_committed() const {
  std::uint64_t n = 0;
  for (const auto& [_, v] : rows_committed) n += v;
  return n;
}

Loader::Loader(SqlConnection& conn, const SchemaModel& model, LoaderOptions options, ErrorSink* errors)
    : conn_(conn),
      model_(model),
      dialect_(conn.engine() == NativeError::Engine::Sqlite ? embedded_dialect() : server_dialect()),
      options_(options),
      errors_(errors) {
  if (options_.batch_size == 0) throw std::invalid_argument("batch size must be at least 1");
  for (const auto& t : model_.tables) slots_.push_back(Slot{&t, InsertBuffer{t.name, {}, options_.batch_size}});
}

Loader::Slot& Loader::slot(std::string_view table) {
  for (auto& s : slots_)
    if (s.def->name == table) return s;
  throw std::invalid_argument(fmt::format("unknown table {}", table));
}

const InsertBuffer& Loader::buffer(std::string_view table) const {
  for (const auto& s : slots_)
    if (s.def->name == table) return s.buffer;
  throw std::invalid_argument(fmt::format("unknown table {}", table));
}

std::size_t Loader::pending_rows() const {
  std::size_t n = 0;
  for (const auto& s : slots_) n += s.buffer.rows.size();
  return n;
}

void Loader::report(LoadError e) {
  ++stats_.errors_by_code[e.code];
  if (errors_) errors_->record(e);
}

void Loader::truncate_overflow(const TableDef& t, Row& row) {
  for (std::size_t i = 0; i < t.columns.size(); ++i) {
    const auto& c = t.columns[i];
    auto* s = std::get_if<std::string>(&row[i]);
    if (!s || c.type != ColumnType::Text || !c.max_length || utf8_length(*s) <= *c.max_length) continue;
    std::size_t chars = 0, cut = 0;
    while (cut < s->size()) {
      if ((static_cast<unsigned char>((*s)[cut]) & 0xC0) != 0x80) {
        if (chars == *c.max_length) break;
        ++chars;
      }
      ++cut;
    }
    spdlog::warn("truncated {}.{} for pmid {} from {} to {} characters", t.name, c.name,
                 std::get<std::int64_t>(row[0]), utf8_length(*s), *c.max_length);
    s->resize(cut);
    ++stats_.truncations;
  }
}

StageOutcome Loader::stage_row(std::string_view table, Row row) {
  Slot& s = slot(table);
  if (row.size() != s.def->columns.size()) {
    throw std::invalid_argument(
        fmt::format("row for {} has {} values, table has {} columns", table, row.size(), s.def->columns.size()));
  }
  if (!std::holds_alternative<std::int64_t>(row[0])) throw std::invalid_argument("row has no pmid");
  if (options_.truncate_overflow) truncate_overflow(*s.def, row);

  s.buffer.rows.push_back(std::move(row));
  ++stats_.rows_staged[s.def->name];
  if (s.buffer.rows.size() < s.buffer.threshold) return {false, 0};
  std::size_t n = s.buffer.rows.size();
  flush(s);
  return {true, n};
}

void Loader::stage_citation(const CitationRecord& record) {
  for (auto& r : rows_for_citation(record, model_)) stage_row(r.table, std::move(r.values));
}

std::string Loader::insert_sql(const TableDef& t, const std::vector<Row>& rows, bool replace) const {
  std::string sql = dialect_.insert_verb(replace);
  sql += ' ';
  sql += t.name;
  sql += " (";
  for (std::size_t i = 0; i < t.columns.size(); ++i) {
    if (i) sql += ", ";
    sql += t.columns[i].name;
  }
  sql += ") VALUES ";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    sql += r ? ",(" : "(";
    for (std::size_t i = 0; i < rows[r].size(); ++i) {
      if (i) sql += ',';
      sql += dialect_.quote_literal(rows[r][i]);
    }
    sql += ')';
  }
  sql += ';';
  return sql;
}

std::uint64_t Loader::flush(Slot& s) {
  if (s.buffer.rows.empty()) return 0;
  std::vector<Row> rows = std::move(s.buffer.rows);
  s.buffer.rows.clear();
  const TableDef& t = *s.def;

  std::uint64_t committed = 0;
  Transaction tx(conn_);
  try {
    ++stats_.insert_statements[t.name];
    conn_.execute(insert_sql(t, rows, false));
    committed = rows.size();
  } catch (const DatabaseError& batch_error) {
    LoadError e = classify_error(batch_error.native(), t.name);
    if (e.code == ErrorCode::StorageFull) {
      report(e);
      throw LoadAborted("storage full while inserting into " + t.name + ": " + e.message);
    }
    // Isolate the offending rows; the failed statement left no changes.
    for (auto& row : rows) {
      try {
        ++stats_.insert_statements[t.name];
        conn_.execute(insert_sql(t, {row}, false));
        ++committed;
        continue;
      } catch (const DatabaseError& row_error) {
        e = classify_error(row_error.native(), t.name);
        if (!e.pmid) e.pmid = std::get<std::int64_t>(row[0]);
      }
      if (e.code == ErrorCode::DuplicateKey && options_.policy == DuplicatePolicy::Replace) {
        ++stats_.insert_statements[t.name];
        conn_.execute(insert_sql(t, {row}, true));
        ++committed;
        continue;
      }
      report(e);
      ++stats_.row_errors;
      if (e.code == ErrorCode::StorageFull) {
        throw LoadAborted("storage full while inserting into " + t.name + ": " + e.message);
      }
      if (e.code == ErrorCode::DuplicateKey && options_.policy == DuplicatePolicy::Fail) {
        throw LoadAborted(fmt::format("duplicate key in {} for pmid {}", t.name, *e.pmid));
      }
    }
  }
  try {
    tx.commit();
  } catch (const DatabaseError& commit_error) {
    LoadError e = classify_error(commit_error.native(), t.name);
    report(e);
    throw LoadAborted("commit failed on " + t.name + ": " + e.message);
  }
  stats_.rows_committed[t.name] += committed;
  return committed;
}

std::uint64_t Loader::flush_all() {
  std::uint64_t total = 0;
  for (auto& s : slots_) total += flush(s);
  return total;
}

std::map<std::string, std::int64_t> Loader::delete_citation(Pmid pmid) {
  for (auto& s : slots_) {
    auto& rows = s.buffer.rows;
    auto before = rows.size();
    rows.erase(std::remove_if(rows.begin(), rows.end(),
                              [&](const Row& r) { return std::get<std::int64_t>(r[0]) == pmid; }),
               rows.end());
    stats_.rows_purged += before - rows.size();
  }

  std::map<std::string, std::int64_t> deleted;
  std::string current;
  try {
    Transaction tx(conn_);
    for (const auto& t : model_.tables) {
      current = t.name;
      conn_.query("DELETE FROM " + t.name + " WHERE pmid = ?", {SqlValue(pmid)});
      deleted[t.name] = conn_.changes();
    }
    tx.commit();
  } catch (const DatabaseError& err) {
    LoadError e = classify_error(err.native(), current);
    e.pmid = pmid;
    report(e);
    throw;
  }
  return deleted;
}

std::size_t Loader::apply_indexes() {
  auto before = conn_.index_names();
  try {
    for (const auto& stmt : index_statements(model_, dialect_)) conn_.execute(stmt);
  } catch (const DatabaseError& err) {
    report(classify_error(err.native()));
    throw;
  }
  auto after = conn_.index_names();
  return after.size() > before.size() ? after.size() - before.size() : 0;
}

}  // namespace medbase
