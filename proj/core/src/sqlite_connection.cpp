#include <sqlite3.h>

#include <filesystem>
#include <utility>

#include "medbase/sql.hpp"

namespace medbase {
namespace {

NativeError native_from(sqlite3* db, int rc) {
  NativeError e;
  e.engine = NativeError::Engine::Sqlite;
  e.extended_code = db ? sqlite3_extended_errcode(db) : rc;
  e.code = e.extended_code & 0xff;
  e.message = db ? sqlite3_errmsg(db) : sqlite3_errstr(rc);
  return e;
}

struct StmtDeleter {
  void operator()(sqlite3_stmt* s) const { sqlite3_finalize(s); }
};
using StmtPtr = std::unique_ptr<sqlite3_stmt, StmtDeleter>;

class SqliteConnection final : public SqlConnection {
 public:
  explicit SqliteConnection(const std::string& path) {
    int flags = SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_NOMUTEX;
    int rc = sqlite3_open_v2(path.c_str(), &db_, flags, nullptr);
    if (rc != SQLITE_OK) {
      std::string msg = db_ ? sqlite3_errmsg(db_) : sqlite3_errstr(rc);
      sqlite3_close(db_);
      db_ = nullptr;
      throw ConnectionError("cannot open database '" + path + "': " + msg);
    }
    sqlite3_busy_timeout(db_, 5000);
    sqlite3_extended_result_codes(db_, 1);
    if (path != ":memory:") {
      // WAL with synchronous=NORMAL survives process kills; the ledger forces
      // a checkpoint for its own commits.
      execute("PRAGMA journal_mode=WAL; PRAGMA synchronous=NORMAL;");
    }
  }

  ~SqliteConnection() override { sqlite3_close(db_); }

  void execute(std::string_view sql) override {
    std::string text(sql);
    char* err = nullptr;
    int rc = sqlite3_exec(db_, text.c_str(), nullptr, nullptr, &err);
    if (err) sqlite3_free(err);
    if (rc != SQLITE_OK) throw DatabaseError(native_from(db_, rc));
    changes_ = sqlite3_changes(db_);
  }

  std::vector<Row> query(std::string_view sql, const std::vector<SqlValue>& params) override {
    sqlite3_stmt* raw = nullptr;
    int rc = sqlite3_prepare_v2(db_, sql.data(), static_cast<int>(sql.size()), &raw, nullptr);
    if (rc != SQLITE_OK) throw DatabaseError(native_from(db_, rc));
    StmtPtr stmt(raw);

    for (std::size_t i = 0; i < params.size(); ++i) {
      int idx = static_cast<int>(i + 1);
      const auto& p = params[i];
      if (is_null(p)) {
        rc = sqlite3_bind_null(stmt.get(), idx);
      } else if (auto* n = std::get_if<std::int64_t>(&p)) {
        rc = sqlite3_bind_int64(stmt.get(), idx, *n);
      } else if (auto* d = std::get_if<double>(&p)) {
        rc = sqlite3_bind_double(stmt.get(), idx, *d);
      } else {
        const auto& s = std::get<std::string>(p);
        rc = sqlite3_bind_text(stmt.get(), idx, s.data(), static_cast<int>(s.size()), SQLITE_TRANSIENT);
      }
      if (rc != SQLITE_OK) throw DatabaseError(native_from(db_, rc));
    }

    std::vector<Row> rows;
    while ((rc = sqlite3_step(stmt.get())) == SQLITE_ROW) {
      int n = sqlite3_column_count(stmt.get());
      Row row;
      row.reserve(static_cast<std::size_t>(n));
      for (int c = 0; c < n; ++c) {
        switch (sqlite3_column_type(stmt.get(), c)) {
          case SQLITE_NULL:
            row.emplace_back(std::monostate{});
            break;
          case SQLITE_INTEGER:
            row.emplace_back(static_cast<std::int64_t>(sqlite3_column_int64(stmt.get(), c)));
            break;
          case SQLITE_FLOAT:
            row.emplace_back(sqlite3_column_double(stmt.get(), c));
            break;
          default: {
            auto* text = reinterpret_cast<const char*>(sqlite3_column_text(stmt.get(), c));
            int len = sqlite3_column_bytes(stmt.get(), c);
            row.emplace_back(std::string(text ? text : "", static_cast<std::size_t>(len)));
          }
        }
      }
      rows.push_back(std::move(row));
    }
    if (rc != SQLITE_DONE) throw DatabaseError(native_from(db_, rc));
    changes_ = sqlite3_changes(db_);
    return rows;
  }

  std::int64_t changes() const override { return changes_; }

  std::vector<std::string> table_names() override {
    return names_of("SELECT name FROM sqlite_master WHERE type='table' AND name NOT LIKE 'sqlite_%' ORDER BY name");
  }

  std::vector<std::string> index_names() override {
    // Explicitly created indexes only; UNIQUE/PK autoindexes are part of the table.
    return names_of("SELECT name FROM sqlite_master WHERE type='index' AND sql IS NOT NULL ORDER BY name");
  }

  NativeError::Engine engine() const override { return NativeError::Engine::Sqlite; }

 private:
  std::vector<std::string> names_of(const char* sql) {
    std::vector<std::string> out;
    for (auto& r : query(sql, {})) out.push_back(std::get<std::string>(r.at(0)));
    return out;
  }

  sqlite3* db_ = nullptr;
  std::int64_t changes_ = 0;
};

}  // namespace

std::unique_ptr<SqlConnection> open_connection(const std::string& db_url) {
  std::string path;
  if (db_url.rfind("sqlite:", 0) == 0) {
    path = db_url.substr(7);
    if (path.rfind("//", 0) == 0) path = path.substr(2);
  } else if (db_url.find("://") != std::string::npos) {
    throw ConfigError("unsupported database URL '" + db_url + "' (this build supports sqlite: only)");
  } else {
    path = db_url;
  }
  if (path.empty()) throw ConfigError("empty database path in '" + db_url + "'");
  if (path != ":memory:") {
    auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty() && !std::filesystem::is_directory(parent)) {
      throw ConnectionError("database directory does not exist: " + parent.string());
    }
  }
  return std::make_unique<SqliteConnection>(path);
}

Transaction::Transaction(SqlConnection& conn) : conn_(conn) { conn_.execute("BEGIN"); }

Transaction::~Transaction() {
  if (!done_) {
    try {
      conn_.execute("ROLLBACK");
    } catch (...) {
    }
  }
}

void Transaction::commit() {
  conn_.execute("COMMIT");
  done_ = true;
}

}  // namespace medbase
