#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "medbase/error.hpp"

namespace medbase {

// NULL, integer, real or UTF-8 text.
using SqlValue = std::variant<std::monostate, std::int64_t, double, std::string>;
using Row = std::vector<SqlValue>;

inline bool is_null(const SqlValue& v) { return std::holds_alternative<std::monostate>(v); }

// Error exactly as the database engine reported it.
struct NativeError {
  enum class Engine { Sqlite, Mysql };
  Engine engine = Engine::Sqlite;
  int code = 0;           // primary engine code (sqlite result code / mysql errno)
  int extended_code = 0;  // sqlite extended result code; equals code for mysql
  std::string message;
};

class DatabaseError : public Error {
 public:
  explicit DatabaseError(NativeError native)
      : Error(native.message), native_(std::move(native)) {}
  const NativeError& native() const noexcept { return native_; }

 private:
  NativeError native_;
};

// Minimal connection surface the schema, loader and ledger need. One
// concrete engine binding exists (the embedded engine); the interface lets
// tests wrap it in counting or fault-injecting doubles.
class SqlConnection {
 public:
  virtual ~SqlConnection() = default;

  // Executes one or more statements that return no rows.
  virtual void execute(std::string_view sql) = 0;

  // Executes a single statement with positional `?` parameters.
  virtual std::vector<Row> query(std::string_view sql, const std::vector<SqlValue>& params = {}) = 0;

  // Rows changed by the most recent execute/query.
  virtual std::int64_t changes() const = 0;

  virtual std::vector<std::string> table_names() = 0;
  virtual std::vector<std::string> index_names() = 0;

  virtual NativeError::Engine engine() const = 0;
};

// Recognised URLs:
//   sqlite:PATH, sqlite://PATH, sqlite:///ABS/PATH, sqlite::memory:, or a bare file path.
// Anything else raises ConfigError; an unopenable target raises ConnectionError.
std::unique_ptr<SqlConnection> open_connection(const std::string& db_url);

// RAII transaction built on BEGIN/COMMIT; rolls back if not committed.
class Transaction {
 public:
  explicit Transaction(SqlConnection& conn);
  ~Transaction();
  Transaction(const Transaction&) = delete;
  Transaction& operator=(const Transaction&) = delete;

  void commit();

 private:
  SqlConnection& conn_;
  bool done_ = false;
};

}  // namespace medbase
