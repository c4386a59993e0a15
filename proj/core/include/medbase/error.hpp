#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace medbase {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidSchema : public Error {
 public:
  using Error::Error;
};

class SchemaMismatch : public Error {
 public:
  using Error::Error;
};

class ConnectionError : public Error {
 public:
  using Error::Error;
};

class ListingParseError : public Error {
 public:
  using Error::Error;
};

class ChecksumError : public Error {
 public:
  using Error::Error;
};

class DiskFullError : public Error {
 public:
  using Error::Error;
};

class CorruptArchiveError : public Error {
 public:
  using Error::Error;
};

class XmlSyntaxError : public Error {
 public:
  XmlSyntaxError(const std::string& what, std::uint64_t line, std::uint64_t column)
      : Error(what + " at line " + std::to_string(line) + ", column " + std::to_string(column)),
        line_(line),
        column_(column) {}

  std::uint64_t line() const noexcept { return line_; }
  std::uint64_t column() const noexcept { return column_; }

 private:
  std::uint64_t line_;
  std::uint64_t column_;
};

class MissingPmidError : public Error {
 public:
  using Error::Error;
};

class PersistenceError : public Error {
 public:
  using Error::Error;
};

class InvalidSpec : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Raised when the loader hits a run-aborting database condition
// (storage full, or a duplicate under the Fail policy).
class LoadAborted : public Error {
 public:
  using Error::Error;
};

}  // namespace medbase
