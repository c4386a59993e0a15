#include <gtest/gtest.h>

#include <fstream>

#include "medbase/error.hpp"
#include "medbase/state.hpp"
#include "recording_connection.hpp"
#include "temp_dir.hpp"

using namespace medbase;
using testing_support::TempDir;

namespace {

LedgerEntry entry(std::string name, std::uint64_t rows = 10, Repository repo = Repository::Baseline) {
  LedgerEntry e;
  e.file_name = std::move(name);
  e.repository = repo;
  e.rows_loaded = rows;
  e.errors = 1;
  e.duration_seconds = 0.25;
  return e;
}

std::vector<std::string> lines_of(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST(Ledger, MarkAndQuery) {
  auto conn = open_connection("sqlite::memory:");
  Ledger ledger(*conn);
  EXPECT_FALSE(ledger.is_done("medsyn07n0001"));
  ledger.mark_done(entry("medsyn07n0001"));
  EXPECT_TRUE(ledger.is_done("medsyn07n0001"));
  EXPECT_FALSE(ledger.is_done("medsyn07n0002"));
  EXPECT_EQ(ledger.size(), 1u);
}

TEST(Ledger, SurvivesReopen) {
  TempDir dir("ledger");
  {
    auto conn = open_connection(dir.db_url());
    Ledger ledger(*conn);
    ledger.mark_done(entry("b", 5, Repository::DailyUpdate));
    ledger.mark_done(entry("a", 7));
  }
  auto conn = open_connection(dir.db_url());
  Ledger ledger(*conn);
  EXPECT_TRUE(ledger.is_done("a"));
  EXPECT_TRUE(ledger.is_done("b"));
  auto all = ledger.entries();
  ASSERT_EQ(all.size(), 2u);
  EXPECT_EQ(all[0].file_name, "a");
  EXPECT_EQ(all[0].rows_loaded, 7u);
  EXPECT_EQ(all[1].repository, Repository::DailyUpdate);
  EXPECT_DOUBLE_EQ(all[1].duration_seconds, 0.25);
}

TEST(Ledger, ReMarkingReplacesTheEntry) {
  auto conn = open_connection("sqlite::memory:");
  Ledger ledger(*conn);
  ledger.mark_done(entry("a", 1));
  ledger.mark_done(entry("a", 2));
  EXPECT_EQ(ledger.size(), 1u);
  EXPECT_EQ(ledger.entries().at(0).rows_loaded, 2u);
}

TEST(Ledger, ResetClearsEverything) {
  TempDir dir("ledger");
  {
    auto conn = open_connection(dir.db_url());
    Ledger ledger(*conn);
    ledger.mark_done(entry("a"));
    ledger.mark_done(entry("b"));
    ledger.reset();
    EXPECT_EQ(ledger.size(), 0u);
    EXPECT_FALSE(ledger.is_done("a"));
  }
  auto conn = open_connection(dir.db_url());
  EXPECT_TRUE(Ledger(*conn).entries().empty());
}

TEST(Ledger, SnapshotIsSortedNames) {
  TempDir dir("ledger");
  auto conn = open_connection("sqlite::memory:");
  Ledger ledger(*conn);
  for (auto n : {"c", "a", "b"}) ledger.mark_done(entry(n));
  ledger.write_snapshot(dir / "ledger.txt");
  EXPECT_EQ(lines_of(dir / "ledger.txt"), (std::vector<std::string>{"a", "b", "c"}));
  ledger.write_snapshot(dir / "nested" / "ledger.txt");
  EXPECT_EQ(lines_of(dir / "nested" / "ledger.txt").size(), 3u);
  std::filesystem::create_directories(dir / "blocked");
  EXPECT_THROW(ledger.write_snapshot(dir / "blocked"), PersistenceError);
}

TEST(Ledger, FailedWriteRaisesAndLeavesStateUnchanged) {
  auto conn = open_connection("sqlite::memory:");
  testing_support::RecordingConnection rec(*conn);
  Ledger ledger(rec);
  ledger.mark_done(entry("a"));
  rec.inject = [](std::string_view sql) -> std::optional<NativeError> {
    if (sql.find("medoc_ledger") != std::string_view::npos && sql.find("SELECT") != 0)
      return NativeError{NativeError::Engine::Sqlite, 10, 10, "disk I/O error"};
    return std::nullopt;
  };
  EXPECT_THROW(ledger.mark_done(entry("b")), PersistenceError);
  EXPECT_FALSE(ledger.is_done("b"));
  EXPECT_THROW(ledger.reset(), PersistenceError);
  EXPECT_TRUE(ledger.is_done("a"));
}

TEST(Ledger, RequiresAWritableDatabase) {
  auto conn = open_connection("sqlite::memory:");
  testing_support::RecordingConnection rec(*conn);
  rec.inject = [](std::string_view) -> std::optional<NativeError> {
    return NativeError{NativeError::Engine::Sqlite, 8, 8, "attempt to write a readonly database"};
  };
  EXPECT_THROW(Ledger{rec}, PersistenceError);
}

TEST(Report, JsonRoundTrip) {
  RunReport r;
  r.files_listed = 5;
  r.files_processed = 4;
  r.files_skipped = 1;
  r.downloads = 4;
  r.citations_loaded = 1234;
  r.deletions_applied = 3;
  r.rows_staged = 20000;
  r.rows_committed = 19990;
  r.indexes_created = 18;
  r.errors_by_code = {{"FieldTooLong", 3}, {"DuplicateKey", 7}, {"StorageFull", 0}, {"Other", 0}};
  r.unknown_elements = {{"CoiStatement", 12}};
  r.rows_by_table = {{"medline_citation", 300}, {"medline_author", 1200}};
  r.insert_statements = {{"medline_citation", 1}, {"medline_author", 2}};
  r.wall_seconds = 12.5;
  r.files.push_back({"medsyn01n0001", Repository::Baseline, 1000, 300, 0, 5000, 2, 1.5});
  r.files.push_back({"medsyn01n0002", Repository::DailyUpdate, 900, 250, 3, 4000, 8, 1.25});
  r.aborted = true;
  r.abort_reason = "storage full";

  auto back = report_from_json(report_to_json(r));
  EXPECT_EQ(back.files_listed, r.files_listed);
  EXPECT_EQ(back.files_skipped, r.files_skipped);
  EXPECT_EQ(back.citations_loaded, r.citations_loaded);
  EXPECT_EQ(back.deletions_applied, r.deletions_applied);
  EXPECT_EQ(back.rows_committed, r.rows_committed);
  EXPECT_EQ(back.indexes_created, r.indexes_created);
  EXPECT_EQ(back.errors_by_code, r.errors_by_code);
  EXPECT_EQ(back.unknown_elements, r.unknown_elements);
  EXPECT_EQ(back.rows_by_table, r.rows_by_table);
  EXPECT_EQ(back.insert_statements, r.insert_statements);
  EXPECT_DOUBLE_EQ(back.wall_seconds, r.wall_seconds);
  ASSERT_EQ(back.files.size(), 2u);
  EXPECT_EQ(back.files[1].name, "medsyn01n0002");
  EXPECT_EQ(back.files[1].repository, Repository::DailyUpdate);
  EXPECT_EQ(back.files[1].deletions, 3u);
  EXPECT_EQ(back.files[1].errors, 8u);
  EXPECT_TRUE(back.aborted);
  EXPECT_EQ(back.abort_reason, r.abort_reason);
  EXPECT_EQ(back.total_errors(), 10u);
  EXPECT_EQ(report_to_json(back), report_to_json(r));
  EXPECT_NE(r.summary().find("DuplicateKey=7"), std::string::npos);
}

TEST(Report, MalformedJsonIsAnError) {
  EXPECT_THROW(report_from_json("{not json"), Error);
}
