#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "medbase/fetch.hpp"
#include "medbase/load.hpp"
#include "medbase/record.hpp"

namespace medbase {

struct CorpusSpec {
  std::uint64_t citations = 0;  // citation elements written, duplicates included
  std::uint32_t files = 1;
  std::uint64_t seed = 0;
  std::uint64_t duplicate_pmids = 0;  // re-sent copies of earlier citations
  std::uint64_t overlong_fields = 0;  // citations with one over-long author initials value
  std::uint64_t deletions = 0;        // DeleteCitation entries in the last file
  std::uint32_t distinct_journals = 1;
  std::optional<std::uint32_t> update_files;  // default: 1 when files > 1, else 0
  std::uint32_t abstract_sentences = 4;

  void validate() const;  // throws InvalidSpec
  std::uint32_t resolved_update_files() const;
};

struct PlannedFile {
  std::string name;
  Repository repository = Repository::Baseline;
  std::vector<ParseEvent> events;  // document order
};

struct ExpectedErrorGroup {
  ErrorCode code = ErrorCode::Other;
  std::string table;
  Pmid pmid = 0;
  std::string field;
  std::uint64_t count = 0;
};

struct GeneratedFile {
  std::string name;
  Repository repository = Repository::Baseline;
  std::uint64_t citations = 0;
  std::uint64_t deletions = 0;
  std::vector<Pmid> pmids;  // citation pmids in document order
  std::vector<Pmid> deleted_pmids;
  std::uint64_t compressed_bytes = 0;
  std::string md5;
};

struct CorpusManifest {
  CorpusSpec spec;
  std::vector<GeneratedFile> files;
  std::map<std::string, std::uint64_t> table_rows;      // all 13 tables
  std::map<std::string, std::uint64_t> errors_by_code;  // all four codes
  std::vector<ExpectedErrorGroup> expected_errors;
  std::uint64_t citations_loaded = 0;
  std::uint64_t distinct_journals = 0;
  std::vector<Pmid> deleted_pmids;

  std::string to_json() const;
  static CorpusManifest from_json(std::string_view json);
  static CorpusManifest load(const std::filesystem::path& path);
};

// Deterministic file layout and content for a spec.
std::vector<PlannedFile> plan_corpus(const CorpusSpec& spec);

// Serialises events as a MEDLINE citation set.
void write_citation_set(std::ostream& out, const std::vector<ParseEvent>& events);

// Every planned citation in one uncompressed document (no archive split).
void write_single_document(const CorpusSpec& spec, std::ostream& out);

// Writes baseline/ and updatefiles/ archives with .md5 sidecars and
// manifest.json under out_dir. Output is byte-identical for equal specs.
CorpusManifest generate(const CorpusSpec& spec, const std::filesystem::path& out_dir);

}  // namespace medbase
