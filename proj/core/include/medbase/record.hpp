#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace medbase {

using Pmid = std::int64_t;

struct CalendarDate {
  int year = 0;
  int month = 0;
  int day = 0;

  std::string iso() const;  // yyyy-mm-dd
  bool operator==(const CalendarDate&) const = default;
};

struct AuthorEntry {
  int ordinal = 0;  // 1-based, document order
  std::optional<std::string> last_name;
  std::optional<std::string> fore_name;
  std::optional<std::string> initials;
  std::optional<std::string> suffix;
  std::optional<std::string> collective_name;
  std::optional<std::string> affiliation;
  bool operator==(const AuthorEntry&) const = default;
};

struct MeshQualifier {
  std::string name;
  bool major = false;
  bool operator==(const MeshQualifier&) const = default;
};

struct MeshEntry {
  std::string descriptor;
  bool descriptor_major = false;
  std::vector<MeshQualifier> qualifiers;
  bool operator==(const MeshEntry&) const = default;
};

struct ChemicalEntry {
  std::string registry_number;
  std::string name_of_substance;
  bool operator==(const ChemicalEntry&) const = default;
};

struct KeywordEntry {
  std::string keyword;
  bool major = false;
  bool operator==(const KeywordEntry&) const = default;
};

struct GrantEntry {
  std::optional<std::string> grant_id;
  std::optional<std::string> acronym;
  std::optional<std::string> agency;
  std::optional<std::string> country;
  bool operator==(const GrantEntry&) const = default;
};

struct DataBankEntry {
  std::string name;
  std::vector<std::string> accession_numbers;
  bool operator==(const DataBankEntry&) const = default;
};

struct CommentCorrection {
  std::string ref_type;
  std::optional<std::int64_t> ref_pmid;
  std::optional<std::string> note;
  bool operator==(const CommentCorrection&) const = default;
};

struct PersonName {
  std::optional<std::string> last_name;
  std::optional<std::string> fore_name;
  std::optional<std::string> initials;
  std::optional<std::string> suffix;
  bool operator==(const PersonName&) const = default;
};

struct Investigator {
  PersonName name;
  std::optional<std::string> affiliation;
  bool operator==(const Investigator&) const = default;
};

struct JournalInfo {
  std::optional<std::string> title;
  std::optional<std::string> iso_abbrev;
  std::optional<std::string> issn;
  std::optional<std::string> volume;
  std::optional<std::string> issue;
  std::optional<int> pub_year;
  std::optional<std::string> pub_month;
  std::optional<std::string> pub_day;
  std::optional<std::string> medline_date_raw;
  bool operator==(const JournalInfo&) const = default;
};

struct CitationRecord {
  Pmid pmid = 0;
  int pmid_version = 1;
  std::optional<std::string> status;
  std::optional<CalendarDate> date_created;
  std::optional<CalendarDate> date_completed;
  std::optional<CalendarDate> date_revised;
  std::optional<std::string> article_title;
  std::optional<std::string> abstract_text;
  JournalInfo journal;
  std::optional<std::string> pagination;
  std::optional<std::string> language;
  std::optional<std::string> country;
  std::optional<std::string> nlm_unique_id;
  std::vector<AuthorEntry> authors;
  std::vector<MeshEntry> mesh;
  std::vector<ChemicalEntry> chemicals;
  std::vector<KeywordEntry> keywords;
  std::vector<GrantEntry> grants;
  std::vector<std::string> publication_types;
  std::vector<DataBankEntry> data_banks;
  std::vector<std::string> gene_symbols;
  std::vector<CommentCorrection> comments_corrections;
  std::vector<PersonName> personal_name_subjects;
  std::vector<Investigator> investigators;
  std::vector<std::string> citation_subsets;

  bool operator==(const CitationRecord&) const = default;
};

struct Deletion {
  Pmid pmid = 0;
  bool operator==(const Deletion&) const = default;
};

using ParseEvent = std::variant<CitationRecord, Deletion>;

}  // namespace medbase
