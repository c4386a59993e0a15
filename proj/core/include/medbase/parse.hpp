#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "medbase/record.hpp"

namespace medbase {

// Element subtree captured for one citation. Character data is held in
// child nodes with an empty name so mixed content keeps its order.
struct XmlNode {
  std::string name;
  std::vector<std::pair<std::string, std::string>> attributes;
  std::vector<XmlNode> children;
  std::string text;  // only for text nodes

  bool is_text() const { return name.empty(); }
  const XmlNode* child(std::string_view child_name) const;
  std::vector<const XmlNode*> children_named(std::string_view child_name) const;
  std::optional<std::string> attribute(std::string_view attr) const;
  // All descendant character data in document order.
  std::string inner_text() const;
};

// Maps a <MedlineCitation> subtree onto a record. Unrecognised elements are
// ignored. Throws MissingPmidError when the citation has no usable PMID.
CitationRecord map_citation(const XmlNode& citation);

struct ParseDiagnostic {
  std::uint64_t line = 0;
  std::string message;
};

// Single-pass pull parser over a MEDLINE citation set. Input is consumed in
// fixed-size chunks; only the citation currently being assembled is held in
// memory. Malformed XML raises XmlSyntaxError; citations without a PMID are
// skipped and reported through diagnostics().
class CitationStream {
 public:
  static constexpr std::size_t kChunkSize = 64 * 1024;

  explicit CitationStream(std::istream& in);
  explicit CitationStream(const std::filesystem::path& path);
  ~CitationStream();
  CitationStream(CitationStream&&) noexcept;
  CitationStream& operator=(CitationStream&&) noexcept;

  std::optional<ParseEvent> next();

  const std::vector<ParseDiagnostic>& diagnostics() const;
  const std::map<std::string, std::uint64_t>& unknown_elements() const;
  std::uint64_t bytes_consumed() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

inline CitationStream parse_stream(std::istream& in) { return CitationStream(in); }
inline CitationStream parse_stream(const std::filesystem::path& path) { return CitationStream(path); }

}  // namespace medbase
