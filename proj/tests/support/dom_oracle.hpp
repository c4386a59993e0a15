#pragma once

// Reference implementation for parser tests: a whole-document, recursive
// descent XML reader and a path-based mapping written separately from the
// streaming parser and map_citation.

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "medbase/record.hpp"

namespace oracle {

struct Element {
  std::string tag;
  std::map<std::string, std::string> attrs;
  std::vector<std::unique_ptr<Element>> kids;
  std::string text;  // all character data of this element and its descendants

  const Element* first(std::string_view path) const;  // "A/B/C"
  std::vector<const Element*> all(std::string_view path) const;
};

// Throws std::runtime_error on malformed input.
std::unique_ptr<Element> parse_document(std::string_view xml);

// Every citation and deletion in document order. Citations without a valid
// PMID are dropped and counted in `missing_pmid`.
std::vector<medbase::ParseEvent> expected_events(std::string_view xml, std::size_t* missing_pmid = nullptr);

}  // namespace oracle
