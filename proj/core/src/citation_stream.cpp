#include <expat.h>

#include <exception>
#include <fstream>
#include <unordered_set>

#include "medbase/error.hpp"
#include "medbase/parse.hpp"

namespace medbase {
namespace {

// Elements whose children the mapping inspects.
const std::unordered_set<std::string_view> kContainers = {
    "MedlineCitation", "DateCreated", "DateCompleted", "DateRevised", "Article", "Journal",
    "JournalIssue", "PubDate", "Pagination", "Abstract", "AuthorList", "Author", "AffiliationInfo",
    "GrantList", "Grant", "PublicationTypeList", "DataBankList", "DataBank", "AccessionNumberList",
    "MedlineJournalInfo", "ChemicalList", "Chemical", "CommentsCorrectionsList", "CommentsCorrections",
    "GeneSymbolList", "MeshHeadingList", "MeshHeading", "PersonalNameSubjectList", "PersonalNameSubject",
    "KeywordList", "InvestigatorList", "Investigator",
};

// Elements whose character data the mapping reads. Anything nested in them
// is inline markup and kept as text.
const std::unordered_set<std::string_view> kLeaves = {
    "PMID", "Year", "Month", "Day", "MedlineDate", "Title", "ISOAbbreviation", "ISSN", "Volume",
    "Issue", "ArticleTitle", "MedlinePgn", "AbstractText", "Language", "LastName", "ForeName",
    "FirstName", "Initials", "Suffix", "CollectiveName", "Affiliation", "GrantID", "Acronym", "Agency",
    "Country", "PublicationType", "DataBankName", "AccessionNumber", "NlmUniqueID", "RegistryNumber",
    "NameOfSubstance", "CitationSubset", "Note", "GeneSymbol", "DescriptorName", "QualifierName",
    "Keyword",
};

enum class Frame { Container, Leaf, Inline, Skip, Outside, DeleteBlock, DeletePmid };

}  // namespace

struct CitationStream::Impl {
  std::unique_ptr<std::istream> owned;
  std::istream* in = nullptr;
  XML_Parser parser = nullptr;
  bool eof = false;
  std::uint64_t bytes = 0;

  std::deque<ParseEvent> ready;
  std::vector<ParseDiagnostic> diagnostics;
  std::map<std::string, std::uint64_t> unknown;
  std::exception_ptr pending;

  std::vector<Frame> frames;
  XmlNode citation;
  std::vector<XmlNode*> open;  // chain of nodes being built, citation first
  std::string delete_pmid;

  Impl() {
    parser = XML_ParserCreate("UTF-8");
    if (!parser) throw std::bad_alloc();
    XML_SetUserData(parser, this);
    XML_SetElementHandler(parser, &Impl::on_start, &Impl::on_end);
    XML_SetCharacterDataHandler(parser, &Impl::on_text);
  }

  ~Impl() {
    if (parser) XML_ParserFree(parser);
  }

  std::uint64_t line() const { return XML_GetCurrentLineNumber(parser); }

  void fail(std::exception_ptr e) {
    if (!pending) pending = e;
    XML_StopParser(parser, XML_FALSE);
  }

  static void on_start(void* ud, const XML_Char* name, const XML_Char** attrs) {
    auto* self = static_cast<Impl*>(ud);
    try {
      self->start(name, attrs);
    } catch (...) {
      self->fail(std::current_exception());
    }
  }

  static void on_end(void* ud, const XML_Char* name) {
    auto* self = static_cast<Impl*>(ud);
    try {
      self->end(name);
    } catch (...) {
      self->fail(std::current_exception());
    }
  }

  static void on_text(void* ud, const XML_Char* s, int len) {
    auto* self = static_cast<Impl*>(ud);
    try {
      self->text(std::string_view(s, static_cast<std::size_t>(len)));
    } catch (...) {
      self->fail(std::current_exception());
    }
  }

  XmlNode& push_node(const XML_Char* name, const XML_Char** attrs) {
    XmlNode& parent = *open.back();
    parent.children.emplace_back();
    XmlNode& node = parent.children.back();
    node.name = name;
    for (auto** a = attrs; *a; a += 2) node.attributes.emplace_back(a[0], a[1]);
    open.push_back(&node);
    return node;
  }

  void start(const XML_Char* name, const XML_Char** attrs) {
    std::string_view n(name);
    Frame parent = frames.empty() ? Frame::Outside : frames.back();
    switch (parent) {
      case Frame::Outside:
        if (n == "MedlineCitation") {
          citation = XmlNode{};
          citation.name = name;
          for (auto** a = attrs; *a; a += 2) citation.attributes.emplace_back(a[0], a[1]);
          open.assign(1, &citation);
          frames.push_back(Frame::Container);
        } else if (n == "DeleteCitation") {
          frames.push_back(Frame::DeleteBlock);
        } else {
          frames.push_back(Frame::Outside);
        }
        return;
      case Frame::DeleteBlock:
        if (n == "PMID") {
          delete_pmid.clear();
          frames.push_back(Frame::DeletePmid);
        } else {
          frames.push_back(Frame::Skip);
        }
        return;
      case Frame::DeletePmid:
      case Frame::Skip:
        frames.push_back(Frame::Skip);
        return;
      case Frame::Leaf:
      case Frame::Inline:
        push_node(name, attrs);
        frames.push_back(Frame::Inline);
        return;
      case Frame::Container:
        if (kContainers.count(n)) {
          push_node(name, attrs);
          frames.push_back(Frame::Container);
        } else if (kLeaves.count(n)) {
          push_node(name, attrs);
          frames.push_back(Frame::Leaf);
        } else {
          ++unknown[std::string(n)];
          frames.push_back(Frame::Skip);
        }
        return;
    }
  }

  void end(const XML_Char*) {
    Frame f = frames.back();
    frames.pop_back();
    switch (f) {
      case Frame::Container:
      case Frame::Leaf:
      case Frame::Inline:
        open.pop_back();
        if (open.empty()) finish_citation();
        return;
      case Frame::DeletePmid: {
        Pmid pmid = 0;
        bool ok = !delete_pmid.empty();
        for (char c : delete_pmid) {
          if (c == ' ' || c == '\n' || c == '\t' || c == '\r') continue;
          if (c < '0' || c > '9') {
            ok = false;
            break;
          }
          pmid = pmid * 10 + (c - '0');
        }
        if (ok && pmid > 0) {
          ready.emplace_back(Deletion{pmid});
        } else {
          diagnostics.push_back({line(), "DeleteCitation entry with invalid PMID '" + delete_pmid + "'"});
        }
        return;
      }
      default:
        return;
    }
  }

  void finish_citation() {
    try {
      ready.emplace_back(map_citation(citation));
    } catch (const MissingPmidError& e) {
      diagnostics.push_back({line(), e.what()});
    }
    citation = XmlNode{};
  }

  void text(std::string_view s) {
    if (frames.empty()) return;
    switch (frames.back()) {
      case Frame::DeletePmid:
        delete_pmid.append(s);
        return;
      case Frame::Leaf:
      case Frame::Inline:
      case Frame::Container: {
        // Whitespace between container children carries no data.
        if (frames.back() == Frame::Container &&
            s.find_first_not_of(" \t\r\n") == std::string_view::npos)
          return;
        XmlNode& node = *open.back();
        if (!node.children.empty() && node.children.back().is_text()) {
          node.children.back().text.append(s);
        } else {
          node.children.emplace_back();
          node.children.back().text.assign(s);
        }
        return;
      }
      default:
        return;
    }
  }

  void rethrow_pending() {
    if (pending) {
      auto e = pending;
      pending = nullptr;
      std::rethrow_exception(e);
    }
  }

  void throw_syntax() {
    rethrow_pending();
    throw XmlSyntaxError(XML_ErrorString(XML_GetErrorCode(parser)), XML_GetCurrentLineNumber(parser),
                         XML_GetCurrentColumnNumber(parser));
  }

  bool pump() {
    if (eof) return false;
    void* buf = XML_GetBuffer(parser, static_cast<int>(kChunkSize));
    if (!buf) throw std::bad_alloc();
    in->read(static_cast<char*>(buf), static_cast<std::streamsize>(kChunkSize));
    auto got = in->gcount();
    if (in->bad()) throw Error("read error while parsing XML");
    bytes += static_cast<std::uint64_t>(got);
    bool last = got < static_cast<std::streamsize>(kChunkSize) && in->eof();
    if (XML_ParseBuffer(parser, static_cast<int>(got), last ? XML_TRUE : XML_FALSE) != XML_STATUS_OK) {
      throw_syntax();
    }
    rethrow_pending();
    if (last) eof = true;
    return true;
  }
};

CitationStream::CitationStream(std::istream& in) : impl_(std::make_unique<Impl>()) { impl_->in = &in; }

CitationStream::CitationStream(const std::filesystem::path& path) : impl_(std::make_unique<Impl>()) {
  auto f = std::make_unique<std::ifstream>(path, std::ios::binary);
  if (!*f) throw Error("cannot open XML file " + path.string());
  impl_->in = f.get();
  impl_->owned = std::move(f);
}

CitationStream::~CitationStream() = default;
CitationStream::CitationStream(CitationStream&&) noexcept = default;
CitationStream& CitationStream::operator=(CitationStream&&) noexcept = default;

std::optional<ParseEvent> CitationStream::next() {
  while (impl_->ready.empty()) {
    if (!impl_->pump()) return std::nullopt;
  }
  ParseEvent ev = std::move(impl_->ready.front());
  impl_->ready.pop_front();
  return ev;
}

const std::vector<ParseDiagnostic>& CitationStream::diagnostics() const { return impl_->diagnostics; }

const std::map<std::string, std::uint64_t>& CitationStream::unknown_elements() const { return impl_->unknown; }

std::uint64_t CitationStream::bytes_consumed() const { return impl_->bytes; }

}  // namespace medbase
