#include "dom_oracle.hpp"

#include <cctype>
#include <cstdint>
#include <optional>
#include <stdexcept>

namespace oracle {
namespace {

class Reader {
 public:
  explicit Reader(std::string_view s) : s_(s) {}

  std::unique_ptr<Element> document() {
    misc();
    if (starts("<!DOCTYPE")) {
      doctype();
      misc();
    }
    auto root = element();
    misc();
    if (pos_ != s_.size()) fail("content after root element");
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw std::runtime_error(what + " at offset " + std::to_string(pos_));
  }

  bool starts(std::string_view p) const { return s_.substr(pos_, p.size()) == p; }

  void expect(std::string_view p) {
    if (!starts(p)) fail("expected '" + std::string(p) + "'");
    pos_ += p.size();
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  void skip_past(std::string_view end) {
    auto at = s_.find(end, pos_);
    if (at == std::string_view::npos) fail("unterminated construct");
    pos_ = at + end.size();
  }

  // Whitespace, comments and processing instructions outside the root.
  void misc() {
    for (;;) {
      skip_ws();
      if (starts("<?")) {
        skip_past("?>");
      } else if (starts("<!--")) {
        skip_past("-->");
      } else {
        return;
      }
    }
  }

  void doctype() {
    int depth = 0;
    while (pos_ < s_.size()) {
      char c = s_[pos_++];
      if (c == '"' || c == '\'') {
        auto close = s_.find(c, pos_);
        if (close == std::string_view::npos) fail("unterminated literal in DOCTYPE");
        pos_ = close + 1;
      } else if (c == '[') {
        ++depth;
      } else if (c == ']') {
        --depth;
      } else if (c == '>' && depth == 0) {
        return;
      }
    }
    fail("unterminated DOCTYPE");
  }

  std::string name() {
    auto start = pos_;
    while (pos_ < s_.size()) {
      char c = s_[pos_];
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == ':' || c == '-' || c == '.' ||
          static_cast<unsigned char>(c) >= 0x80) {
        ++pos_;
      } else {
        break;
      }
    }
    if (start == pos_) fail("expected a name");
    return std::string(s_.substr(start, pos_ - start));
  }

  static void put_utf8(std::string& out, std::uint32_t cp) {
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
  }

  void reference(std::string& out) {
    expect("&");
    auto semi = s_.find(';', pos_);
    if (semi == std::string_view::npos) fail("unterminated reference");
    std::string_view ref = s_.substr(pos_, semi - pos_);
    pos_ = semi + 1;
    if (ref == "lt") {
      out += '<';
    } else if (ref == "gt") {
      out += '>';
    } else if (ref == "amp") {
      out += '&';
    } else if (ref == "quot") {
      out += '"';
    } else if (ref == "apos") {
      out += '\'';
    } else if (!ref.empty() && ref[0] == '#') {
      bool hex = ref.size() > 1 && ref[1] == 'x';
      std::string digits(ref.substr(hex ? 2 : 1));
      if (digits.empty()) fail("empty character reference");
      put_utf8(out, static_cast<std::uint32_t>(std::stoul(digits, nullptr, hex ? 16 : 10)));
    } else {
      fail("unknown entity &" + std::string(ref) + ";");
    }
  }

  std::string attr_value() {
    char q = s_[pos_];
    if (q != '"' && q != '\'') fail("expected quoted attribute value");
    ++pos_;
    std::string v;
    while (pos_ < s_.size() && s_[pos_] != q) {
      if (s_[pos_] == '&') {
        reference(v);
      } else if (s_[pos_] == '<') {
        fail("'<' in attribute value");
      } else {
        char c = s_[pos_++];
        v.push_back(c == '\n' || c == '\t' || c == '\r' ? ' ' : c);
      }
    }
    expect(std::string_view(&q, 1));
    return v;
  }

  std::unique_ptr<Element> element() {
    expect("<");
    auto el = std::make_unique<Element>();
    el->tag = name();
    for (;;) {
      skip_ws();
      if (starts("/>")) {
        pos_ += 2;
        return el;
      }
      if (starts(">")) {
        ++pos_;
        break;
      }
      std::string key = name();
      skip_ws();
      expect("=");
      skip_ws();
      if (!el->attrs.emplace(key, attr_value()).second) fail("duplicate attribute " + key);
    }
    for (;;) {
      if (pos_ >= s_.size()) fail("unterminated element " + el->tag);
      if (starts("</")) {
        pos_ += 2;
        if (name() != el->tag) fail("mismatched end tag for " + el->tag);
        skip_ws();
        expect(">");
        return el;
      }
      if (starts("<!--")) {
        skip_past("-->");
      } else if (starts("<![CDATA[")) {
        pos_ += 9;
        auto end = s_.find("]]>", pos_);
        if (end == std::string_view::npos) fail("unterminated CDATA");
        el->text.append(s_.substr(pos_, end - pos_));
        pos_ = end + 3;
      } else if (starts("<?")) {
        skip_past("?>");
      } else if (starts("<")) {
        auto kid = element();
        el->text += kid->text;
        el->kids.push_back(std::move(kid));
      } else if (starts("&")) {
        reference(el->text);
      } else {
        char c = s_[pos_++];
        if (c == '\r') {
          if (pos_ < s_.size() && s_[pos_] == '\n') ++pos_;
          c = '\n';
        }
        el->text.push_back(c);
      }
    }
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

void collect(const Element& e, std::string_view path, std::vector<const Element*>& out) {
  auto slash = path.find('/');
  std::string_view head = path.substr(0, slash);
  for (const auto& k : e.kids) {
    if (k->tag != head) continue;
    if (slash == std::string_view::npos) {
      out.push_back(k.get());
    } else {
      collect(*k, path.substr(slash + 1), out);
    }
  }
}

using medbase::CitationRecord;
using Text = std::optional<std::string>;

Text value(const Element* e) {
  if (e == nullptr || e->text.empty()) return std::nullopt;
  return e->text;
}

Text value(const Element& parent, std::string_view path) { return value(parent.first(path)); }

std::optional<long long> integer(const Text& t) {
  if (!t) return std::nullopt;
  std::size_t b = t->find_first_not_of(" \t\n");
  std::size_t e = t->find_last_not_of(" \t\n");
  if (b == std::string::npos) return std::nullopt;
  std::string digits = t->substr(b, e - b + 1);
  if (digits.find_first_not_of("-0123456789") != std::string::npos) return std::nullopt;
  try {
    std::size_t used = 0;
    long long v = std::stoll(digits, &used);
    if (used != digits.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

bool major(const Element* e) {
  if (!e) return false;
  auto it = e->attrs.find("MajorTopicYN");
  return it != e->attrs.end() && it->second == "Y";
}

std::optional<medbase::CalendarDate> date(const Element& c, std::string_view path) {
  const Element* d = c.first(path);
  if (!d) return std::nullopt;
  auto y = integer(value(*d, "Year"));
  auto m = integer(value(*d, "Month"));
  auto day = integer(value(*d, "Day"));
  if (!y || !m || !day) return std::nullopt;
  return medbase::CalendarDate{static_cast<int>(*y), static_cast<int>(*m), static_cast<int>(*day)};
}

Text affiliation(const Element& person) {
  std::string all;
  for (const auto* a : person.all("AffiliationInfo/Affiliation")) {
    if (a->text.empty()) continue;
    all += (all.empty() ? "" : "; ") + a->text;
  }
  if (!all.empty()) return all;
  return value(person, "Affiliation");
}

medbase::PersonName person(const Element& e) {
  medbase::PersonName p;
  p.last_name = value(e, "LastName");
  p.fore_name = value(e, "ForeName");
  if (!p.fore_name) p.fore_name = value(e, "FirstName");
  p.initials = value(e, "Initials");
  p.suffix = value(e, "Suffix");
  return p;
}

std::optional<CitationRecord> citation(const Element& c) {
  CitationRecord r;
  const Element* pmid = c.first("PMID");
  auto id = integer(value(pmid));
  if (!id || *id <= 0) return std::nullopt;
  r.pmid = *id;
  if (auto v = pmid->attrs.find("Version"); v != pmid->attrs.end()) {
    if (auto n = integer(v->second); n && *n > 0) r.pmid_version = static_cast<int>(*n);
  }
  if (auto s = c.attrs.find("Status"); s != c.attrs.end()) r.status = s->second;
  r.date_created = date(c, "DateCreated");
  r.date_completed = date(c, "DateCompleted");
  r.date_revised = date(c, "DateRevised");

  r.article_title = value(c, "Article/ArticleTitle");
  if (c.first("Article/Abstract")) {
    std::vector<std::string> parts;
    for (const auto* seg : c.all("Article/Abstract/AbstractText")) {
      auto label = seg->attrs.find("Label");
      bool labelled = label != seg->attrs.end() && !label->second.empty();
      parts.push_back(labelled ? label->second + ": " + seg->text : seg->text);
    }
    if (!parts.empty()) {
      std::string joined = parts[0];
      for (std::size_t i = 1; i < parts.size(); ++i) joined += "\n\n" + parts[i];
      r.abstract_text = joined;
    }
  }
  r.journal.title = value(c, "Article/Journal/Title");
  r.journal.iso_abbrev = value(c, "Article/Journal/ISOAbbreviation");
  r.journal.issn = value(c, "Article/Journal/ISSN");
  r.journal.volume = value(c, "Article/Journal/JournalIssue/Volume");
  r.journal.issue = value(c, "Article/Journal/JournalIssue/Issue");
  if (const Element* pub = c.first("Article/Journal/JournalIssue/PubDate")) {
    r.journal.medline_date_raw = value(*pub, "MedlineDate");
    if (!r.journal.medline_date_raw) {
      if (auto y = integer(value(*pub, "Year"))) r.journal.pub_year = static_cast<int>(*y);
      r.journal.pub_month = value(*pub, "Month");
      r.journal.pub_day = value(*pub, "Day");
    }
  }
  r.pagination = value(c, "Article/Pagination/MedlinePgn");
  std::vector<std::string> langs;
  for (const auto* l : c.all("Article/Language"))
    if (!l->text.empty()) langs.push_back(l->text);
  if (!langs.empty()) {
    std::string joined = langs[0];
    for (std::size_t i = 1; i < langs.size(); ++i) joined += "," + langs[i];
    r.language = joined;
  }

  int n = 0;
  for (const auto* a : c.all("Article/AuthorList/Author")) {
    medbase::AuthorEntry e;
    auto p = person(*a);
    e.last_name = p.last_name;
    e.fore_name = p.fore_name;
    e.initials = p.initials;
    e.suffix = p.suffix;
    e.collective_name = value(*a, "CollectiveName");
    e.affiliation = affiliation(*a);
    if (e.last_name || e.collective_name) {
      e.ordinal = ++n;
      r.authors.push_back(e);
    }
  }
  for (const auto* g : c.all("Article/GrantList/Grant")) {
    medbase::GrantEntry e{value(*g, "GrantID"), value(*g, "Acronym"), value(*g, "Agency"), value(*g, "Country")};
    if (e.grant_id || e.acronym || e.agency || e.country) r.grants.push_back(e);
  }
  for (const auto* t : c.all("Article/PublicationTypeList/PublicationType"))
    if (!t->text.empty()) r.publication_types.push_back(t->text);
  for (const auto* d : c.all("Article/DataBankList/DataBank")) {
    medbase::DataBankEntry e;
    e.name = value(*d, "DataBankName").value_or("");
    for (const auto* a : d->all("AccessionNumberList/AccessionNumber"))
      if (!a->text.empty()) e.accession_numbers.push_back(a->text);
    if (!e.name.empty() || !e.accession_numbers.empty()) r.data_banks.push_back(e);
  }

  r.country = value(c, "MedlineJournalInfo/Country");
  r.nlm_unique_id = value(c, "MedlineJournalInfo/NlmUniqueID");
  for (const auto* ch : c.all("ChemicalList/Chemical")) {
    auto name = value(*ch, "NameOfSubstance");
    if (name) r.chemicals.push_back({value(*ch, "RegistryNumber").value_or(""), *name});
  }
  for (const auto* s : c.all("CitationSubset"))
    if (!s->text.empty()) r.citation_subsets.push_back(s->text);
  for (const auto* cc : c.all("CommentsCorrectionsList/CommentsCorrections")) {
    medbase::CommentCorrection e;
    auto rt = cc->attrs.find("RefType");
    e.ref_type = rt == cc->attrs.end() ? "" : rt->second;
    if (auto p = integer(value(*cc, "PMID"))) e.ref_pmid = *p;
    e.note = value(*cc, "Note");
    r.comments_corrections.push_back(e);
  }
  for (const auto* g : c.all("GeneSymbolList/GeneSymbol"))
    if (!g->text.empty()) r.gene_symbols.push_back(g->text);
  for (const auto* h : c.all("MeshHeadingList/MeshHeading")) {
    const Element* d = h->first("DescriptorName");
    if (!value(d)) continue;
    medbase::MeshEntry e;
    e.descriptor = d->text;
    e.descriptor_major = major(d);
    for (const auto* q : h->all("QualifierName"))
      if (!q->text.empty()) e.qualifiers.push_back({q->text, major(q)});
    r.mesh.push_back(e);
  }
  for (const auto* p : c.all("PersonalNameSubjectList/PersonalNameSubject")) r.personal_name_subjects.push_back(person(*p));
  for (const auto* k : c.all("KeywordList/Keyword"))
    if (!k->text.empty()) r.keywords.push_back({k->text, major(k)});
  for (const auto* i : c.all("InvestigatorList/Investigator")) r.investigators.push_back({person(*i), affiliation(*i)});
  return r;
}

void walk(const Element& e, std::vector<medbase::ParseEvent>& out, std::size_t& missing) {
  if (e.tag == "MedlineCitation") {
    if (auto r = citation(e)) {
      out.emplace_back(std::move(*r));
    } else {
      ++missing;
    }
    return;
  }
  if (e.tag == "DeleteCitation") {
    for (const auto* p : e.all("PMID")) {
      auto id = integer(value(p));
      if (id && *id > 0) out.emplace_back(medbase::Deletion{*id});
    }
    return;
  }
  for (const auto& k : e.kids) walk(*k, out, missing);
}

}  // namespace

const Element* Element::first(std::string_view path) const {
  auto v = all(path);
  return v.empty() ? nullptr : v.front();
}

std::vector<const Element*> Element::all(std::string_view path) const {
  std::vector<const Element*> out;
  collect(*this, path, out);
  return out;
}

std::unique_ptr<Element> parse_document(std::string_view xml) { return Reader(xml).document(); }

std::vector<medbase::ParseEvent> expected_events(std::string_view xml, std::size_t* missing_pmid) {
  auto root = parse_document(xml);
  std::vector<medbase::ParseEvent> out;
  std::size_t missing = 0;
  walk(*root, out, missing);
  if (missing_pmid) *missing_pmid = missing;
  return out;
}

}  // namespace oracle
