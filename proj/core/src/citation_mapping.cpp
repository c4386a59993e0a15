#include <charconv>
#include <cstdio>

#include "medbase/error.hpp"
#include "medbase/parse.hpp"

namespace medbase {
namespace {

std::optional<std::string> text_of(const XmlNode* node) {
  if (!node) return std::nullopt;
  auto t = node->inner_text();
  if (t.empty()) return std::nullopt;
  return t;
}

std::optional<std::string> text_at(const XmlNode* parent, std::string_view name) {
  return parent ? text_of(parent->child(name)) : std::nullopt;
}

std::optional<std::int64_t> to_int(const std::optional<std::string>& s) {
  if (!s) return std::nullopt;
  std::string_view v = *s;
  while (!v.empty() && (v.front() == ' ' || v.front() == '\n' || v.front() == '\t')) v.remove_prefix(1);
  while (!v.empty() && (v.back() == ' ' || v.back() == '\n' || v.back() == '\t')) v.remove_suffix(1);
  std::int64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) return std::nullopt;
  return out;
}

bool yes(const XmlNode& node, std::string_view attr) { return node.attribute(attr).value_or("N") == "Y"; }

std::optional<CalendarDate> date_of(const XmlNode* node) {
  if (!node) return std::nullopt;
  auto y = to_int(text_at(node, "Year"));
  auto m = to_int(text_at(node, "Month"));
  auto d = to_int(text_at(node, "Day"));
  if (!y || !m || !d) return std::nullopt;
  return CalendarDate{static_cast<int>(*y), static_cast<int>(*m), static_cast<int>(*d)};
}

std::optional<std::string> joined_affiliations(const XmlNode& person) {
  std::string out;
  for (const auto* info : person.children_named("AffiliationInfo")) {
    if (auto a = text_at(info, "Affiliation")) {
      if (!out.empty()) out += "; ";
      out += *a;
    }
  }
  if (out.empty()) return text_at(&person, "Affiliation");  // pre-2013 layout
  return out;
}

PersonName person_name(const XmlNode& node) {
  PersonName p;
  p.last_name = text_at(&node, "LastName");
  p.fore_name = text_at(&node, "ForeName");
  if (!p.fore_name) p.fore_name = text_at(&node, "FirstName");
  p.initials = text_at(&node, "Initials");
  p.suffix = text_at(&node, "Suffix");
  return p;
}

template <typename Fn>
void each(const XmlNode* list, std::string_view item, Fn&& fn) {
  if (!list) return;
  for (const auto* n : list->children_named(item)) fn(*n);
}

}  // namespace

std::string CalendarDate::iso() const {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
  return buf;
}

const XmlNode* XmlNode::child(std::string_view child_name) const {
  for (const auto& c : children)
    if (c.name == child_name) return &c;
  return nullptr;
}

std::vector<const XmlNode*> XmlNode::children_named(std::string_view child_name) const {
  std::vector<const XmlNode*> out;
  for (const auto& c : children)
    if (c.name == child_name) out.push_back(&c);
  return out;
}

std::optional<std::string> XmlNode::attribute(std::string_view attr) const {
  for (const auto& [k, v] : attributes)
    if (k == attr) return v;
  return std::nullopt;
}

std::string XmlNode::inner_text() const {
  if (is_text()) return text;
  if (children.size() == 1 && children[0].is_text()) return children[0].text;
  std::string out;
  for (const auto& c : children) out += c.inner_text();
  return out;
}

CitationRecord map_citation(const XmlNode& citation) {
  CitationRecord r;

  const XmlNode* pmid_node = citation.child("PMID");
  auto pmid = pmid_node ? to_int(text_of(pmid_node)) : std::nullopt;
  if (!pmid || *pmid <= 0) throw MissingPmidError("citation has no valid PMID");
  r.pmid = *pmid;
  if (auto v = to_int(pmid_node->attribute("Version")); v && *v > 0) r.pmid_version = static_cast<int>(*v);

  r.status = citation.attribute("Status");
  r.date_created = date_of(citation.child("DateCreated"));
  r.date_completed = date_of(citation.child("DateCompleted"));
  r.date_revised = date_of(citation.child("DateRevised"));

  if (const XmlNode* article = citation.child("Article")) {
    r.article_title = text_at(article, "ArticleTitle");

    if (const XmlNode* abstract = article->child("Abstract")) {
      std::string joined;
      bool any = false;
      for (const auto* seg : abstract->children_named("AbstractText")) {
        std::string part = seg->inner_text();
        if (auto label = seg->attribute("Label"); label && !label->empty()) part = *label + ": " + part;
        if (any) joined += "\n\n";
        joined += part;
        any = true;
      }
      if (any) r.abstract_text = std::move(joined);
    }

    if (const XmlNode* journal = article->child("Journal")) {
      r.journal.title = text_at(journal, "Title");
      r.journal.iso_abbrev = text_at(journal, "ISOAbbreviation");
      r.journal.issn = text_at(journal, "ISSN");
      if (const XmlNode* issue = journal->child("JournalIssue")) {
        r.journal.volume = text_at(issue, "Volume");
        r.journal.issue = text_at(issue, "Issue");
        if (const XmlNode* pub = issue->child("PubDate")) {
          if (auto raw = text_at(pub, "MedlineDate")) {
            r.journal.medline_date_raw = raw;
          } else {
            if (auto y = to_int(text_at(pub, "Year"))) r.journal.pub_year = static_cast<int>(*y);
            r.journal.pub_month = text_at(pub, "Month");
            r.journal.pub_day = text_at(pub, "Day");
          }
        }
      }
    }

    r.pagination = text_at(article->child("Pagination"), "MedlinePgn");

    std::string langs;
    for (const auto* l : article->children_named("Language")) {
      if (auto t = text_of(l)) {
        if (!langs.empty()) langs += ",";
        langs += *t;
      }
    }
    if (!langs.empty()) r.language = std::move(langs);

    int ordinal = 0;
    each(article->child("AuthorList"), "Author", [&](const XmlNode& a) {
      AuthorEntry e;
      auto name = person_name(a);
      e.last_name = name.last_name;
      e.fore_name = name.fore_name;
      e.initials = name.initials;
      e.suffix = name.suffix;
      e.collective_name = text_at(&a, "CollectiveName");
      e.affiliation = joined_affiliations(a);
      if (!e.last_name && !e.collective_name) return;
      e.ordinal = ++ordinal;
      r.authors.push_back(std::move(e));
    });

    each(article->child("GrantList"), "Grant", [&](const XmlNode& g) {
      GrantEntry e{text_at(&g, "GrantID"), text_at(&g, "Acronym"), text_at(&g, "Agency"), text_at(&g, "Country")};
      if (e.grant_id || e.acronym || e.agency || e.country) r.grants.push_back(std::move(e));
    });

    each(article->child("PublicationTypeList"), "PublicationType", [&](const XmlNode& p) {
      if (auto t = text_of(&p)) r.publication_types.push_back(*t);
    });

    each(article->child("DataBankList"), "DataBank", [&](const XmlNode& d) {
      DataBankEntry e;
      e.name = text_at(&d, "DataBankName").value_or("");
      each(d.child("AccessionNumberList"), "AccessionNumber", [&](const XmlNode& n) {
        if (auto t = text_of(&n)) e.accession_numbers.push_back(*t);
      });
      if (!e.name.empty() || !e.accession_numbers.empty()) r.data_banks.push_back(std::move(e));
    });
  }

  if (const XmlNode* info = citation.child("MedlineJournalInfo")) {
    r.country = text_at(info, "Country");
    r.nlm_unique_id = text_at(info, "NlmUniqueID");
  }

  each(citation.child("ChemicalList"), "Chemical", [&](const XmlNode& c) {
    auto name = text_at(&c, "NameOfSubstance");
    if (!name) return;
    r.chemicals.push_back(ChemicalEntry{text_at(&c, "RegistryNumber").value_or(""), *name});
  });

  for (const auto* s : citation.children_named("CitationSubset"))
    if (auto t = text_of(s)) r.citation_subsets.push_back(*t);

  each(citation.child("CommentsCorrectionsList"), "CommentsCorrections", [&](const XmlNode& c) {
    CommentCorrection e;
    e.ref_type = c.attribute("RefType").value_or("");
    e.ref_pmid = to_int(text_at(&c, "PMID"));
    e.note = text_at(&c, "Note");
    r.comments_corrections.push_back(std::move(e));
  });

  each(citation.child("GeneSymbolList"), "GeneSymbol", [&](const XmlNode& g) {
    if (auto t = text_of(&g)) r.gene_symbols.push_back(*t);
  });

  each(citation.child("MeshHeadingList"), "MeshHeading", [&](const XmlNode& h) {
    const XmlNode* d = h.child("DescriptorName");
    auto desc = text_of(d);
    if (!desc) return;
    MeshEntry e;
    e.descriptor = *desc;
    e.descriptor_major = yes(*d, "MajorTopicYN");
    for (const auto* q : h.children_named("QualifierName"))
      if (auto t = text_of(q)) e.qualifiers.push_back(MeshQualifier{*t, yes(*q, "MajorTopicYN")});
    r.mesh.push_back(std::move(e));
  });

  each(citation.child("PersonalNameSubjectList"), "PersonalNameSubject",
       [&](const XmlNode& p) { r.personal_name_subjects.push_back(person_name(p)); });

  for (const auto* list : citation.children_named("KeywordList")) {
    each(list, "Keyword", [&](const XmlNode& k) {
      if (auto t = text_of(&k)) r.keywords.push_back(KeywordEntry{*t, yes(k, "MajorTopicYN")});
    });
  }

  each(citation.child("InvestigatorList"), "Investigator", [&](const XmlNode& i) {
    r.investigators.push_back(Investigator{person_name(i), joined_affiliations(i)});
  });

  return r;
}

}  // namespace medbase
