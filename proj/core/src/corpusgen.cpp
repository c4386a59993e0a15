#include "medbase/corpusgen.hpp"

#include <fmt/format.h>
#include <zlib.h>

#include <algorithm>
#include <array>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "medbase/error.hpp"
#include "medbase/schema.hpp"

namespace fs = std::filesystem;

namespace medbase {
namespace {

// splitmix64: tiny, portable and fully specified, so corpora are identical
// across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next() % n; }
  int between(int lo, int hi) { return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo + 1))); }
  bool chance(int percent) { return below(100) < static_cast<std::uint64_t>(percent); }

  template <typename T, std::size_t N>
  const T& pick(const std::array<T, N>& items) {
    return items[below(N)];
  }

 private:
  std::uint64_t state_;
};

std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
  Rng r(seed ^ (stream * 0xD1B54A32D192ED03ull));
  r.next();
  return r.next();
}

constexpr std::uint64_t kStreamDuplicates = 0xD0;
constexpr std::uint64_t kStreamOverlong = 0x0F;
constexpr std::uint64_t kStreamDeletions = 0xDE;

constexpr std::array<std::string_view, 24> kTopicWords = {
    "cardiac", "renal", "hepatic", "neuronal", "pulmonary", "immune", "metabolic", "vascular",
    "genomic", "clinical", "pediatric", "oncologic", "microbial", "synaptic", "endocrine", "dermal",
    "ocular", "skeletal", "muscular", "cellular", "mitochondrial", "epithelial", "hematologic", "viral"};
constexpr std::array<std::string_view, 20> kNouns = {
    "outcomes", "expression", "signalling", "regulation", "response", "function", "injury", "therapy",
    "screening", "biomarkers", "inflammation", "resistance", "variants", "pathways", "imaging",
    "receptors", "transport", "infection", "remodeling", "dynamics"};
constexpr std::array<std::string_view, 12> kTitleExtras = {
    "in mice", "in a rat model", "& related disorders", "at <5 years of age", "in Müller glia",
    "via α-synuclein", "among naïve patients", "in São Paulo cohorts", "a randomized trial",
    "a cohort study", "revisited", "in Zürich"};
constexpr std::array<std::string_view, 16> kLastNames = {
    "Smith", "Nguyen", "Müller", "García", "Kowalski", "Okafor", "Tanaka", "Dubois",
    "O'Brien", "Johansson", "Rossi", "Ivanova", "Chen", "Patel", "Søndergaard", "Lefèvre"};
constexpr std::array<std::string_view, 16> kForeNames = {
    "Anna", "John Paul", "Maria", "Wei", "Olusegun", "Hiroshi", "Élise", "Tomasz",
    "Siobhan", "Lars", "Giulia", "Natalia", "Priya", "Ahmed", "Freja", "Jean-Luc"};
constexpr std::array<std::string_view, 6> kSuffixes = {"Jr", "Sr", "2nd", "3rd", "IV", "II"};
constexpr std::array<std::string_view, 10> kInstitutions = {
    "Department of Medicine, University Hospital, Rouen, France",
    "Institute of Biochemistry, Charité, Berlin, Germany",
    "Division of Cardiology, Mayo Clinic, Rochester, MN, USA",
    "School of Public Health, University of São Paulo, Brazil",
    "Laboratory of Genetics, NIH, Bethesda, MD, USA",
    "Faculty of Medicine, Kyoto University, Japan",
    "Department of Surgery, Karolinska Institutet, Stockholm, Sweden",
    "Centre for Infectious Disease, Lagos University Teaching Hospital, Nigeria",
    "Unit of Epidemiology, Istituto Superiore di Sanità, Rome, Italy",
    "Department of Neurology, McGill University, Montréal, Canada"};
constexpr std::array<std::string_view, 20> kDescriptors = {
    "Humans", "Animals", "Mice", "Female", "Male", "Adult", "Middle Aged", "Aged",
    "Rats", "Neoplasms", "Diabetes Mellitus, Type 2", "Hypertension", "Child", "Risk Factors",
    "Brain", "Liver", "Signal Transduction", "Gene Expression Regulation", "Cohort Studies", "Infant"};
constexpr std::array<std::string_view, 12> kQualifiers = {
    "metabolism", "genetics", "drug therapy", "pathology", "physiology", "epidemiology",
    "diagnosis", "therapeutic use", "chemistry", "immunology", "surgery", "complications"};
constexpr std::array<std::string_view, 14> kSubstances = {
    "Glucose", "Insulin", "Tumor Necrosis Factor-alpha", "Interleukin-6", "Cholesterol", "Aspirin",
    "Metformin", "Sodium Chloride", "Oxygen", "Calcium", "RNA, Messenger", "Antibodies, Monoclonal",
    "Vitamin D", "Dopamine"};
constexpr std::array<std::string_view, 8> kPubTypes = {
    "Journal Article", "Review", "Randomized Controlled Trial", "Case Reports",
    "Research Support, N.I.H., Extramural", "Comparative Study", "Letter", "Meta-Analysis"};
constexpr std::array<std::string_view, 6> kAgencies = {"NIH HHS", "NCI NIH HHS", "Wellcome Trust",
                                                       "Medical Research Council", "NHLBI NIH HHS", "ERC"};
constexpr std::array<std::string_view, 4> kGrantCountries = {"United States", "United Kingdom", "France", "Canada"};
constexpr std::array<std::string_view, 6> kCountries = {"United States", "England", "France", "Germany",
                                                         "Japan", "Netherlands"};
constexpr std::array<std::string_view, 4> kLanguages = {"eng", "fre", "ger", "spa"};
constexpr std::array<std::string_view, 3> kStatuses = {"MEDLINE", "PubMed-not-MEDLINE", "In-Process"};
constexpr std::array<std::string_view, 4> kSubsets = {"IM", "AIM", "X", "N"};
constexpr std::array<std::string_view, 4> kBanks = {"GENBANK", "ClinicalTrials.gov", "PDB", "GEO"};
constexpr std::array<std::string_view, 6> kGenes = {"BRCA1", "TP53", "APOE", "EGFR", "MTHFR", "CFTR"};
constexpr std::array<std::string_view, 4> kRefTypes = {"CommentIn", "ErratumIn", "CommentOn", "Cites"};
constexpr std::array<std::string_view, 4> kAbstractLabels = {"BACKGROUND", "METHODS", "RESULTS", "CONCLUSIONS"};
constexpr std::array<std::string_view, 12> kMonths = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                                      "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};

std::string capitalize(std::string_view w) {
  std::string s(w);
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

std::string sentence(Rng& rng) {
  std::string s = capitalize(rng.pick(kTopicWords));
  s += ' ';
  s += rng.pick(kNouns);
  int extra = rng.between(4, 10);
  for (int i = 0; i < extra; ++i) {
    s += ' ';
    s += (i % 2) ? rng.pick(kNouns) : rng.pick(kTopicWords);
  }
  if (rng.chance(10)) s += " (p < 0.05 & n > 30)";
  s += '.';
  return s;
}

std::string initials_of(std::string_view fore) {
  std::string out;
  bool start = true;
  for (char c : fore) {
    if (c == ' ' || c == '-') {
      start = true;
      continue;
    }
    if (start && c >= 'A' && c <= 'Z') out.push_back(c);
    start = false;
  }
  return out.empty() ? "X" : out;
}

std::string journal_title(std::uint32_t j) {
  return fmt::format("Journal of {} {} {}", capitalize(kTopicWords[j % kTopicWords.size()]),
                     capitalize(kNouns[(j / kTopicWords.size()) % kNouns.size()]), j + 1);
}

Pmid pmid_for(std::uint64_t seed, std::uint64_t index) {
  // Increasing, gapped, never colliding across indices.
  return static_cast<Pmid>(20000000 + index * 4 + derive(seed, 0x100000 + index) % 4);
}

CitationRecord make_citation(const CorpusSpec& spec, std::uint64_t index) {
  Rng rng(derive(spec.seed, 0x100000 + index));
  CitationRecord r;
  r.pmid = pmid_for(spec.seed, index);
  r.status = std::string(rng.pick(kStatuses));

  int year = rng.between(1966, 2017);
  if (rng.chance(50)) r.date_created = CalendarDate{year, rng.between(1, 12), rng.between(1, 28)};
  if (rng.chance(70)) r.date_completed = CalendarDate{year, rng.between(1, 12), rng.between(1, 28)};
  r.date_revised = CalendarDate{rng.between(year, 2018), rng.between(1, 12), rng.between(1, 28)};

  r.article_title = sentence(rng);
  r.article_title->pop_back();
  *r.article_title += std::string(" ") + std::string(rng.pick(kTitleExtras)) + ".";

  if (rng.chance(80)) {
    std::string abstract;
    int sentences = std::max<int>(1, static_cast<int>(spec.abstract_sentences));
    if (rng.chance(40)) {
      for (std::size_t l = 0; l < kAbstractLabels.size(); ++l) {
        if (l) abstract += "\n\n";
        abstract += std::string(kAbstractLabels[l]) + ": ";
        for (int s = 0; s < std::max(1, sentences / 4); ++s) abstract += (s ? " " : "") + sentence(rng);
      }
    } else {
      for (int s = 0; s < sentences; ++s) abstract += (s ? " " : "") + sentence(rng);
    }
    r.abstract_text = std::move(abstract);
  }

  std::uint32_t journals = std::max<std::uint32_t>(1, spec.distinct_journals);
  std::uint32_t j = index < journals ? static_cast<std::uint32_t>(index) : static_cast<std::uint32_t>(rng.below(journals));
  r.journal.title = journal_title(j);
  r.journal.iso_abbrev = fmt::format("J {} {} {}", capitalize(kTopicWords[j % kTopicWords.size()]).substr(0, 4),
                                     capitalize(kNouns[(j / kTopicWords.size()) % kNouns.size()]).substr(0, 4), j + 1);
  r.journal.issn = fmt::format("{:04d}-{:04d}", 1000 + j % 9000, (j * 7919) % 10000);
  r.nlm_unique_id = fmt::format("{:09d}", 100000000 + j);
  r.country = std::string(kCountries[j % kCountries.size()]);
  r.journal.volume = std::to_string(rng.between(1, 120));
  if (rng.chance(85)) r.journal.issue = std::to_string(rng.between(1, 24));
  if (rng.chance(12)) {
    int y = rng.between(1966, 2016);
    r.journal.medline_date_raw = fmt::format("{} {}-{} {}", y, rng.pick(kMonths), y + 1, rng.pick(kMonths));
  } else {
    r.journal.pub_year = year;
    if (rng.chance(80)) r.journal.pub_month = std::string(rng.pick(kMonths));
    if (r.journal.pub_month && rng.chance(40)) r.journal.pub_day = std::to_string(rng.between(1, 28));
  }
  int first_page = rng.between(1, 2000);
  r.pagination = fmt::format("{}-{}", first_page, first_page % 10 + rng.between(1, 9));
  r.language = std::string(rng.chance(95) ? "eng" : rng.pick(kLanguages));
  if (rng.chance(5)) *r.language += ",fre";

  int authors = rng.between(1, 8);
  for (int a = 1; a <= authors; ++a) {
    AuthorEntry e;
    e.ordinal = a;
    if (a > 1 && rng.chance(4)) {
      e.collective_name = fmt::format("{} {} Study Group", capitalize(rng.pick(kTopicWords)), capitalize(rng.pick(kNouns)));
    } else {
      e.last_name = std::string(rng.pick(kLastNames));
      e.fore_name = std::string(rng.pick(kForeNames));
      e.initials = initials_of(*e.fore_name);
      if (rng.chance(3)) e.suffix = std::string(rng.pick(kSuffixes));
    }
    if (rng.chance(60)) e.affiliation = std::string(rng.pick(kInstitutions));
    r.authors.push_back(std::move(e));
  }

  int headings = rng.between(0, 8);
  for (int m = 0; m < headings; ++m) {
    MeshEntry e;
    e.descriptor = std::string(m == 0 && rng.chance(70) ? "Humans" : rng.pick(kDescriptors));
    e.descriptor_major = rng.chance(20);
    int quals = rng.between(0, 3);
    for (int q = 0; q < quals; ++q) e.qualifiers.push_back({std::string(rng.pick(kQualifiers)), rng.chance(25)});
    r.mesh.push_back(std::move(e));
  }

  int chemicals = rng.between(0, 4);
  for (int c = 0; c < chemicals; ++c) {
    std::string reg = rng.chance(30) ? "0" : fmt::format("{}-{:02d}-{}", rng.between(50, 99999), rng.between(0, 99), rng.between(0, 9));
    r.chemicals.push_back({reg, std::string(rng.pick(kSubstances))});
  }

  int keywords = rng.chance(50) ? rng.between(1, 5) : 0;
  for (int k = 0; k < keywords; ++k)
    r.keywords.push_back({fmt::format("{} {}", rng.pick(kTopicWords), rng.pick(kNouns)), rng.chance(10)});

  int grants = rng.chance(40) ? rng.between(1, 3) : 0;
  for (int g = 0; g < grants; ++g) {
    GrantEntry e;
    if (rng.chance(85)) e.grant_id = fmt::format("R01 {}{}{:06d}", static_cast<char>('A' + rng.below(26)), static_cast<char>('A' + rng.below(26)), rng.below(1000000));
    if (rng.chance(60)) e.acronym = fmt::format("{}{}", static_cast<char>('A' + rng.below(26)), static_cast<char>('A' + rng.below(26)));
    e.agency = std::string(rng.pick(kAgencies));
    e.country = std::string(rng.pick(kGrantCountries));
    r.grants.push_back(std::move(e));
  }

  int types = rng.between(1, 2);
  for (int t = 0; t < types; ++t) r.publication_types.push_back(std::string(t == 0 ? kPubTypes[0] : rng.pick(kPubTypes)));

  if (rng.chance(5)) {
    DataBankEntry d;
    d.name = std::string(rng.pick(kBanks));
    int acc = rng.between(0, 2);
    for (int a = 0; a < acc; ++a) d.accession_numbers.push_back(fmt::format("AB{:06d}", rng.below(1000000)));
    r.data_banks.push_back(std::move(d));
  }
  if (rng.chance(3)) r.gene_symbols.push_back(std::string(rng.pick(kGenes)));
  if (rng.chance(10) && index > 0) {
    CommentCorrection c;
    c.ref_type = std::string(rng.pick(kRefTypes));
    c.ref_pmid = pmid_for(spec.seed, rng.below(index));
    if (rng.chance(30)) c.note = "Erratum in: " + *r.journal.iso_abbrev;
    r.comments_corrections.push_back(std::move(c));
  }
  if (rng.chance(2)) {
    PersonName p;
    p.last_name = std::string(rng.pick(kLastNames));
    p.fore_name = std::string(rng.pick(kForeNames));
    p.initials = initials_of(*p.fore_name);
    r.personal_name_subjects.push_back(std::move(p));
  }
  if (rng.chance(3)) {
    int n = rng.between(1, 3);
    for (int i = 0; i < n; ++i) {
      Investigator inv;
      inv.name.last_name = std::string(rng.pick(kLastNames));
      inv.name.fore_name = std::string(rng.pick(kForeNames));
      inv.name.initials = initials_of(*inv.name.fore_name);
      if (rng.chance(50)) inv.affiliation = std::string(rng.pick(kInstitutions));
      r.investigators.push_back(std::move(inv));
    }
  }
  int subsets = rng.between(1, 2);
  for (int s = 0; s < subsets; ++s) r.citation_subsets.push_back(std::string(s == 0 ? "IM" : rng.pick(kSubsets)));
  return r;
}

std::string overlong_initials(std::uint64_t n) {
  std::string s;
  for (std::size_t i = 0; i < kIdentityLength + 6 + n % 7; ++i) s.push_back(static_cast<char>('A' + (i + n) % 26));
  return s;
}

// Row counts the loader must produce for a citation, computed from the
// record's own collections.
std::map<std::string, std::uint64_t> expected_rows(const CitationRecord& r) {
  std::map<std::string, std::uint64_t> m;
  m["medline_citation"] = 1;
  m["medline_author"] = r.authors.size();
  m["medline_chemical_list"] = r.chemicals.size();
  std::uint64_t mesh = 0;
  for (const auto& e : r.mesh) mesh += std::max<std::size_t>(1, e.qualifiers.size());
  m["medline_mesh"] = mesh;
  m["medline_keyword_list"] = r.keywords.size();
  m["medline_grant"] = r.grants.size();
  m["medline_publication_type"] = r.publication_types.size();
  std::uint64_t banks = 0;
  for (const auto& d : r.data_banks) banks += std::max<std::size_t>(1, d.accession_numbers.size());
  m["medline_data_bank"] = banks;
  m["medline_gene_symbol"] = r.gene_symbols.size();
  m["medline_comments_corrections"] = r.comments_corrections.size();
  m["medline_personal_name_subject"] = r.personal_name_subjects.size();
  m["medline_investigator"] = r.investigators.size();
  m["medline_citation_subset"] = r.citation_subsets.size();
  return m;
}

struct Plan {
  std::vector<PlannedFile> files;
  std::vector<CitationRecord> base;  // unique citations in index order
  std::vector<std::uint64_t> duplicate_sources;
  std::set<std::uint64_t> overlong;
  std::vector<std::uint64_t> deleted;
  std::vector<std::uint32_t> journal_of;  // per base citation
};

// Picks `count` distinct indices from [0, n) not in `excluded`.
std::vector<std::uint64_t> choose(Rng& rng, std::uint64_t n, std::uint64_t count, const std::set<std::uint64_t>& excluded,
                                  const char* what) {
  std::vector<std::uint64_t> pool;
  for (std::uint64_t i = 0; i < n; ++i)
    if (!excluded.count(i)) pool.push_back(i);
  if (pool.size() < count) {
    throw InvalidSpec(fmt::format("cannot choose {} {} targets from {} eligible citations", count, what, pool.size()));
  }
  for (std::uint64_t i = 0; i < count; ++i) {
    auto j = i + rng.below(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  std::sort(pool.begin(), pool.end());
  return pool;
}

Plan build_plan(const CorpusSpec& spec) {
  spec.validate();
  Plan p;
  const std::uint64_t unique = spec.citations - spec.duplicate_pmids;
  for (std::uint64_t i = 0; i < unique; ++i) p.base.push_back(make_citation(spec, i));

  Rng dup_rng(derive(spec.seed, kStreamDuplicates));
  if (spec.duplicate_pmids > 0 && unique == 0) throw InvalidSpec("duplicates need at least one unique citation");
  if (spec.duplicate_pmids <= unique) {
    p.duplicate_sources = choose(dup_rng, unique, spec.duplicate_pmids, {}, "duplicate");
  } else {
    for (std::uint64_t d = 0; d < spec.duplicate_pmids; ++d) p.duplicate_sources.push_back(dup_rng.below(unique));
  }
  std::set<std::uint64_t> taken(p.duplicate_sources.begin(), p.duplicate_sources.end());

  Rng long_rng(derive(spec.seed, kStreamOverlong));
  for (auto i : choose(long_rng, unique, spec.overlong_fields, taken, "overlong-field")) {
    p.overlong.insert(i);
    p.base[i].authors.front().initials = overlong_initials(i);
  }
  taken.insert(p.overlong.begin(), p.overlong.end());

  Rng del_rng(derive(spec.seed, kStreamDeletions));
  p.deleted = choose(del_rng, unique, spec.deletions, taken, "deletion");

  const std::uint32_t files = spec.files;
  const std::uint32_t updates = spec.resolved_update_files();
  std::vector<std::vector<std::uint64_t>> slots(files);  // base indices per file
  auto file_of = [&](std::uint64_t i) { return static_cast<std::uint32_t>(i * files / std::max<std::uint64_t>(unique, 1)); };
  for (std::uint64_t i = 0; i < unique; ++i) slots[file_of(i)].push_back(i);

  std::vector<std::vector<std::uint64_t>> copies(files);
  for (auto src : p.duplicate_sources) {
    std::uint32_t f = std::min<std::uint32_t>(file_of(src) + 1, files - 1);
    copies[f].push_back(src);
  }

  for (std::uint32_t f = 0; f < files; ++f) {
    PlannedFile pf;
    bool update = f >= files - updates;
    pf.repository = update ? Repository::DailyUpdate : Repository::Baseline;
    pf.name = fmt::format("medsyn{:02d}n{:04d}", spec.seed % 100, f + 1);
    for (auto i : slots[f]) pf.events.emplace_back(p.base[i]);
    for (auto i : copies[f]) pf.events.emplace_back(p.base[i]);
    if (f == files - 1)
      for (auto i : p.deleted) pf.events.emplace_back(Deletion{p.base[i].pmid});
    p.files.push_back(std::move(pf));
  }
  return p;
}

void escape_into(std::string& out, std::string_view s) {
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
}

class XmlWriter {
 public:
  explicit XmlWriter(std::string& out) : out_(out) {}

  void open(std::string_view name, std::initializer_list<std::pair<std::string_view, std::string_view>> attrs = {}) {
    indent();
    out_ += '<';
    out_ += name;
    for (const auto& [k, v] : attrs) {
      out_ += ' ';
      out_ += k;
      out_ += "=\"";
      escape_into(out_, v);
      out_ += '"';
    }
    out_ += ">\n";
    ++depth_;
  }

  void close(std::string_view name) {
    --depth_;
    indent();
    out_ += "</";
    out_ += name;
    out_ += ">\n";
  }

  void leaf(std::string_view name, std::string_view text,
            std::initializer_list<std::pair<std::string_view, std::string_view>> attrs = {}) {
    indent();
    out_ += '<';
    out_ += name;
    for (const auto& [k, v] : attrs) {
      out_ += ' ';
      out_ += k;
      out_ += "=\"";
      escape_into(out_, v);
      out_ += '"';
    }
    out_ += '>';
    escape_into(out_, text);
    out_ += "</";
    out_ += name;
    out_ += ">\n";
  }

  void maybe(std::string_view name, const std::optional<std::string>& text) {
    if (text) leaf(name, *text);
  }

 private:
  void indent() { out_.append(static_cast<std::size_t>(depth_) * 2, ' '); }
  std::string& out_;
  int depth_ = 1;
};

void write_date(XmlWriter& w, std::string_view name, const std::optional<CalendarDate>& d) {
  if (!d) return;
  w.open(name);
  w.leaf("Year", fmt::format("{:04d}", d->year));
  w.leaf("Month", fmt::format("{:02d}", d->month));
  w.leaf("Day", fmt::format("{:02d}", d->day));
  w.close(name);
}

void write_person(XmlWriter& w, const PersonName& p) {
  w.maybe("LastName", p.last_name);
  w.maybe("ForeName", p.fore_name);
  w.maybe("Initials", p.initials);
  w.maybe("Suffix", p.suffix);
}

const char* yn(bool b) { return b ? "Y" : "N"; }

bool is_label(std::string_view s) {
  return std::find(kAbstractLabels.begin(), kAbstractLabels.end(), s) != kAbstractLabels.end();
}

void render_citation(std::string& out, const CitationRecord& r) {
  XmlWriter w(out);
  w.open("PubmedArticle");
  std::string status = r.status.value_or("MEDLINE");
  w.open("MedlineCitation", {{"Status", status}, {"Owner", "NLM"}});
  std::string version = std::to_string(r.pmid_version);
  w.leaf("PMID", std::to_string(r.pmid), {{"Version", version}});
  write_date(w, "DateCreated", r.date_created);
  write_date(w, "DateCompleted", r.date_completed);
  write_date(w, "DateRevised", r.date_revised);

  w.open("Article", {{"PubModel", "Print"}});
  w.open("Journal");
  if (r.journal.issn) w.leaf("ISSN", *r.journal.issn, {{"IssnType", "Print"}});
  w.open("JournalIssue", {{"CitedMedium", "Print"}});
  w.maybe("Volume", r.journal.volume);
  w.maybe("Issue", r.journal.issue);
  w.open("PubDate");
  if (r.journal.medline_date_raw) {
    w.leaf("MedlineDate", *r.journal.medline_date_raw);
  } else {
    if (r.journal.pub_year) w.leaf("Year", std::to_string(*r.journal.pub_year));
    w.maybe("Month", r.journal.pub_month);
    w.maybe("Day", r.journal.pub_day);
  }
  w.close("PubDate");
  w.close("JournalIssue");
  w.maybe("Title", r.journal.title);
  w.maybe("ISOAbbreviation", r.journal.iso_abbrev);
  w.close("Journal");
  w.maybe("ArticleTitle", r.article_title);
  if (r.pagination) {
    w.open("Pagination");
    w.leaf("MedlinePgn", *r.pagination);
    w.close("Pagination");
  }
  if (r.abstract_text) {
    w.open("Abstract");
    std::string_view rest = *r.abstract_text;
    for (;;) {
      auto cut = rest.find("\n\n");
      std::string_view seg = rest.substr(0, cut);
      auto colon = seg.find(": ");
      if (colon != std::string_view::npos && is_label(seg.substr(0, colon))) {
        std::string label(seg.substr(0, colon));
        w.leaf("AbstractText", seg.substr(colon + 2), {{"Label", label}, {"NlmCategory", label}});
      } else {
        w.leaf("AbstractText", seg);
      }
      if (cut == std::string_view::npos) break;
      rest = rest.substr(cut + 2);
    }
    w.close("Abstract");
  }
  if (!r.authors.empty()) {
    w.open("AuthorList", {{"CompleteYN", "Y"}});
    for (const auto& a : r.authors) {
      w.open("Author", {{"ValidYN", "Y"}});
      w.maybe("LastName", a.last_name);
      w.maybe("ForeName", a.fore_name);
      w.maybe("Initials", a.initials);
      w.maybe("Suffix", a.suffix);
      w.maybe("CollectiveName", a.collective_name);
      if (a.affiliation) {
        w.open("AffiliationInfo");
        w.leaf("Affiliation", *a.affiliation);
        w.close("AffiliationInfo");
      }
      w.close("Author");
    }
    w.close("AuthorList");
  }
  if (r.language) {
    std::string_view langs = *r.language;
    for (;;) {
      auto comma = langs.find(',');
      w.leaf("Language", langs.substr(0, comma));
      if (comma == std::string_view::npos) break;
      langs = langs.substr(comma + 1);
    }
  }
  if (!r.data_banks.empty()) {
    w.open("DataBankList", {{"CompleteYN", "Y"}});
    for (const auto& d : r.data_banks) {
      w.open("DataBank");
      w.leaf("DataBankName", d.name);
      if (!d.accession_numbers.empty()) {
        w.open("AccessionNumberList");
        for (const auto& a : d.accession_numbers) w.leaf("AccessionNumber", a);
        w.close("AccessionNumberList");
      }
      w.close("DataBank");
    }
    w.close("DataBankList");
  }
  if (!r.grants.empty()) {
    w.open("GrantList", {{"CompleteYN", "Y"}});
    for (const auto& g : r.grants) {
      w.open("Grant");
      w.maybe("GrantID", g.grant_id);
      w.maybe("Acronym", g.acronym);
      w.maybe("Agency", g.agency);
      w.maybe("Country", g.country);
      w.close("Grant");
    }
    w.close("GrantList");
  }
  if (!r.publication_types.empty()) {
    w.open("PublicationTypeList");
    for (const auto& t : r.publication_types) w.leaf("PublicationType", t, {{"UI", "D016428"}});
    w.close("PublicationTypeList");
  }
  w.close("Article");

  w.open("MedlineJournalInfo");
  w.maybe("Country", r.country);
  w.maybe("MedlineTA", r.journal.iso_abbrev);
  w.maybe("NlmUniqueID", r.nlm_unique_id);
  w.close("MedlineJournalInfo");

  if (!r.chemicals.empty()) {
    w.open("ChemicalList");
    for (const auto& c : r.chemicals) {
      w.open("Chemical");
      w.leaf("RegistryNumber", c.registry_number);
      w.leaf("NameOfSubstance", c.name_of_substance, {{"UI", "D000000"}});
      w.close("Chemical");
    }
    w.close("ChemicalList");
  }
  for (const auto& s : r.citation_subsets) w.leaf("CitationSubset", s);
  if (!r.comments_corrections.empty()) {
    w.open("CommentsCorrectionsList");
    for (const auto& c : r.comments_corrections) {
      w.open("CommentsCorrections", {{"RefType", c.ref_type}});
      w.leaf("RefSource", "Synthetic reference");
      if (c.ref_pmid) w.leaf("PMID", std::to_string(*c.ref_pmid), {{"Version", "1"}});
      w.maybe("Note", c.note);
      w.close("CommentsCorrections");
    }
    w.close("CommentsCorrectionsList");
  }
  if (!r.gene_symbols.empty()) {
    w.open("GeneSymbolList");
    for (const auto& g : r.gene_symbols) w.leaf("GeneSymbol", g);
    w.close("GeneSymbolList");
  }
  if (!r.mesh.empty()) {
    w.open("MeshHeadingList");
    for (const auto& m : r.mesh) {
      w.open("MeshHeading");
      w.leaf("DescriptorName", m.descriptor, {{"UI", "D006801"}, {"MajorTopicYN", yn(m.descriptor_major)}});
      for (const auto& q : m.qualifiers) w.leaf("QualifierName", q.name, {{"UI", "Q000378"}, {"MajorTopicYN", yn(q.major)}});
      w.close("MeshHeading");
    }
    w.close("MeshHeadingList");
  }
  if (!r.personal_name_subjects.empty()) {
    w.open("PersonalNameSubjectList");
    for (const auto& p : r.personal_name_subjects) {
      w.open("PersonalNameSubject");
      write_person(w, p);
      w.close("PersonalNameSubject");
    }
    w.close("PersonalNameSubjectList");
  }
  if (!r.keywords.empty()) {
    w.open("KeywordList", {{"Owner", "NOTNLM"}});
    for (const auto& k : r.keywords) w.leaf("Keyword", k.keyword, {{"MajorTopicYN", yn(k.major)}});
    w.close("KeywordList");
  }
  if (!r.investigators.empty()) {
    w.open("InvestigatorList");
    for (const auto& i : r.investigators) {
      w.open("Investigator", {{"ValidYN", "Y"}});
      write_person(w, i.name);
      if (i.affiliation) {
        w.open("AffiliationInfo");
        w.leaf("Affiliation", *i.affiliation);
        w.close("AffiliationInfo");
      }
      w.close("Investigator");
    }
    w.close("InvestigatorList");
  }
  if (r.pmid % 10 == 3) w.leaf("CoiStatement", "The authors declare no competing interests.");
  w.close("MedlineCitation");

  w.open("PubmedData");
  w.leaf("PublicationStatus", "ppublish");
  w.open("ArticleIdList");
  w.leaf("ArticleId", std::to_string(r.pmid), {{"IdType", "pubmed"}});
  w.close("ArticleIdList");
  w.close("PubmedData");
  w.close("PubmedArticle");
}

constexpr std::string_view kPrologue =
    "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    "<!DOCTYPE PubmedArticleSet PUBLIC \"-//NLM//DTD PubMedArticle, 1st January 2024//EN\" "
    "\"https://dtd.nlm.nih.gov/ncbi/pubmed/out/pubmed_240101.dtd\">\n"
    "<PubmedArticleSet>\n";
constexpr std::string_view kEpilogue = "</PubmedArticleSet>\n";

template <typename Emit>
void render_events(const std::vector<ParseEvent>& events, Emit&& emit) {
  emit(kPrologue);
  std::string buf;
  std::size_t i = 0;
  while (i < events.size()) {
    buf.clear();
    if (auto* c = std::get_if<CitationRecord>(&events[i])) {
      render_citation(buf, *c);
      ++i;
    } else {
      buf += "  <DeleteCitation>\n";
      while (i < events.size() && std::holds_alternative<Deletion>(events[i])) {
        buf += fmt::format("    <PMID Version=\"1\">{}</PMID>\n", std::get<Deletion>(events[i]).pmid);
        ++i;
      }
      buf += "  </DeleteCitation>\n";
    }
    emit(buf);
  }
  emit(kEpilogue);
}

class GzipFile {
 public:
  explicit GzipFile(const fs::path& path) : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw Error("cannot write " + path.string());
    if (deflateInit2(&zs_, 6, Z_DEFLATED, 16 + MAX_WBITS, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
      throw Error("zlib: deflateInit2 failed");
    }
  }
  ~GzipFile() { deflateEnd(&zs_); }

  void write(std::string_view bytes) { pump(bytes, Z_NO_FLUSH); }
  void finish() {
    pump({}, Z_FINISH);
    out_.close();
    if (!out_) throw Error("write failed while finishing archive");
  }

 private:
  void pump(std::string_view bytes, int mode) {
    zs_.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(bytes.data()));
    zs_.avail_in = static_cast<uInt>(bytes.size());
    int rc;
    do {
      zs_.next_out = buf_.data();
      zs_.avail_out = static_cast<uInt>(buf_.size());
      rc = deflate(&zs_, mode);
      if (rc == Z_STREAM_ERROR) throw Error("zlib: deflate failed");
      out_.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size() - zs_.avail_out));
    } while (zs_.avail_out == 0 || (mode == Z_FINISH && rc != Z_STREAM_END));
  }

  std::ofstream out_;
  z_stream zs_{};
  std::array<unsigned char, 64 * 1024> buf_{};
};

const std::array<ErrorCode, 4> kCodes = {ErrorCode::FieldTooLong, ErrorCode::DuplicateKey, ErrorCode::StorageFull,
                                         ErrorCode::Other};

}  // namespace

void CorpusSpec::validate() const {
  if (files == 0) throw InvalidSpec("files must be positive");
  if (distinct_journals == 0) throw InvalidSpec("distinct_journals must be positive");
  if (deletions > citations) throw InvalidSpec("deletions exceed citations");
  if (duplicate_pmids > citations) throw InvalidSpec("duplicate_pmids exceed citations");
  if (update_files && *update_files > files) throw InvalidSpec("update_files exceed files");
}

std::uint32_t CorpusSpec::resolved_update_files() const {
  if (update_files) return *update_files;
  return files > 1 ? 1 : 0;
}

std::vector<PlannedFile> plan_corpus(const CorpusSpec& spec) { return build_plan(spec).files; }

void write_citation_set(std::ostream& out, const std::vector<ParseEvent>& events) {
  render_events(events, [&](std::string_view s) { out.write(s.data(), static_cast<std::streamsize>(s.size())); });
}

void write_single_document(const CorpusSpec& spec, std::ostream& out) {
  spec.validate();
  out << kPrologue;
  std::string buf;
  for (std::uint64_t i = 0; i < spec.citations; ++i) {
    buf.clear();
    render_citation(buf, make_citation(spec, i));
    out << buf;
  }
  out << kEpilogue;
}

CorpusManifest generate(const CorpusSpec& spec, const fs::path& out_dir) {
  Plan plan = build_plan(spec);
  CorpusManifest m;
  m.spec = spec;
  for (const auto& t : medline_schema().tables) m.table_rows[t.name] = 0;
  for (auto c : kCodes) m.errors_by_code[std::string(to_string(c))] = 0;

  for (const auto& pf : plan.files) {
    fs::path dir = out_dir / repository_dir(pf.repository);
    fs::create_directories(dir);
    fs::path archive = dir / (pf.name + std::string(kArchiveSuffix));
    {
      GzipFile gz(archive);
      render_events(pf.events, [&](std::string_view s) { gz.write(s); });
      gz.finish();
    }
    GeneratedFile gf;
    gf.name = pf.name;
    gf.repository = pf.repository;
    for (const auto& ev : pf.events) {
      if (auto* c = std::get_if<CitationRecord>(&ev)) {
        ++gf.citations;
        gf.pmids.push_back(c->pmid);
      } else {
        ++gf.deletions;
        gf.deleted_pmids.push_back(std::get<Deletion>(ev).pmid);
      }
    }
    gf.compressed_bytes = fs::file_size(archive);
    gf.md5 = md5_file(archive);
    std::ofstream(fs::path(archive.string() + std::string(kDigestSuffix)))
        << "MD5(" << archive.filename().string() << ")= " << gf.md5 << "\n";
    m.files.push_back(std::move(gf));
  }

  // Expected database contents: every unique citation loads once, except
  // the over-long author rows; each re-sent copy collides on every row;
  // deletions remove everything for their pmid.
  std::set<std::uint64_t> deleted(plan.deleted.begin(), plan.deleted.end());
  std::set<std::string> journals;
  for (std::uint64_t i = 0; i < plan.base.size(); ++i) {
    const auto& rec = plan.base[i];
    if (plan.overlong.count(i)) {
      m.expected_errors.push_back({ErrorCode::FieldTooLong, "medline_author", rec.pmid, "initials", 1});
      m.errors_by_code["FieldTooLong"] += 1;
    }
    if (deleted.count(i)) continue;
    for (const auto& [table, n] : expected_rows(rec)) m.table_rows[table] += n;
    if (plan.overlong.count(i)) m.table_rows["medline_author"] -= 1;
    ++m.citations_loaded;
    journals.insert(*rec.journal.title);
  }
  for (auto src : plan.duplicate_sources) {
    const auto& rec = plan.base[src];
    for (const auto& [table, n] : expected_rows(rec)) {
      if (n == 0) continue;
      m.expected_errors.push_back({ErrorCode::DuplicateKey, table, rec.pmid, "pmid", n});
      m.errors_by_code["DuplicateKey"] += n;
    }
  }
  m.distinct_journals = journals.size();
  for (auto i : plan.deleted) m.deleted_pmids.push_back(plan.base[i].pmid);

  std::ofstream(out_dir / "manifest.json") << m.to_json() << "\n";
  return m;
}

std::string CorpusManifest::to_json() const {
  nlohmann::ordered_json j;
  nlohmann::ordered_json s;
  s["citations"] = spec.citations;
  s["files"] = spec.files;
  s["seed"] = spec.seed;
  s["duplicate_pmids"] = spec.duplicate_pmids;
  s["overlong_fields"] = spec.overlong_fields;
  s["deletions"] = spec.deletions;
  s["distinct_journals"] = spec.distinct_journals;
  s["update_files"] = spec.resolved_update_files();
  s["abstract_sentences"] = spec.abstract_sentences;
  j["spec"] = s;
  auto files_json = nlohmann::ordered_json::array();
  for (const auto& f : files) {
    nlohmann::ordered_json fj;
    fj["name"] = f.name;
    fj["repository"] = std::string(to_string(f.repository));
    fj["citations"] = f.citations;
    fj["deletions"] = f.deletions;
    fj["compressed_bytes"] = f.compressed_bytes;
    fj["md5"] = f.md5;
    fj["pmids"] = f.pmids;
    fj["deleted_pmids"] = f.deleted_pmids;
    files_json.push_back(std::move(fj));
  }
  j["files"] = std::move(files_json);
  j["table_rows"] = table_rows;
  j["errors_by_code"] = errors_by_code;
  auto errs = nlohmann::ordered_json::array();
  for (const auto& e : expected_errors) {
    errs.push_back(nlohmann::ordered_json{{"code", std::string(to_string(e.code))},
                                          {"table", e.table},
                                          {"pmid", e.pmid},
                                          {"field", e.field},
                                          {"count", e.count}});
  }
  j["expected_errors"] = std::move(errs);
  j["citations_loaded"] = citations_loaded;
  j["distinct_journals"] = distinct_journals;
  j["deleted_pmids"] = deleted_pmids;
  return j.dump(2);
}

CorpusManifest CorpusManifest::from_json(std::string_view text) {
  auto j = nlohmann::json::parse(text);
  CorpusManifest m;
  const auto& s = j.at("spec");
  m.spec.citations = s.at("citations").get<std::uint64_t>();
  m.spec.files = s.at("files").get<std::uint32_t>();
  m.spec.seed = s.at("seed").get<std::uint64_t>();
  m.spec.duplicate_pmids = s.at("duplicate_pmids").get<std::uint64_t>();
  m.spec.overlong_fields = s.at("overlong_fields").get<std::uint64_t>();
  m.spec.deletions = s.at("deletions").get<std::uint64_t>();
  m.spec.distinct_journals = s.at("distinct_journals").get<std::uint32_t>();
  m.spec.update_files = s.at("update_files").get<std::uint32_t>();
  m.spec.abstract_sentences = s.value("abstract_sentences", 4u);
  for (const auto& fj : j.at("files")) {
    GeneratedFile f;
    f.name = fj.at("name").get<std::string>();
    f.repository = repository_from_string(fj.at("repository").get<std::string>()).value_or(Repository::Baseline);
    f.citations = fj.at("citations").get<std::uint64_t>();
    f.deletions = fj.at("deletions").get<std::uint64_t>();
    f.compressed_bytes = fj.at("compressed_bytes").get<std::uint64_t>();
    f.md5 = fj.at("md5").get<std::string>();
    f.pmids = fj.at("pmids").get<std::vector<Pmid>>();
    f.deleted_pmids = fj.at("deleted_pmids").get<std::vector<Pmid>>();
    m.files.push_back(std::move(f));
  }
  m.table_rows = j.at("table_rows").get<std::map<std::string, std::uint64_t>>();
  m.errors_by_code = j.at("errors_by_code").get<std::map<std::string, std::uint64_t>>();
  for (const auto& ej : j.at("expected_errors")) {
    ExpectedErrorGroup e;
    e.code = error_code_from_string(ej.at("code").get<std::string>()).value_or(ErrorCode::Other);
    e.table = ej.at("table").get<std::string>();
    e.pmid = ej.at("pmid").get<Pmid>();
    e.field = ej.at("field").get<std::string>();
    e.count = ej.at("count").get<std::uint64_t>();
    m.expected_errors.push_back(std::move(e));
  }
  m.citations_loaded = j.at("citations_loaded").get<std::uint64_t>();
  m.distinct_journals = j.at("distinct_journals").get<std::uint64_t>();
  m.deleted_pmids = j.at("deleted_pmids").get<std::vector<Pmid>>();
  return m;
}

CorpusManifest CorpusManifest::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read manifest " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace medbase
