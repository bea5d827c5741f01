#include "citeie/linkage.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include "citeie/errors.hpp"
#include "json.hpp"

namespace citeie {

using nlohmann::json;

std::string normalize_title(std::string_view title) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  icu::UnicodeString text = icu::UnicodeString::fromUTF8(
      icu::StringPiece(title.data(), static_cast<int32_t>(title.size())));
  text.foldCase();
  if (U_SUCCESS(status)) text = nfc->normalize(text, status);
  if (U_FAILURE(status)) throw ValidationError("title normalization failed");

  std::string utf8;
  text.toUTF8String(utf8);

  std::string out;
  out.reserve(utf8.size());
  bool pending_space = false;
  for (unsigned char c : utf8) {
    if (c < 0x80 && std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (c < 0x80 && std::ispunct(c)) continue;
    if (pending_space) out += ' ';
    pending_space = false;
    out += static_cast<char>(c);
  }
  return out;
}

std::string casefold(std::string_view text) {
  icu::UnicodeString u = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  u.foldCase();
  std::string out;
  u.toUTF8String(out);
  return out;
}

std::string_view to_string(IdKind k) {
  switch (k) {
    case IdKind::s2_id: return "s2_id";
    case IdKind::doi: return "doi";
    case IdKind::arxiv_id: return "arxiv_id";
    case IdKind::title: return "title";
  }
  return "?";
}

namespace {

void index_unique(std::unordered_map<std::string, std::size_t>& index,
                  const std::optional<std::string>& key, std::size_t idx,
                  const std::vector<MetaRecord>& records, std::string_view kind) {
  if (!key || key->empty()) return;
  auto [it, inserted] = index.emplace(*key, idx);
  if (!inserted)
    throw ValidationError("store integrity: records '" + records[it->second].record_id +
                          "' and '" + records[idx].record_id + "' share " + std::string(kind) +
                          " '" + *key + "'");
}

std::optional<std::string> opt_string(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  auto s = j[key].get<std::string>();
  if (s.empty()) return std::nullopt;
  return s;
}

}  // namespace

MetaStore::MetaStore(std::vector<MetaRecord> records) : records_(std::move(records)) {
  by_id_.reserve(records_.size());
  for (std::size_t i = 0; i < records_.size(); ++i) {
    MetaRecord& r = records_[i];
    if (r.title_norm.empty() && !r.title.empty()) r.title_norm = normalize_title(r.title);
    if (!by_id_.emplace(r.record_id, i).second)
      throw ValidationError("store integrity: duplicate record_id '" + r.record_id + "'");
    index_unique(by_doi_, r.doi, i, records_, "doi");
    index_unique(by_arxiv_, r.arxiv_id, i, records_, "arxiv_id");
    index_unique(by_s2_, r.s2_id, i, records_, "s2_id");
    if (!r.title_norm.empty()) by_title_.emplace(r.title_norm, i);
  }
}

const MetaRecord* MetaStore::find(std::string_view record_id) const {
  auto it = by_id_.find(std::string(record_id));
  return it == by_id_.end() ? nullptr : &records_[it->second];
}

std::optional<std::size_t> MetaStore::index_of(std::string_view record_id) const {
  auto it = by_id_.find(std::string(record_id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::size_t> MetaStore::lookup(IdKind kind, const std::string& value) const {
  std::vector<std::size_t> out;
  auto single = [&](const std::unordered_map<std::string, std::size_t>& m) {
    if (auto it = m.find(value); it != m.end()) out.push_back(it->second);
  };
  switch (kind) {
    case IdKind::s2_id: single(by_s2_); break;
    case IdKind::doi: single(by_doi_); break;
    case IdKind::arxiv_id: single(by_arxiv_); break;
    case IdKind::title: {
      auto [lo, hi] = by_title_.equal_range(value);
      for (auto it = lo; it != hi; ++it) out.push_back(it->second);
      std::sort(out.begin(), out.end());
      break;
    }
  }
  return out;
}

MetaStore read_store(std::istream& in) {
  std::vector<MetaRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json j = json::parse(line);
      MetaRecord r;
      r.record_id = j.at("record_id").get<std::string>();
      r.title = j.value("title", std::string());
      r.title_norm = normalize_title(r.title);
      r.doi = opt_string(j, "doi");
      r.arxiv_id = opt_string(j, "arxiv_id");
      r.s2_id = opt_string(j, "s2_id");
      if (j.contains("outbound")) r.outbound = j["outbound"].get<std::vector<std::string>>();
      if (j.contains("inbound")) r.inbound = j["inbound"].get<std::vector<std::string>>();
      records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  return MetaStore(std::move(records));
}

MetaStore load_store(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open metadata store '" + path + "'");
  return read_store(in);
}

void write_store(std::ostream& out, const MetaStore& store) {
  for (const auto& r : store.records()) {
    json j;
    j["record_id"] = r.record_id;
    j["title"] = r.title;
    j["doi"] = r.doi ? json(*r.doi) : json(nullptr);
    j["arxiv_id"] = r.arxiv_id ? json(*r.arxiv_id) : json(nullptr);
    j["s2_id"] = r.s2_id ? json(*r.s2_id) : json(nullptr);
    j["outbound"] = r.outbound;
    j["inbound"] = r.inbound;
    out << j.dump() << '\n';
  }
}

std::vector<DocIdentifiers> read_doc_identifiers(std::istream& in) {
  std::vector<DocIdentifiers> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json j = json::parse(line);
      out.push_back({j.at("doc_id").get<std::string>(), opt_string(j, "title"),
                     opt_string(j, "doi"), opt_string(j, "arxiv_id"), opt_string(j, "s2_id")});
    } catch (const json::exception& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  return out;
}

std::vector<DocIdentifiers> load_doc_identifiers(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open identifier file '" + path + "'");
  return read_doc_identifiers(in);
}

std::optional<std::string> LinkMap::record_for(const std::string& doc_id) const {
  auto it = pairs.find(doc_id);
  if (it == pairs.end()) return std::nullopt;
  return it->second;
}

namespace {

// (kind, value) probes in priority order s2_id > doi > arxiv_id > title.
std::vector<std::pair<IdKind, std::string>> probes(const DocIdentifiers& d) {
  std::vector<std::pair<IdKind, std::string>> out;
  if (d.s2_id) out.emplace_back(IdKind::s2_id, *d.s2_id);
  if (d.doi) out.emplace_back(IdKind::doi, *d.doi);
  if (d.arxiv_id) out.emplace_back(IdKind::arxiv_id, *d.arxiv_id);
  if (d.title) {
    std::string norm = normalize_title(*d.title);
    if (!norm.empty()) out.emplace_back(IdKind::title, std::move(norm));
  }
  return out;
}

}  // namespace

LinkMap link_records(std::span<const DocIdentifiers> docs, const MetaStore& store) {
  std::vector<const DocIdentifiers*> order;
  order.reserve(docs.size());
  for (const auto& d : docs) order.push_back(&d);
  std::sort(order.begin(), order.end(),
            [](const DocIdentifiers* a, const DocIdentifiers* b) { return a->doc_id < b->doc_id; });

  LinkMap map;
  std::map<std::string, std::string> claimed;  // record_id -> doc_id
  for (std::size_t i = 0; i < order.size(); ++i) {
    const DocIdentifiers& d = *order[i];
    if (i > 0 && order[i - 1]->doc_id == d.doc_id)
      throw ValidationError("duplicate corpus doc_id '" + d.doc_id + "'");

    // record index -> first (highest-priority) identifier that matched it
    std::map<std::size_t, IdKind> hits;
    for (const auto& [kind, value] : probes(d))
      for (std::size_t idx : store.lookup(kind, value)) hits.emplace(idx, kind);

    if (hits.empty()) {
      map.unmatched.push_back(d.doc_id);
      continue;
    }
    if (hits.size() > 1) {
      std::string msg = "ambiguous link for document '" + d.doc_id + "':";
      for (auto [idx, kind] : hits)
        msg += " '" + store.records()[idx].record_id + "' (" + std::string(to_string(kind)) + ")";
      throw ValidationError(msg);
    }
    const std::string& rid = store.records()[hits.begin()->first].record_id;
    if (auto [it, fresh] = claimed.emplace(rid, d.doc_id); !fresh)
      throw ValidationError("documents '" + it->second + "' and '" + d.doc_id +
                            "' both link to record '" + rid + "'");
    map.pairs.emplace(d.doc_id, rid);
  }
  return map;
}

bool link_is_sound(const LinkMap& map, std::span<const DocIdentifiers> docs,
                   const MetaStore& store) {
  std::map<std::string, const DocIdentifiers*> by_doc;
  for (const auto& d : docs) by_doc[d.doc_id] = &d;
  for (const auto& [doc_id, rid] : map.pairs) {
    auto it = by_doc.find(doc_id);
    const MetaRecord* r = store.find(rid);
    if (it == by_doc.end() || !r) return false;
    const DocIdentifiers& d = *it->second;
    bool ok = (d.s2_id && r->s2_id == d.s2_id) || (d.doi && r->doi == d.doi) ||
              (d.arxiv_id && r->arxiv_id == d.arxiv_id) ||
              (d.title && !r->title_norm.empty() && normalize_title(*d.title) == r->title_norm);
    if (!ok) return false;
  }
  return true;
}

void write_link_map(std::ostream& out, const LinkMap& map) {
  std::map<std::string, std::string> rows(map.pairs.begin(), map.pairs.end());
  for (const auto& d : map.unmatched) rows.emplace(d, std::string());
  for (const auto& [doc, rec] : rows) out << doc << '\t' << rec << '\n';
}

LinkMap read_link_map(std::istream& in) {
  LinkMap map;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) throw ParseError("expected doc_id<TAB>record_id", lineno);
    std::string doc = line.substr(0, tab);
    std::string rec = line.substr(tab + 1);
    if (rec.empty()) map.unmatched.push_back(doc);
    else map.pairs.emplace(doc, rec);
  }
  std::sort(map.unmatched.begin(), map.unmatched.end());
  return map;
}

void save_link_map(const std::string& path, const LinkMap& map) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write link map '" + path + "'");
  write_link_map(out, map);
}

LinkMap load_link_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open link map '" + path + "'");
  return read_link_map(in);
}

}  // namespace citeie
