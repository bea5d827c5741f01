#include "citeie/citation_text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "citeie/errors.hpp"
#include "citeie/log.hpp"
#include "citeie/rng.hpp"
#include "json.hpp"

namespace citeie {

using nlohmann::json;

std::vector<std::string> Citance::tokens() const {
  std::vector<std::string> out;
  for (const auto& s : sentences) out.insert(out.end(), s.begin(), s.end());
  return out;
}

std::vector<Citance> extract_citances(const std::string& target,
                                      std::span<const CitingDoc> citing_docs,
                                      std::size_t max_citing, std::uint64_t seed) {
  struct Candidate {
    const CitingDoc* doc;
    ReferenceMarker anchor;
  };
  std::vector<Candidate> cands;
  for (const auto& d : citing_docs) {
    const ReferenceMarker* first = nullptr;
    for (const auto& m : d.markers) {
      if (m.target != target) continue;
      if (m.section >= d.sections.size() || m.sentence >= d.sections[m.section].size())
        throw ValidationError("citing doc '" + d.doc_id + "': marker outside its sentences");
      if (!first || std::tie(m.section, m.sentence) < std::tie(first->section, first->sentence))
        first = &m;
    }
    if (!first) {
      log::warn("citing doc '" + d.doc_id + "' has no marker to '" + target + "'; skipped");
      continue;
    }
    cands.push_back({&d, *first});
  }
  std::sort(cands.begin(), cands.end(),
            [](const Candidate& a, const Candidate& b) { return a.doc->doc_id < b.doc->doc_id; });

  if (cands.size() > max_citing) {
    Rng rng = stream(seed, fnv1a(target));
    // Partial Fisher-Yates: the first max_citing slots form the sample.
    for (std::size_t i = 0; i < max_citing; ++i) {
      std::size_t j = i + uniform_index(rng, cands.size() - i);
      std::swap(cands[i], cands[j]);
    }
    cands.resize(max_citing);
    std::sort(cands.begin(), cands.end(),
              [](const Candidate& a, const Candidate& b) { return a.doc->doc_id < b.doc->doc_id; });
  }

  std::vector<Citance> out;
  for (const auto& c : cands) {
    const auto& sents = c.doc->sections[c.anchor.section];
    const std::size_t k = c.anchor.sentence;
    Citance ct;
    ct.target_id = target;
    ct.citing_doc_id = c.doc->doc_id;
    ct.anchor_section = c.anchor.section;
    ct.anchor_sentence = k;
    if (k > 0 && k + 1 < sents.size()) {
      ct.sentences = {sents[k - 1], sents[k], sents[k + 1]};
    } else {
      ct.sentences = {sents[k]};
    }
    out.push_back(std::move(ct));
  }
  return out;
}

Document append_citance_sections(const Document& doc, std::span<const Citance> citances) {
  for (const auto& s : doc.sections)
    if (s.kind == SectionKind::citance)
      throw UsageError("document '" + doc.doc_id + "' already has citance sections");
  Document out = doc;
  for (const auto& c : citances) {
    Section s;
    s.tokens = c.tokens();
    s.kind = SectionKind::citance;
    s.source_doc_id = c.citing_doc_id;
    out.sections.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------

IdfTable::IdfTable(std::unordered_map<std::string, std::size_t> doc_freq, std::size_t n)
    : df_(std::move(doc_freq)), n_(n) {
  for (const auto& [tok, df] : df_)
    if (df == 0 || df > n_)
      throw ValidationError("idf table: doc_freq of '" + tok + "' outside (0, n_citances]");
}

std::size_t IdfTable::doc_freq(const std::string& token) const {
  auto it = df_.find(token);
  return it == df_.end() ? 0 : it->second;
}

double IdfTable::idf(const std::string& token) const {
  return std::log((1.0 + static_cast<double>(n_)) / (1.0 + static_cast<double>(doc_freq(token)))) +
         1.0;
}

IdfTable build_idf(std::span<const Citance> citances) {
  std::unordered_map<std::string, std::size_t> df;
  for (const auto& c : citances) {
    std::set<std::string> seen;
    for (const auto& s : c.sentences) seen.insert(s.begin(), s.end());
    for (const auto& t : seen) ++df[t];
  }
  return IdfTable(std::move(df), citances.size());
}

std::vector<double> citation_tfidf(std::span<const std::string> doc_tokens,
                                   std::span<const Citance> citances, const IdfTable& idf) {
  std::vector<double> out(doc_tokens.size(), 0.0);
  if (citances.empty()) return out;

  // Per-citance normalized term frequency.
  std::vector<std::unordered_map<std::string, double>> tf(citances.size());
  for (std::size_t c = 0; c < citances.size(); ++c) {
    std::size_t len = 0;
    for (const auto& s : citances[c].sentences) {
      len += s.size();
      for (const auto& t : s) tf[c][t] += 1.0;
    }
    if (len > 0)
      for (auto& [t, v] : tf[c]) v /= static_cast<double>(len);
  }

  std::unordered_map<std::string, double> cache;
  for (std::size_t i = 0; i < doc_tokens.size(); ++i) {
    const std::string& w = doc_tokens[i];
    auto it = cache.find(w);
    if (it == cache.end()) {
      double sum = 0;
      for (const auto& m : tf)
        if (auto f = m.find(w); f != m.end()) sum += f->second;
      double value = sum == 0 ? 0.0 : sum * idf.idf(w) / static_cast<double>(citances.size());
      it = cache.emplace(w, value).first;
    }
    out[i] = it->second;
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

template <class F>
void for_each_json_line(std::istream& in, F&& f) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      f(json::parse(line));
    } catch (const json::exception& e) {
      throw ParseError(e.what(), lineno);
    }
  }
}

}  // namespace

std::vector<CitingDoc> read_citing_docs(std::istream& in) {
  std::vector<CitingDoc> out;
  for_each_json_line(in, [&](const json& j) {
    CitingDoc d;
    d.doc_id = j.at("doc_id").get<std::string>();
    d.sections = j.at("sections").get<std::vector<std::vector<Sentence>>>();
    if (j.contains("markers"))
      for (const auto& m : j["markers"])
        d.markers.push_back({m.at("section").get<std::size_t>(), m.at("sentence").get<std::size_t>(),
                             m.at("target").get<std::string>()});
    out.push_back(std::move(d));
  });
  return out;
}

std::vector<CitingDoc> load_citing_docs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open citing documents '" + path + "'");
  return read_citing_docs(in);
}

void write_citances(std::ostream& out, std::span<const Citance> citances) {
  for (const auto& c : citances) {
    json j;
    j["target_id"] = c.target_id;
    j["citing_doc_id"] = c.citing_doc_id;
    j["sentences"] = c.sentences;
    j["anchor"] = {c.anchor_section, c.anchor_sentence};
    out << j.dump() << '\n';
  }
}

std::vector<Citance> read_citances(std::istream& in) {
  std::vector<Citance> out;
  for_each_json_line(in, [&](const json& j) {
    Citance c;
    c.target_id = j.at("target_id").get<std::string>();
    c.citing_doc_id = j.at("citing_doc_id").get<std::string>();
    c.sentences = j.at("sentences").get<std::vector<Sentence>>();
    const auto& a = j.at("anchor");
    c.anchor_section = a.at(0).get<std::size_t>();
    c.anchor_sentence = a.at(1).get<std::size_t>();
    if (c.sentences.empty() || c.sentences.size() > 3)
      throw ValidationError("citance cache: citance must hold 1-3 sentences");
    out.push_back(std::move(c));
  });
  return out;
}

void save_citances(const std::string& path, std::span<const Citance> citances) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write citance cache '" + path + "'");
  write_citances(out, citances);
}

std::vector<Citance> load_citances(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open citance cache '" + path + "'");
  return read_citances(in);
}

void write_idf(std::ostream& out, const IdfTable& idf) {
  out << "n_citances\t" << idf.n_citances() << '\n';
  std::vector<std::pair<std::string, std::size_t>> rows(idf.table().begin(), idf.table().end());
  std::sort(rows.begin(), rows.end());
  for (const auto& [tok, df] : rows) out << tok << '\t' << df << '\n';
}

IdfTable read_idf(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("n_citances\t", 0) != 0)
    throw ParseError("expected `n_citances<TAB>n` header", 1);
  std::size_t n = std::stoull(line.substr(11));
  std::unordered_map<std::string, std::size_t> df;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto tab = line.rfind('\t');
    if (tab == std::string::npos) throw ParseError("expected token<TAB>doc_freq", lineno);
    try {
      df[line.substr(0, tab)] = std::stoull(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw ParseError("bad doc_freq", lineno);
    }
  }
  return IdfTable(std::move(df), n);
}

void save_idf(const std::string& path, const IdfTable& idf) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write idf table '" + path + "'");
  write_idf(out, idf);
}

IdfTable load_idf(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open idf table '" + path + "'");
  return read_idf(in);
}

std::map<std::string, std::vector<Citance>> group_by_target(std::span<const Citance> citances) {
  std::map<std::string, std::vector<Citance>> out;
  for (const auto& c : citances) out[c.target_id].push_back(c);
  return out;
}

}  // namespace citeie
