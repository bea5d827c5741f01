#pragma once

// Citance extraction from citing papers and the averaged citation TF-IDF
// token feature.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "citeie/corpus.hpp"

namespace citeie {

using Sentence = std::vector<std::string>;

struct ReferenceMarker {
  std::size_t section = 0;
  std::size_t sentence = 0;  // index within the section
  std::string target;        // record id of the cited paper
};

// A citing paper split into sections of sentences, with reference markers.
struct CitingDoc {
  std::string doc_id;
  std::vector<std::vector<Sentence>> sections;
  std::vector<ReferenceMarker> markers;
};

struct Citance {
  std::string target_id;
  std::string citing_doc_id;
  std::vector<Sentence> sentences;  // 1 or 3
  std::size_t anchor_section = 0;
  std::size_t anchor_sentence = 0;

  std::vector<std::string> tokens() const;
  bool operator==(const Citance&) const = default;
};

inline constexpr std::size_t kMaxCitingDocs = 25;

// Citing docs without a marker to `target` are skipped with a warning. When
// more than `max_citing` remain, a seeded uniform sample without replacement
// is taken; the result is ordered by citing doc id.
std::vector<Citance> extract_citances(const std::string& target,
                                      std::span<const CitingDoc> citing_docs,
                                      std::size_t max_citing, std::uint64_t seed);

// Appends one citance section per citance. Throws UsageError if the
// document already has citance sections.
Document append_citance_sections(const Document& doc, std::span<const Citance> citances);

class IdfTable {
public:
  IdfTable() = default;
  IdfTable(std::unordered_map<std::string, std::size_t> doc_freq, std::size_t n_citances);

  std::size_t n_citances() const { return n_; }
  std::size_t doc_freq(const std::string& token) const;
  const std::unordered_map<std::string, std::size_t>& table() const { return df_; }
  // ln((1 + n) / (1 + df)) + 1
  double idf(const std::string& token) const;

  bool operator==(const IdfTable&) const = default;

private:
  std::unordered_map<std::string, std::size_t> df_;
  std::size_t n_ = 0;
};

// Each citance counts as one document.
IdfTable build_idf(std::span<const Citance> citances);

// feature(w) = mean over citances c of (count(w, c) / |c|) * idf(w); all
// zeros when there are no citances.
std::vector<double> citation_tfidf(std::span<const std::string> doc_tokens,
                                   std::span<const Citance> citances, const IdfTable& idf);

// Line-delimited citing documents:
// {doc_id, sections: [[[token]]], markers: [{section, sentence, target}]}.
std::vector<CitingDoc> read_citing_docs(std::istream& in);
std::vector<CitingDoc> load_citing_docs(const std::string& path);

// Citance cache: {target_id, citing_doc_id, sentences, anchor: [section, sentence]}.
void write_citances(std::ostream& out, std::span<const Citance> citances);
std::vector<Citance> read_citances(std::istream& in);
void save_citances(const std::string& path, std::span<const Citance> citances);
std::vector<Citance> load_citances(const std::string& path);

// Header `n_citances<TAB>n`, then `token<TAB>doc_freq` sorted by token.
void write_idf(std::ostream& out, const IdfTable& idf);
IdfTable read_idf(std::istream& in);
void save_idf(const std::string& path, const IdfTable& idf);
IdfTable load_idf(const std::string& path);

// Groups a citance cache by target id.
std::map<std::string, std::vector<Citance>> group_by_target(std::span<const Citance> citances);

}  // namespace citeie
