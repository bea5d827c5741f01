#pragma once

// Exact-identifier linkage between corpus documents and an offline
// bibliographic metadata store.

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace citeie {

struct MetaRecord {
  std::string record_id;
  std::string title;       // as given
  std::string title_norm;  // normalize_title(title)
  std::optional<std::string> doi;
  std::optional<std::string> arxiv_id;
  std::optional<std::string> s2_id;
  std::vector<std::string> outbound;  // papers this record cites
  std::vector<std::string> inbound;   // papers citing this record
};

// Unicode NFC, full case folding, whitespace collapsed to single spaces,
// ASCII punctuation removed.
std::string normalize_title(std::string_view title);

// Unicode full case folding of UTF-8 text.
std::string casefold(std::string_view text);

enum class IdKind { s2_id = 0, doi = 1, arxiv_id = 2, title = 3 };
std::string_view to_string(IdKind k);

// Read-only store indexed by record_id and every identifier kind.
class MetaStore {
public:
  MetaStore() = default;
  // Throws ValidationError on duplicate record ids or on two records
  // claiming the same DOI, arXiv id or S2 id.
  explicit MetaStore(std::vector<MetaRecord> records);

  std::size_t size() const { return records_.size(); }
  const std::vector<MetaRecord>& records() const { return records_; }
  const MetaRecord* find(std::string_view record_id) const;
  std::optional<std::size_t> index_of(std::string_view record_id) const;

  // Records whose identifier of `kind` equals `value` (title compared in
  // normalized form; caller passes the normalized title).
  std::vector<std::size_t> lookup(IdKind kind, const std::string& value) const;

private:
  std::vector<MetaRecord> records_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::unordered_map<std::string, std::size_t> by_doi_;
  std::unordered_map<std::string, std::size_t> by_arxiv_;
  std::unordered_map<std::string, std::size_t> by_s2_;
  std::unordered_multimap<std::string, std::size_t> by_title_;
};

MetaStore read_store(std::istream& in);
MetaStore load_store(const std::string& path);
void write_store(std::ostream& out, const MetaStore& store);

struct DocIdentifiers {
  std::string doc_id;
  std::optional<std::string> title;
  std::optional<std::string> doi;
  std::optional<std::string> arxiv_id;
  std::optional<std::string> s2_id;
};

std::vector<DocIdentifiers> read_doc_identifiers(std::istream& in);
std::vector<DocIdentifiers> load_doc_identifiers(const std::string& path);

struct LinkMap {
  std::map<std::string, std::string> pairs;  // doc_id -> record_id
  std::vector<std::string> unmatched;        // sorted

  std::optional<std::string> record_for(const std::string& doc_id) const;
  bool operator==(const LinkMap&) const = default;
};

// A document links to a record iff one of its identifiers matches exactly.
// Throws ValidationError when a document matches two distinct records or
// two documents claim the same record.
LinkMap link_records(std::span<const DocIdentifiers> docs, const MetaStore& store);

// Post-hoc soundness check: every pair shares at least one identifier.
bool link_is_sound(const LinkMap& map, std::span<const DocIdentifiers> docs,
                   const MetaStore& store);

// Two columns `doc_id<TAB>record_id`; unmatched documents have an empty
// second column.
void write_link_map(std::ostream& out, const LinkMap& map);
LinkMap read_link_map(std::istream& in);
void save_link_map(const std::string& path, const LinkMap& map);
LinkMap load_link_map(const std::string& path);

}  // namespace citeie
