#pragma once

// Annotated-document data model, corpus file I/O and IOBES tag conversion.

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace citeie {

enum class EntityType : std::uint8_t { Task = 0, Dataset = 1, Method = 2, Metric = 3 };

inline constexpr std::array<EntityType, 4> kEntityTypes = {
    EntityType::Task, EntityType::Dataset, EntityType::Method, EntityType::Metric};

std::string_view to_string(EntityType t);
EntityType parse_entity_type(std::string_view s);

enum class SectionKind : std::uint8_t { body, citance };

struct Section {
  std::vector<std::string> tokens;
  SectionKind kind = SectionKind::body;
  std::optional<std::string> source_doc_id;  // citing paper, citance sections only

  bool operator==(const Section&) const = default;
};

// Half-open global token span [start, end).
struct Mention {
  std::size_t start = 0;
  std::size_t end = 0;
  EntityType type = EntityType::Task;

  std::size_t length() const { return end - start; }
  auto operator<=>(const Mention&) const = default;
};

using ClusterId = std::string;

struct Relation4 {
  ClusterId task;
  ClusterId dataset;
  ClusterId method;
  ClusterId metric;

  const ClusterId& cluster(EntityType t) const;
  auto operator<=>(const Relation4&) const = default;
};

// Unordered typed pair; normalized so that type_a < type_b.
struct BinaryRelation {
  EntityType type_a;
  ClusterId a;
  EntityType type_b;
  ClusterId b;

  auto operator<=>(const BinaryRelation&) const = default;
};

struct Document {
  std::string doc_id;
  std::vector<Section> sections;
  std::vector<Mention> mentions;
  std::map<ClusterId, std::vector<std::size_t>> clusters;
  std::set<ClusterId> salient;
  std::vector<Relation4> relations;

  std::size_t token_count() const;
  std::size_t body_token_count() const;
  // offsets[i] is the global index of section i's first token; the final
  // entry is token_count().
  std::vector<std::size_t> section_offsets() const;
  // Index of the section containing global token `pos`.
  std::size_t section_of(std::size_t pos) const;
  const std::string& token(std::size_t pos) const;
  std::string surface(const Mention& m) const;
  bool in_citance(const Mention& m) const;
  std::optional<ClusterId> cluster_of(std::size_t mention_index) const;

  bool operator==(const Document&) const = default;
};

// --- IOBES tags -----------------------------------------------------------

using Tag = std::uint8_t;
using TagSequence = std::vector<Tag>;

enum class TagPos : std::uint8_t { B = 0, I = 1, E = 2, S = 3 };

inline constexpr std::size_t kNumTags = 17;
inline constexpr Tag kOutside = 0;

constexpr Tag make_tag(TagPos p, EntityType t) {
  return static_cast<Tag>(1 + 4 * static_cast<int>(t) + static_cast<int>(p));
}
constexpr TagPos tag_pos(Tag tag) { return static_cast<TagPos>((tag - 1) % 4); }
constexpr EntityType tag_type(Tag tag) { return static_cast<EntityType>((tag - 1) / 4); }
std::string tag_name(Tag tag);
Tag parse_tag(std::string_view name);

// Whether `to` may follow `from` in a legal IOBES sequence.
bool legal_transition(Tag from, Tag to);
bool legal_start(Tag tag);
bool legal_end(Tag tag);
bool is_legal(std::span<const Tag> tags);

// --- validation and I/O ---------------------------------------------------

struct ValidationOptions {
  // Gold relations must range over salient clusters.
  bool require_salient_relations = true;
};

// Throws ValidationError naming the document and the offending field.
void validate(const Document& doc, const ValidationOptions& opts = {});

Document document_from_json(const nlohmann::json& j);
nlohmann::json document_to_json(const Document& doc);

std::vector<Document> read_corpus(std::istream& in, const ValidationOptions& opts = {});
std::vector<Document> load_corpus(const std::string& path, const ValidationOptions& opts = {});
void write_corpus(std::ostream& out, std::span<const Document> docs);
void save_corpus(const std::string& path, std::span<const Document> docs);

// --- tag conversion -------------------------------------------------------

// One tag sequence per section; citance sections are all-O. Throws
// ValidationError listing offenders when mentions overlap.
std::vector<TagSequence> encode_iobes(const Document& doc);

// Decodes one section whose first token sits at global index `offset`,
// repairing ill-formed runs.
std::vector<Mention> decode_section(std::span<const Tag> tags, std::size_t offset);

// Total: accepts ill-formed input. Sections whose kind is citance yield no
// mentions; `kinds` may be empty, meaning all body.
std::vector<Mention> decode_iobes(std::span<const TagSequence> tags,
                                  std::span<const SectionKind> kinds = {});

std::set<BinaryRelation> flatten_relations(std::span<const Relation4> rels);

}  // namespace citeie
