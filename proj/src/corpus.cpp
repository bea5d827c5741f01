#include "citeie/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "citeie/errors.hpp"

namespace citeie {

using nlohmann::json;

std::string_view to_string(EntityType t) {
  switch (t) {
    case EntityType::Task: return "Task";
    case EntityType::Dataset: return "Dataset";
    case EntityType::Method: return "Method";
    case EntityType::Metric: return "Metric";
  }
  return "?";
}

EntityType parse_entity_type(std::string_view s) {
  for (EntityType t : kEntityTypes)
    if (to_string(t) == s) return t;
  throw ValidationError("unknown entity type '" + std::string(s) + "'");
}

const ClusterId& Relation4::cluster(EntityType t) const {
  switch (t) {
    case EntityType::Task: return task;
    case EntityType::Dataset: return dataset;
    case EntityType::Method: return method;
    case EntityType::Metric: return metric;
  }
  return task;
}

std::size_t Document::token_count() const {
  std::size_t n = 0;
  for (const auto& s : sections) n += s.tokens.size();
  return n;
}

std::size_t Document::body_token_count() const {
  std::size_t n = 0;
  for (const auto& s : sections)
    if (s.kind == SectionKind::body) n += s.tokens.size();
  return n;
}

std::vector<std::size_t> Document::section_offsets() const {
  std::vector<std::size_t> off;
  off.reserve(sections.size() + 1);
  std::size_t pos = 0;
  for (const auto& s : sections) {
    off.push_back(pos);
    pos += s.tokens.size();
  }
  off.push_back(pos);
  return off;
}

std::size_t Document::section_of(std::size_t pos) const {
  std::size_t begin = 0;
  for (std::size_t i = 0; i < sections.size(); ++i) {
    std::size_t end = begin + sections[i].tokens.size();
    if (pos < end) return i;
    begin = end;
  }
  throw ValidationError(doc_id + ": token " + std::to_string(pos) + " out of range");
}

const std::string& Document::token(std::size_t pos) const {
  std::size_t begin = 0;
  for (const auto& s : sections) {
    if (pos < begin + s.tokens.size()) return s.tokens[pos - begin];
    begin += s.tokens.size();
  }
  throw ValidationError(doc_id + ": token " + std::to_string(pos) + " out of range");
}

std::string Document::surface(const Mention& m) const {
  std::string out;
  for (std::size_t i = m.start; i < m.end; ++i) {
    if (i > m.start) out += ' ';
    out += token(i);
  }
  return out;
}

bool Document::in_citance(const Mention& m) const {
  return sections[section_of(m.start)].kind == SectionKind::citance;
}

std::optional<ClusterId> Document::cluster_of(std::size_t mention_index) const {
  for (const auto& [id, members] : clusters)
    if (std::find(members.begin(), members.end(), mention_index) != members.end()) return id;
  return std::nullopt;
}

// ---------------------------------------------------------------------------

std::string tag_name(Tag tag) {
  if (tag == kOutside) return "O";
  static constexpr char pos[] = {'B', 'I', 'E', 'S'};
  return std::string(1, pos[static_cast<int>(tag_pos(tag))]) + "-" +
         std::string(to_string(tag_type(tag)));
}

Tag parse_tag(std::string_view name) {
  for (Tag t = 0; t < kNumTags; ++t)
    if (tag_name(t) == name) return t;
  throw ValidationError("unknown tag '" + std::string(name) + "'");
}

bool legal_transition(Tag from, Tag to) {
  bool from_open = from != kOutside &&
                   (tag_pos(from) == TagPos::B || tag_pos(from) == TagPos::I);
  if (from_open) {
    return to != kOutside && tag_type(to) == tag_type(from) &&
           (tag_pos(to) == TagPos::I || tag_pos(to) == TagPos::E);
  }
  return legal_start(to);
}

bool legal_start(Tag tag) {
  return tag == kOutside || tag_pos(tag) == TagPos::B || tag_pos(tag) == TagPos::S;
}

bool legal_end(Tag tag) {
  return tag == kOutside || tag_pos(tag) == TagPos::E || tag_pos(tag) == TagPos::S;
}

bool is_legal(std::span<const Tag> tags) {
  if (tags.empty()) return true;
  if (!legal_start(tags.front()) || !legal_end(tags.back())) return false;
  for (std::size_t i = 1; i < tags.size(); ++i)
    if (!legal_transition(tags[i - 1], tags[i])) return false;
  return true;
}

// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void invalid(const Document& d, std::string_view field, const std::string& what) {
  throw ValidationError("document '" + d.doc_id + "', field " + std::string(field) + ": " + what);
}

std::string mention_str(const Mention& m) {
  return "[" + std::to_string(m.start) + "," + std::to_string(m.end) + ")" +
         std::string(to_string(m.type));
}

// Returns pairs of mention indices whose spans overlap.
std::vector<std::pair<std::size_t, std::size_t>> overlapping(const std::vector<Mention>& ms) {
  std::vector<std::size_t> order(ms.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(ms[a].start, ms[a].end) < std::tie(ms[b].start, ms[b].end);
  });
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      if (ms[order[j]].start >= ms[order[i]].end) break;
      out.emplace_back(order[i], order[j]);
    }
  }
  return out;
}

}  // namespace

void validate(const Document& d, const ValidationOptions& opts) {
  if (d.doc_id.empty()) throw ValidationError("document with empty doc_id");

  bool seen_citance = false;
  for (std::size_t i = 0; i < d.sections.size(); ++i) {
    const Section& s = d.sections[i];
    if (s.kind == SectionKind::citance) {
      seen_citance = true;
      if (!s.source_doc_id)
        invalid(d, "sections", "citance section " + std::to_string(i) + " lacks source_doc_id");
    } else if (seen_citance) {
      invalid(d, "sections", "body section " + std::to_string(i) + " follows a citance section");
    }
  }

  const auto offsets = d.section_offsets();
  const std::size_t total = offsets.back();
  for (std::size_t i = 0; i < d.mentions.size(); ++i) {
    const Mention& m = d.mentions[i];
    if (!(m.start < m.end && m.end <= total))
      invalid(d, "mentions", "mention " + std::to_string(i) + " " + mention_str(m) +
                                 " outside [0," + std::to_string(total) + ")");
    std::size_t sec = d.section_of(m.start);
    if (m.end > offsets[sec + 1])
      invalid(d, "mentions", "mention " + std::to_string(i) + " crosses a section boundary");
    if (d.sections[sec].kind == SectionKind::citance)
      invalid(d, "mentions", "mention " + std::to_string(i) + " lies in a citance section");
  }
  if (auto ov = overlapping(d.mentions); !ov.empty())
    invalid(d, "mentions", "overlapping mentions " + std::to_string(ov.front().first) + " and " +
                               std::to_string(ov.front().second));

  std::vector<int> owner(d.mentions.size(), 0);
  for (const auto& [id, members] : d.clusters) {
    if (members.empty()) invalid(d, "clusters", "cluster '" + id + "' is empty");
    for (std::size_t idx : members) {
      if (idx >= d.mentions.size())
        invalid(d, "clusters", "cluster '" + id + "' references mention index " +
                                   std::to_string(idx) + " of " + std::to_string(d.mentions.size()));
      if (++owner[idx] > 1)
        invalid(d, "clusters", "mention " + std::to_string(idx) + " belongs to several clusters");
    }
  }

  for (const auto& id : d.salient)
    if (!d.clusters.count(id)) invalid(d, "salient_clusters", "unknown cluster '" + id + "'");

  for (std::size_t r = 0; r < d.relations.size(); ++r) {
    for (EntityType t : kEntityTypes) {
      const ClusterId& id = d.relations[r].cluster(t);
      auto it = d.clusters.find(id);
      if (it == d.clusters.end())
        invalid(d, "relations", "relation " + std::to_string(r) + " references unknown cluster '" +
                                    id + "'");
      for (std::size_t idx : it->second)
        if (d.mentions[idx].type != t)
          invalid(d, "relations", "relation " + std::to_string(r) + " slot " +
                                      std::string(to_string(t)) + " holds cluster '" + id +
                                      "' of another type");
      if (opts.require_salient_relations && !d.salient.count(id))
        invalid(d, "relations", "relation " + std::to_string(r) + " uses non-salient cluster '" +
                                    id + "'");
    }
  }
}

Document document_from_json(const json& j) {
  Document d;
  d.doc_id = j.at("doc_id").get<std::string>();
  for (const auto& js : j.at("sections")) {
    Section s;
    s.tokens = js.at("tokens").get<std::vector<std::string>>();
    std::string kind = js.value("kind", std::string("body"));
    if (kind == "body") s.kind = SectionKind::body;
    else if (kind == "citance") s.kind = SectionKind::citance;
    else throw ValidationError("document '" + d.doc_id + "': unknown section kind '" + kind + "'");
    if (js.contains("source_doc_id") && !js["source_doc_id"].is_null())
      s.source_doc_id = js["source_doc_id"].get<std::string>();
    d.sections.push_back(std::move(s));
  }
  if (j.contains("mentions")) {
    for (const auto& jm : j["mentions"]) {
      long long start = jm.at("start").get<long long>();
      long long end = jm.at("end").get<long long>();
      if (start < 0 || end < 0)
        throw ValidationError("document '" + d.doc_id + "', field mentions: negative offset");
      d.mentions.push_back({static_cast<std::size_t>(start), static_cast<std::size_t>(end),
                            parse_entity_type(jm.at("type").get<std::string>())});
    }
  }
  if (j.contains("clusters"))
    for (const auto& [id, members] : j["clusters"].items())
      d.clusters[id] = members.get<std::vector<std::size_t>>();
  if (j.contains("salient_clusters"))
    for (const auto& id : j["salient_clusters"]) d.salient.insert(id.get<std::string>());
  if (j.contains("relations")) {
    for (const auto& jr : j["relations"]) {
      d.relations.push_back({jr.at("Task").get<std::string>(), jr.at("Dataset").get<std::string>(),
                             jr.at("Method").get<std::string>(),
                             jr.at("Metric").get<std::string>()});
    }
  }
  return d;
}

json document_to_json(const Document& d) {
  json j;
  j["doc_id"] = d.doc_id;
  j["sections"] = json::array();
  for (const auto& s : d.sections) {
    json js;
    js["tokens"] = s.tokens;
    js["kind"] = s.kind == SectionKind::body ? "body" : "citance";
    if (s.source_doc_id) js["source_doc_id"] = *s.source_doc_id;
    j["sections"].push_back(std::move(js));
  }
  j["mentions"] = json::array();
  for (const auto& m : d.mentions)
    j["mentions"].push_back({{"start", m.start}, {"end", m.end}, {"type", to_string(m.type)}});
  j["clusters"] = json::object();
  for (const auto& [id, members] : d.clusters) j["clusters"][id] = members;
  j["salient_clusters"] = json::array();
  for (const auto& id : d.salient) j["salient_clusters"].push_back(id);
  j["relations"] = json::array();
  for (const auto& r : d.relations)
    j["relations"].push_back(
        {{"Task", r.task}, {"Dataset", r.dataset}, {"Method", r.method}, {"Metric", r.metric}});
  return j;
}

std::vector<Document> read_corpus(std::istream& in, const ValidationOptions& opts) {
  std::vector<Document> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Document d;
    try {
      d = document_from_json(json::parse(line));
    } catch (const json::exception& e) {
      throw ParseError(e.what(), lineno);
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), lineno);
    }
    validate(d, opts);
    docs.push_back(std::move(d));
  }
  return docs;
}

std::vector<Document> load_corpus(const std::string& path, const ValidationOptions& opts) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open corpus file '" + path + "'");
  return read_corpus(in, opts);
}

void write_corpus(std::ostream& out, std::span<const Document> docs) {
  for (const auto& d : docs) out << document_to_json(d).dump() << '\n';
}

void save_corpus(const std::string& path, std::span<const Document> docs) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write corpus file '" + path + "'");
  write_corpus(out, docs);
}

// ---------------------------------------------------------------------------

std::vector<TagSequence> encode_iobes(const Document& d) {
  if (auto ov = overlapping(d.mentions); !ov.empty()) {
    std::ostringstream msg;
    msg << "document '" << d.doc_id << "': overlapping mentions";
    for (auto [a, b] : ov) msg << ' ' << mention_str(d.mentions[a]) << '/' << mention_str(d.mentions[b]);
    throw ValidationError(msg.str());
  }
  const auto offsets = d.section_offsets();
  std::vector<TagSequence> out(d.sections.size());
  for (std::size_t s = 0; s < d.sections.size(); ++s)
    out[s].assign(d.sections[s].tokens.size(), kOutside);
  for (const Mention& m : d.mentions) {
    std::size_t s = d.section_of(m.start);
    if (d.sections[s].kind == SectionKind::citance) continue;
    TagSequence& seq = out[s];
    std::size_t a = m.start - offsets[s];
    std::size_t b = m.end - offsets[s];
    if (b - a == 1) {
      seq[a] = make_tag(TagPos::S, m.type);
      continue;
    }
    seq[a] = make_tag(TagPos::B, m.type);
    for (std::size_t i = a + 1; i + 1 < b; ++i) seq[i] = make_tag(TagPos::I, m.type);
    seq[b - 1] = make_tag(TagPos::E, m.type);
  }
  return out;
}

std::vector<Mention> decode_section(std::span<const Tag> tags, std::size_t offset) {
  std::vector<Mention> out;
  bool open = false;
  std::size_t open_start = 0;
  EntityType open_type = EntityType::Task;
  auto close = [&](std::size_t end) {
    if (open) out.push_back({offset + open_start, offset + end, open_type});
    open = false;
  };
  for (std::size_t i = 0; i < tags.size(); ++i) {
    Tag tag = tags[i];
    if (tag == kOutside || tag >= kNumTags) {
      close(i);
      continue;
    }
    EntityType t = tag_type(tag);
    bool continues = open && open_type == t;
    switch (tag_pos(tag)) {
      case TagPos::B:
        close(i);
        open = true;
        open_start = i;
        open_type = t;
        break;
      case TagPos::I:
        if (!continues) {
          close(i);
          open = true;
          open_start = i;
          open_type = t;
        }
        break;
      case TagPos::E:
        if (!continues) {
          close(i);
          open = true;
          open_start = i;
          open_type = t;
        }
        close(i + 1);
        break;
      case TagPos::S:
        close(i);
        out.push_back({offset + i, offset + i + 1, t});
        break;
    }
  }
  close(tags.size());
  return out;
}

std::vector<Mention> decode_iobes(std::span<const TagSequence> tags,
                                  std::span<const SectionKind> kinds) {
  std::vector<Mention> out;
  std::size_t offset = 0;
  for (std::size_t s = 0; s < tags.size(); ++s) {
    bool citance = s < kinds.size() && kinds[s] == SectionKind::citance;
    if (!citance) {
      auto ms = decode_section(tags[s], offset);
      out.insert(out.end(), ms.begin(), ms.end());
    }
    offset += tags[s].size();
  }
  return out;
}

std::set<BinaryRelation> flatten_relations(std::span<const Relation4> rels) {
  std::set<BinaryRelation> out;
  for (const auto& r : rels)
    for (std::size_t i = 0; i < kEntityTypes.size(); ++i)
      for (std::size_t j = i + 1; j < kEntityTypes.size(); ++j)
        out.insert({kEntityTypes[i], r.cluster(kEntityTypes[i]), kEntityTypes[j],
                    r.cluster(kEntityTypes[j])});
  return out;
}

}  // namespace citeie
