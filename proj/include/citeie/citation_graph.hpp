#pragma once

// Radius-2 citation subgraph around corpus documents, plus degree
// statistics and neighborhood queries.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "citeie/linkage.hpp"

namespace citeie {

using NodeIndex = std::uint32_t;

// Directed (citing, cited) pair over node indices.
struct Edge {
  NodeIndex citing;
  NodeIndex cited;
  auto operator<=>(const Edge&) const = default;
};

// Immutable after construction. Nodes are ordered by record id and edges
// lexicographically, so equal inputs give identical graphs regardless of
// the order they were supplied in.
class CitationGraph {
public:
  CitationGraph() = default;

  // Self-loops and duplicate edges are dropped; node ids must be unique.
  static CitationGraph from_edges(std::vector<std::string> node_ids,
                                  std::vector<Edge> edges);

  std::size_t num_nodes() const { return ids_.size(); }
  std::size_t num_edges() const { return edges_.size(); }
  const std::vector<std::string>& node_ids() const { return ids_; }
  const std::string& id(NodeIndex n) const { return ids_[n]; }
  std::optional<NodeIndex> index(std::string_view id) const;
  bool contains(std::string_view id) const { return index(id).has_value(); }
  std::span<const Edge> edges() const { return edges_; }

  std::span<const NodeIndex> out_neighbors(NodeIndex n) const;  // cited by n
  std::span<const NodeIndex> in_neighbors(NodeIndex n) const;   // citing n
  std::span<const NodeIndex> neighbors(NodeIndex n) const;      // undirected
  std::size_t citations(NodeIndex n) const { return in_neighbors(n).size(); }
  std::size_t references(NodeIndex n) const { return out_neighbors(n).size(); }

  // Checks every structural invariant; throws ValidationError.
  void validate() const;

  bool operator==(const CitationGraph& o) const {
    return ids_ == o.ids_ && edges_ == o.edges_;
  }

private:
  void build_adjacency();

  std::vector<std::string> ids_;
  std::unordered_map<std::string, NodeIndex> index_;
  std::vector<Edge> edges_;
  std::vector<std::size_t> out_off_, in_off_, und_off_;
  std::vector<NodeIndex> out_adj_, in_adj_, und_adj_;
};

struct GraphBuildResult {
  CitationGraph graph;
  std::size_t dropped_edges = 0;  // references to records absent from the store
};

// Keeps every record within undirected distance 2 of a seed and all
// citation edges among them. Throws ValidationError on an unresolvable seed.
GraphBuildResult build_graph(const std::set<std::string>& seed_ids, const MetaStore& store);

// Nodes at undirected distance 1..hops from `node`, sorted by index.
std::vector<NodeIndex> neighborhood(const CitationGraph& g, NodeIndex node, int hops);
// Same by record id, sorted by id; throws ValidationError for unknown ids.
std::vector<std::string> neighborhood(const CitationGraph& g, std::string_view node, int hops);

struct Histogram {
  std::vector<std::size_t> edges;   // bucket i is [edges[i], edges[i+1]), last is open
  std::vector<std::size_t> counts;  // one per edge entry

  static Histogram with_edges(std::vector<std::size_t> edges);
  void add(std::size_t value);
  std::size_t bucket_of(std::size_t value) const;
  std::size_t total() const;
};

struct DocDegree {
  std::string id;
  std::size_t citations = 0;   // inbound edges
  std::size_t references = 0;  // outbound edges
  bool in_graph = true;
};

struct DegreeReport {
  std::vector<DocDegree> docs;  // sorted by id
  Histogram citations;
  Histogram references;
  std::size_t missing = 0;  // docs reported in the zero bucket because absent
};

inline const std::vector<std::size_t> kDefaultDegreeEdges = {0, 10, 50, 250};

DegreeReport degree_stats(const CitationGraph& g, const std::set<std::string>& doc_ids,
                          const std::vector<std::size_t>& bucket_edges = kDefaultDegreeEdges);

// Edge list: `citing_id<TAB>cited_id` per line. Node list: one id per line.
void write_edge_list(std::ostream& out, const CitationGraph& g);
void write_node_list(std::ostream& out, const CitationGraph& g);
// Nodes are the union of the node list (may be null) and edge endpoints.
CitationGraph read_graph(std::istream* nodes, std::istream& edges);
void save_graph(const std::string& node_path, const std::string& edge_path, const CitationGraph& g);
CitationGraph load_graph(const std::string& node_path, const std::string& edge_path);

}  // namespace citeie
