#include "citeie/citation_graph.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "citeie/errors.hpp"
#include "citeie/log.hpp"

namespace citeie {

namespace {

// Compressed adjacency from (key, value) pairs sorted by key.
void build_csr(std::size_t n, const std::vector<std::pair<NodeIndex, NodeIndex>>& pairs,
               std::vector<std::size_t>& off, std::vector<NodeIndex>& adj) {
  off.assign(n + 1, 0);
  for (const auto& [k, v] : pairs) ++off[k + 1];
  std::partial_sum(off.begin(), off.end(), off.begin());
  adj.resize(pairs.size());
  std::vector<std::size_t> cursor(off.begin(), off.end() - 1);
  for (const auto& [k, v] : pairs) adj[cursor[k]++] = v;
  for (std::size_t i = 0; i < n; ++i) std::sort(adj.begin() + off[i], adj.begin() + off[i + 1]);
}

void dedupe(std::vector<Edge>& edges) {
  std::erase_if(edges, [](const Edge& e) { return e.citing == e.cited; });
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
}

}  // namespace

CitationGraph CitationGraph::from_edges(std::vector<std::string> node_ids,
                                        std::vector<Edge> edges) {
  const std::size_t n = node_ids.size();
  std::vector<NodeIndex> order(n);
  std::iota(order.begin(), order.end(), NodeIndex{0});
  std::sort(order.begin(), order.end(),
            [&](NodeIndex a, NodeIndex b) { return node_ids[a] < node_ids[b]; });
  std::vector<NodeIndex> remap(n);
  for (std::size_t i = 0; i < n; ++i) remap[order[i]] = static_cast<NodeIndex>(i);

  CitationGraph g;
  g.ids_.resize(n);
  for (std::size_t i = 0; i < n; ++i) g.ids_[i] = std::move(node_ids[order[i]]);
  for (std::size_t i = 1; i < n; ++i)
    if (g.ids_[i] == g.ids_[i - 1])
      throw ValidationError("graph: duplicate node id '" + g.ids_[i] + "'");
  g.index_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) g.index_.emplace(g.ids_[i], static_cast<NodeIndex>(i));

  for (Edge& e : edges) {
    if (e.citing >= n || e.cited >= n) throw ValidationError("graph: edge endpoint out of range");
    e = {remap[e.citing], remap[e.cited]};
  }
  dedupe(edges);
  g.edges_ = std::move(edges);
  g.build_adjacency();
  return g;
}

void CitationGraph::build_adjacency() {
  const std::size_t n = ids_.size();
  std::vector<std::pair<NodeIndex, NodeIndex>> pairs;
  pairs.reserve(edges_.size());
  for (const Edge& e : edges_) pairs.emplace_back(e.citing, e.cited);
  build_csr(n, pairs, out_off_, out_adj_);
  for (auto& p : pairs) std::swap(p.first, p.second);
  build_csr(n, pairs, in_off_, in_adj_);

  pairs.clear();
  pairs.shrink_to_fit();
  // Undirected view: merge out and in lists per node (a->b and b->a collapse).
  und_off_.assign(n + 1, 0);
  und_adj_.clear();
  und_adj_.reserve(2 * edges_.size());
  for (std::size_t i = 0; i < n; ++i) {
    auto o = out_neighbors(static_cast<NodeIndex>(i));
    auto in = in_neighbors(static_cast<NodeIndex>(i));
    std::size_t before = und_adj_.size();
    std::set_union(o.begin(), o.end(), in.begin(), in.end(), std::back_inserter(und_adj_));
    und_off_[i + 1] = und_off_[i] + (und_adj_.size() - before);
  }
  und_adj_.shrink_to_fit();
}

std::optional<NodeIndex> CitationGraph::index(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::span<const NodeIndex> CitationGraph::out_neighbors(NodeIndex n) const {
  return {out_adj_.data() + out_off_[n], out_off_[n + 1] - out_off_[n]};
}
std::span<const NodeIndex> CitationGraph::in_neighbors(NodeIndex n) const {
  return {in_adj_.data() + in_off_[n], in_off_[n + 1] - in_off_[n]};
}
std::span<const NodeIndex> CitationGraph::neighbors(NodeIndex n) const {
  return {und_adj_.data() + und_off_[n], und_off_[n + 1] - und_off_[n]};
}

void CitationGraph::validate() const {
  const std::size_t n = ids_.size();
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    const Edge& e = edges_[i];
    if (e.citing >= n || e.cited >= n) throw ValidationError("graph: dangling edge");
    if (e.citing == e.cited) throw ValidationError("graph: self-loop at '" + ids_[e.citing] + "'");
    if (i > 0 && !(edges_[i - 1] < e)) throw ValidationError("graph: duplicate or unsorted edge");
  }
  std::size_t und_total = 0;
  for (NodeIndex v = 0; v < n; ++v) {
    for (NodeIndex u : neighbors(v)) {
      bool fwd = std::binary_search(edges_.begin(), edges_.end(), Edge{v, u});
      bool back = std::binary_search(edges_.begin(), edges_.end(), Edge{u, v});
      if (!fwd && !back) throw ValidationError("graph: adjacency disagrees with edge set");
    }
    und_total += neighbors(v).size();
  }
  std::size_t undirected_edges = 0;
  for (const Edge& e : edges_)
    if (e.citing < e.cited || !std::binary_search(edges_.begin(), edges_.end(), Edge{e.cited, e.citing}))
      ++undirected_edges;
  if (und_total != 2 * undirected_edges) throw ValidationError("graph: adjacency size mismatch");
}

// ---------------------------------------------------------------------------

GraphBuildResult build_graph(const std::set<std::string>& seed_ids, const MetaStore& store) {
  const auto& records = store.records();
  const std::size_t n = records.size();
  GraphBuildResult result;

  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    const MetaRecord& r = records[i];
    for (const auto& cited : r.outbound) {
      if (auto j = store.index_of(cited)) edges.push_back({static_cast<NodeIndex>(i), static_cast<NodeIndex>(*j)});
      else ++result.dropped_edges;
    }
    for (const auto& citing : r.inbound) {
      if (auto j = store.index_of(citing)) edges.push_back({static_cast<NodeIndex>(*j), static_cast<NodeIndex>(i)});
      else ++result.dropped_edges;
    }
  }
  dedupe(edges);

  std::vector<std::pair<NodeIndex, NodeIndex>> und;
  und.reserve(2 * edges.size());
  for (const Edge& e : edges) {
    und.emplace_back(e.citing, e.cited);
    und.emplace_back(e.cited, e.citing);
  }
  std::vector<std::size_t> off;
  std::vector<NodeIndex> adj;
  build_csr(n, und, off, adj);
  und.clear();
  und.shrink_to_fit();

  std::vector<std::uint8_t> dist(n, 0xff);
  std::vector<NodeIndex> frontier;
  for (const auto& id : seed_ids) {
    auto idx = store.index_of(id);
    if (!idx) throw ValidationError("build_graph: seed '" + id + "' not in metadata store");
    if (dist[*idx] != 0) frontier.push_back(static_cast<NodeIndex>(*idx));
    dist[*idx] = 0;
  }
  for (std::uint8_t d = 1; d <= 2; ++d) {
    std::vector<NodeIndex> next;
    for (NodeIndex v : frontier)
      for (std::size_t k = off[v]; k < off[v + 1]; ++k)
        if (dist[adj[k]] == 0xff) {
          dist[adj[k]] = d;
          next.push_back(adj[k]);
        }
    frontier = std::move(next);
  }
  adj.clear();
  adj.shrink_to_fit();

  std::vector<NodeIndex> local(n, NodeIndex(-1));
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i)
    if (dist[i] != 0xff) {
      local[i] = static_cast<NodeIndex>(ids.size());
      ids.push_back(records[i].record_id);
    }
  std::vector<Edge> kept;
  for (const Edge& e : edges)
    if (local[e.citing] != NodeIndex(-1) && local[e.cited] != NodeIndex(-1))
      kept.push_back({local[e.citing], local[e.cited]});
  edges.clear();
  edges.shrink_to_fit();

  if (result.dropped_edges > 0)
    log::warn("build_graph: dropped " + std::to_string(result.dropped_edges) +
              " references to records missing from the store");
  result.graph = CitationGraph::from_edges(std::move(ids), std::move(kept));
  return result;
}

std::vector<NodeIndex> neighborhood(const CitationGraph& g, NodeIndex node, int hops) {
  if (node >= g.num_nodes()) throw ValidationError("neighborhood: node index out of range");
  if (hops != 1 && hops != 2) throw UsageError("neighborhood: hops must be 1 or 2");
  std::vector<NodeIndex> out(g.neighbors(node).begin(), g.neighbors(node).end());
  if (hops == 2) {
    const std::size_t first = out.size();
    for (std::size_t i = 0; i < first; ++i) {
      auto nb = g.neighbors(out[i]);
      out.insert(out.end(), nb.begin(), nb.end());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    std::erase(out, node);
  }
  return out;
}

std::vector<std::string> neighborhood(const CitationGraph& g, std::string_view node, int hops) {
  auto idx = g.index(node);
  if (!idx) throw ValidationError("neighborhood: unknown node '" + std::string(node) + "'");
  std::vector<std::string> out;
  for (NodeIndex v : neighborhood(g, *idx, hops)) out.push_back(g.id(v));
  return out;  // node indices follow id order, so this is sorted
}

// ---------------------------------------------------------------------------

Histogram Histogram::with_edges(std::vector<std::size_t> edges) {
  if (edges.empty() || !std::is_sorted(edges.begin(), edges.end()))
    throw UsageError("histogram: bucket edges must be non-empty and ascending");
  Histogram h;
  h.counts.assign(edges.size(), 0);
  h.edges = std::move(edges);
  return h;
}

std::size_t Histogram::bucket_of(std::size_t value) const {
  auto it = std::upper_bound(edges.begin(), edges.end(), value);
  return it == edges.begin() ? 0 : static_cast<std::size_t>(it - edges.begin() - 1);
}

void Histogram::add(std::size_t value) { ++counts[bucket_of(value)]; }

std::size_t Histogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

DegreeReport degree_stats(const CitationGraph& g, const std::set<std::string>& doc_ids,
                          const std::vector<std::size_t>& bucket_edges) {
  DegreeReport rep;
  rep.citations = Histogram::with_edges(bucket_edges);
  rep.references = Histogram::with_edges(bucket_edges);
  for (const auto& id : doc_ids) {
    DocDegree d{id, 0, 0, true};
    if (auto idx = g.index(id)) {
      d.citations = g.citations(*idx);
      d.references = g.references(*idx);
    } else {
      d.in_graph = false;
      ++rep.missing;
    }
    rep.citations.add(d.citations);
    rep.references.add(d.references);
    rep.docs.push_back(std::move(d));
  }
  return rep;
}

// ---------------------------------------------------------------------------

void write_edge_list(std::ostream& out, const CitationGraph& g) {
  for (const Edge& e : g.edges()) out << g.id(e.citing) << '\t' << g.id(e.cited) << '\n';
}

void write_node_list(std::ostream& out, const CitationGraph& g) {
  for (const auto& id : g.node_ids()) out << id << '\n';
}

CitationGraph read_graph(std::istream* nodes, std::istream& edges_in) {
  std::vector<std::string> ids;
  std::unordered_map<std::string, NodeIndex> index;
  auto intern = [&](std::string&& id) {
    auto [it, fresh] = index.emplace(id, static_cast<NodeIndex>(ids.size()));
    if (fresh) ids.push_back(std::move(id));
    return it->second;
  };
  std::string line;
  if (nodes) {
    while (std::getline(*nodes, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) intern(std::move(line));
    }
  }
  std::vector<Edge> edges;
  std::size_t lineno = 0;
  while (std::getline(edges_in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size())
      throw ParseError("expected citing_id<TAB>cited_id", lineno);
    NodeIndex a = intern(line.substr(0, tab));
    NodeIndex b = intern(line.substr(tab + 1));
    edges.push_back({a, b});
  }
  index.clear();
  return CitationGraph::from_edges(std::move(ids), std::move(edges));
}

void save_graph(const std::string& node_path, const std::string& edge_path, const CitationGraph& g) {
  std::ofstream nodes(node_path), edges(edge_path);
  if (!nodes || !edges) throw UsageError("cannot write graph files");
  write_node_list(nodes, g);
  write_edge_list(edges, g);
}

CitationGraph load_graph(const std::string& node_path, const std::string& edge_path) {
  std::ifstream edges(edge_path);
  if (!edges) throw UsageError("cannot open edge list '" + edge_path + "'");
  if (node_path.empty()) return read_graph(nullptr, edges);
  std::ifstream nodes(node_path);
  if (!nodes) throw UsageError("cannot open node list '" + node_path + "'");
  return read_graph(&nodes, edges);
}

}  // namespace citeie
