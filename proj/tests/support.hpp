#pragma once

// Fixture builders and brute-force reference implementations shared by the
// unit tests and the acceptance binary. Nothing here calls into the code it
// is used to check, apart from plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "citeie/citation_graph.hpp"
#include "citeie/corpus.hpp"
#include "citeie/linkage.hpp"
#include "citeie/nn.hpp"
#include "citeie/rng.hpp"

namespace fixture {

using namespace citeie;

inline std::vector<std::string> words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

inline Section body(const std::string& text) { return {words(text), SectionKind::body, std::nullopt}; }
inline Section citance(const std::string& text, const std::string& src) {
  return {words(text), SectionKind::citance, src};
}

// Salient clusters and relations are left empty unless given.
inline Document make_doc(std::string id, std::vector<Section> sections, std::vector<Mention> mentions = {},
                         std::map<ClusterId, std::vector<std::size_t>> clusters = {},
                         std::set<ClusterId> salient = {}, std::vector<Relation4> relations = {}) {
  Document d;
  d.doc_id = std::move(id);
  d.sections = std::move(sections);
  d.mentions = std::move(mentions);
  d.clusters = std::move(clusters);
  d.salient = std::move(salient);
  d.relations = std::move(relations);
  return d;
}

// --- tags -------------------------------------------------------------------------

// Every sequence of length n over the 17 tags, legal or not.
inline void for_each_tag_string(std::size_t n, const std::function<void(const std::vector<Tag>&)>& fn) {
  std::vector<Tag> t(n, 0);
  while (true) {
    fn(t);
    std::size_t i = 0;
    while (i < n && ++t[i] == kNumTags) t[i++] = 0;
    if (i == n) return;
  }
}

// Segment-extension reading of the repair rule: a segment begins at any
// non-O tag not absorbed by an earlier segment; S is a segment by itself;
// otherwise the segment absorbs following I/E tags of the same type and
// stops after an E.
inline std::vector<Mention> repair_oracle(const std::vector<Tag>& tags, std::size_t offset) {
  std::vector<Mention> out;
  std::size_t i = 0;
  const std::size_t n = tags.size();
  auto pos = [&](std::size_t k) { return (tags[k] - 1) % 4; };  // B=0 I=1 E=2 S=3
  auto type = [&](std::size_t k) { return static_cast<EntityType>((tags[k] - 1) / 4); };
  while (i < n) {
    if (tags[i] == 0) {
      ++i;
      continue;
    }
    if (pos(i) == 3) {
      out.push_back({offset + i, offset + i + 1, type(i)});
      ++i;
      continue;
    }
    std::size_t j = i;
    while (pos(j) != 2 && j + 1 < n && tags[j + 1] != 0 && type(j + 1) == type(i) &&
           (pos(j + 1) == 1 || pos(j + 1) == 2))
      ++j;
    out.push_back({offset + i, offset + j + 1, type(i)});
    i = j + 1;
  }
  return out;
}

// Legality from the tag grammar, written out independently.
inline bool oracle_legal_pair(Tag a, Tag b) {
  auto pa = a == 0 ? -1 : (a - 1) % 4, pb = b == 0 ? -1 : (b - 1) % 4;
  int ta = a == 0 ? -1 : (a - 1) / 4, tb = b == 0 ? -1 : (b - 1) / 4;
  bool a_open = pa == 0 || pa == 1;  // B or I leaves a span open
  bool b_cont = pb == 1 || pb == 2;  // I or E continues one
  if (a_open) return b_cont && ta == tb;
  return !b_cont;
}
inline bool oracle_legal_first(Tag t) { return t == 0 || (t - 1) % 4 == 0 || (t - 1) % 4 == 3; }
inline bool oracle_legal_last(Tag t) { return t == 0 || (t - 1) % 4 == 2 || (t - 1) % 4 == 3; }

// --- brute-force linear-chain CRF -----------------------------------------------------

struct BruteCrf {
  double log_z = -std::numeric_limits<double>::infinity();
  double best_score = -std::numeric_limits<double>::infinity();
  std::vector<Tag> best;
  std::size_t paths = 0;
};

// Exhaustive walk over every legal path. `em` is 17 x n, trans 17 x 17
// (from, to), start/end length 17.
inline BruteCrf brute_crf(const Eigen::MatrixXd& em, const Eigen::MatrixXd& trans, const Eigen::VectorXd& start,
                          const Eigen::VectorXd& end) {
  const std::size_t n = static_cast<std::size_t>(em.cols());
  BruteCrf r;
  std::vector<Tag> path(n);
  std::vector<double> scores;  // collected then log-sum-exp'd in one pass
  std::function<void(std::size_t, double)> rec = [&](std::size_t i, double s) {
    if (i == n) {
      if (!oracle_legal_last(path[n - 1])) return;
      double total = s + end(path[n - 1]);
      scores.push_back(total);
      ++r.paths;
      if (total > r.best_score) {
        r.best_score = total;
        r.best = path;
      }
      return;
    }
    for (Tag t = 0; t < kNumTags; ++t) {
      if (i == 0 ? !oracle_legal_first(t) : !oracle_legal_pair(path[i - 1], t)) continue;
      path[i] = t;
      double step = i == 0 ? start(t) : trans(path[i - 1], t);
      rec(i + 1, s + step + em(t, static_cast<Eigen::Index>(i)));
    }
  };
  rec(0, 0.0);
  double m = *std::max_element(scores.begin(), scores.end());
  double acc = 0;
  for (double s : scores) acc += std::exp(s - m);
  r.log_z = m + std::log(acc);
  return r;
}

inline double brute_path_score(const Eigen::MatrixXd& em, const Eigen::MatrixXd& trans, const Eigen::VectorXd& start,
                               const Eigen::VectorXd& end, const std::vector<Tag>& y) {
  double s = start(y[0]) + end(y.back());
  for (std::size_t i = 0; i < y.size(); ++i) s += em(y[i], static_cast<Eigen::Index>(i));
  for (std::size_t i = 1; i < y.size(); ++i) s += trans(y[i - 1], y[i]);
  return s;
}

// --- finite differences -----------------------------------------------------------

struct GradStats {
  double worst = 0;
  std::size_t points = 0;
};

// |a - n| / max(|a|, |n|, 1e-6)
inline double rel_err(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

// Compares accumulated gradients against central differences at `points`
// random coordinates of `params`. `backprop` runs one loss with gradient
// accumulation, `loss` one without. Coordinates are redrawn a few times to
// avoid entries whose analytic gradient is exactly zero (unused vocab rows,
// masked transitions).
inline GradStats grad_check(const nn::ParamList& params, const std::function<void()>& backprop,
                            const std::function<double()>& loss, std::size_t points, citeie::Rng& rng,
                            double h = 1e-5) {
  for (auto* p : params) p->zero_grad();
  backprop();
  std::vector<nn::Mat> grads;
  std::size_t total = 0;
  for (auto* p : params) {
    grads.push_back(p->grad);
    total += static_cast<std::size_t>(p->value.size());
  }
  GradStats st;
  for (std::size_t k = 0; k < points; ++k) {
    std::size_t pi = 0;
    Eigen::Index idx = 0;
    for (int attempt = 0; attempt < 20; ++attempt) {
      std::size_t flat = citeie::uniform_index(rng, total);
      pi = 0;
      while (flat >= static_cast<std::size_t>(params[pi]->value.size())) flat -= static_cast<std::size_t>(params[pi++]->value.size());
      idx = static_cast<Eigen::Index>(flat);
      if (grads[pi].data()[idx] != 0.0) break;
    }
    double& x = params[pi]->value.data()[idx];
    const double keep = x;
    x = keep + h;
    double lp = loss();
    x = keep - h;
    double lm = loss();
    x = keep;
    st.worst = std::max(st.worst, rel_err(grads[pi].data()[idx], (lp - lm) / (2 * h)));
    ++st.points;
  }
  for (auto* p : params) p->zero_grad();
  return st;
}

// --- graphs ---------------------------------------------------------------------------

// Undirected BFS over raw store records, depth <= 2 from any seed; edges
// to absent records are ignored.
inline std::set<std::string> bfs_oracle(const std::vector<MetaRecord>& records, const std::set<std::string>& seeds,
                                        int depth = 2) {
  std::map<std::string, std::set<std::string>> adj;
  std::set<std::string> present;
  for (const auto& r : records) present.insert(r.record_id);
  for (const auto& r : records) {
    for (const auto& o : r.outbound)
      if (present.count(o) && o != r.record_id) {
        adj[r.record_id].insert(o);
        adj[o].insert(r.record_id);
      }
    for (const auto& i : r.inbound)
      if (present.count(i) && i != r.record_id) {
        adj[r.record_id].insert(i);
        adj[i].insert(r.record_id);
      }
  }
  std::map<std::string, int> dist;
  std::deque<std::string> q;
  for (const auto& s : seeds) {
    dist[s] = 0;
    q.push_back(s);
  }
  while (!q.empty()) {
    auto u = q.front();
    q.pop_front();
    if (dist[u] == depth) continue;
    for (const auto& v : adj[u])
      if (!dist.count(v)) {
        dist[v] = dist[u] + 1;
        q.push_back(v);
      }
  }
  std::set<std::string> out;
  for (const auto& [k, _] : dist) out.insert(k);
  return out;
}

// Graph-level BFS, hops from one node, excluding the node.
inline std::set<std::string> graph_bfs(const CitationGraph& g, const std::string& node, int hops) {
  std::set<std::string> seen{node}, frontier{node};
  for (int h = 0; h < hops; ++h) {
    std::set<std::string> next;
    for (const auto& u : frontier) {
      auto idx = *g.index(u);
      for (auto e : g.edges()) {
        if (e.citing == idx && !seen.count(g.id(e.cited))) next.insert(g.id(e.cited));
        if (e.cited == idx && !seen.count(g.id(e.citing))) next.insert(g.id(e.citing));
      }
    }
    seen.insert(next.begin(), next.end());
    frontier = next;
  }
  seen.erase(node);
  return seen;
}

// Random store of n records; each record cites `out_deg` random earlier
// or later records, mirrored into inbound lists of the cited record.
inline std::vector<MetaRecord> random_store(std::size_t n, std::size_t out_deg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<MetaRecord> recs(n);
  for (std::size_t i = 0; i < n; ++i) recs[i].record_id = "r" + std::to_string(i);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < out_deg; ++k) {
      std::size_t j = pick(rng);
      recs[i].outbound.push_back(recs[j].record_id);
      if (k % 2 == 0) recs[j].inbound.push_back(recs[i].record_id);  // half mirrored, half only one-sided
    }
  return recs;
}

// Two 10-cliques a0..a9 and b0..b9 joined by the bridge a0 -> b0.
inline CitationGraph barbell_graph() {
  std::vector<std::string> ids;
  for (char c : {'a', 'b'})
    for (int i = 0; i < 10; ++i) ids.push_back(std::string(1, c) + std::to_string(i));
  std::vector<Edge> edges;
  for (NodeIndex base : {0u, 10u})
    for (NodeIndex i = 0; i < 10; ++i)
      for (NodeIndex j = i + 1; j < 10; ++j) edges.push_back({base + i, base + j});
  edges.push_back({0, 10});
  return CitationGraph::from_edges(ids, edges);
}

// --- citation TF-IDF reference ------------------------------------------------------

inline double idf_oracle(std::size_t n, std::size_t df) {
  return std::log((1.0 + static_cast<double>(n)) / (1.0 + static_cast<double>(df))) + 1.0;
}

// --- relation metrics reference -----------------------------------------------------

struct Counts {
  double p, r, f;
};

// Per-document P/R/F1 by explicit counting over vectors (no sets).
template <class T>
Counts doc_counts(const std::vector<T>& pred, const std::vector<T>& gold) {
  if (pred.empty() && gold.empty()) return {1, 1, 1};
  double tp = 0;
  for (const auto& x : pred)
    for (const auto& y : gold)
      if (x == y) {
        tp += 1;
        break;
      }
  double p = pred.empty() ? 0 : tp / static_cast<double>(pred.size());
  double r = gold.empty() ? 0 : tp / static_cast<double>(gold.size());
  double f = p + r > 0 ? 2 * p * r / (p + r) : 0;
  return {p, r, f};
}

// The six unordered typed pairs of a 4-tuple, as sorted strings.
inline std::vector<std::string> pair_strings(const Relation4& r) {
  const std::string ids[4] = {"Task=" + r.task, "Dataset=" + r.dataset, "Method=" + r.method, "Metric=" + r.metric};
  std::vector<std::string> out;
  for (int a = 0; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b) out.push_back(ids[a] + "|" + ids[b]);
  return out;
}

inline std::vector<std::string> flatten_oracle(const std::vector<Relation4>& rels) {
  std::vector<std::string> out;
  for (const auto& r : rels)
    for (const auto& p : pair_strings(r))
      if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
  return out;
}

// --- planted saliency corpus ----------------------------------------------------------

struct PlantedCorpus {
  std::vector<Document> docs;
  std::vector<int> community;  // 0 or 1 per document
  std::vector<MetaRecord> store;
};

// Documents alternate between two citation communities. Every entity of a
// community-0 document is salient and none of a community-1 document is.
// Text is drawn from one shared distribution, so tokens carry no signal
// about the community. Each document's record id equals its doc_id.
inline PlantedCorpus planted_saliency_corpus(std::size_t n_docs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto uni = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  PlantedCorpus pc;
  for (std::size_t d = 0; d < n_docs; ++d) {
    int comm = static_cast<int>(d % 2);
    pc.community.push_back(comm);
    Document doc;
    doc.doc_id = "p" + std::to_string(d);
    std::size_t n_sec = 2, sec_len = 18;
    for (std::size_t s = 0; s < n_sec; ++s) {
      Section sec;
      for (std::size_t k = 0; k < sec_len; ++k) sec.tokens.push_back("w" + std::to_string(uni(30)));
      doc.sections.push_back(sec);
    }
    std::size_t n_ent = 3 + uni(3);
    std::size_t slot = 0;  // mentions go in disjoint 3-token slots
    for (std::size_t e = 0; e < n_ent && slot < 2 * (sec_len / 3); ++e) {
      EntityType t = kEntityTypes[uni(4)];
      std::string surface = "e" + std::to_string(uni(24));
      ClusterId id = "c" + std::to_string(e);
      std::size_t n_m = 1 + uni(2);
      for (std::size_t k = 0; k < n_m && slot < 2 * (sec_len / 3); ++k, ++slot) {
        std::size_t sec = slot % 2, within = (slot / 2) * 3;
        std::size_t start = sec * sec_len + within;
        doc.sections[sec].tokens[within] = surface;
        doc.clusters[id].push_back(doc.mentions.size());
        doc.mentions.push_back({start, start + 1, t});
      }
      if (comm == 0) doc.salient.insert(id);
    }
    // mentions must be sorted by start for a canonical document
    std::vector<std::size_t> order(doc.mentions.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return doc.mentions[a] < doc.mentions[b]; });
    std::vector<std::size_t> remap(order.size());
    std::vector<Mention> sorted;
    for (std::size_t i = 0; i < order.size(); ++i) {
      remap[order[i]] = i;
      sorted.push_back(doc.mentions[order[i]]);
    }
    doc.mentions = sorted;
    for (auto& [id, members] : doc.clusters) {
      for (auto& m : members) m = remap[m];
      std::sort(members.begin(), members.end());
    }
    pc.docs.push_back(std::move(doc));
  }
  // citation graph: dense within a community, a handful of bridges
  pc.store.resize(n_docs);
  for (std::size_t d = 0; d < n_docs; ++d) pc.store[d].record_id = pc.docs[d].doc_id;
  for (std::size_t d = 0; d < n_docs; ++d) {
    for (int k = 0; k < 5; ++k) {
      std::size_t j = 2 * uni(n_docs / 2) + static_cast<std::size_t>(pc.community[d]);
      if (j != d && j < n_docs) pc.store[d].outbound.push_back(pc.store[j].record_id);
    }
  }
  for (std::size_t b = 0; b + 1 < n_docs; b += n_docs / 3)
    pc.store[b].outbound.push_back(pc.store[b + 1].record_id);
  return pc;
}

// --- linkage fixture -------------------------------------------------------------------

struct LinkageFixture {
  std::vector<DocIdentifiers> docs;
  std::vector<MetaRecord> records;
  std::map<std::string, std::string> expected;  // doc_id -> record_id
};

// 438 documents; 433 carry an identifier planted in the store, through each
// identifier kind in turn, and 5 carry near-miss or no identifiers.
// Distractor records share no identifier with any document.
inline LinkageFixture linkage_fixture(std::uint64_t seed = 7) {
  LinkageFixture f;
  auto num = [](std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%03zu", i);
    return std::string(buf);
  };
  for (std::size_t i = 0; i < 438; ++i) {
    DocIdentifiers d;
    d.doc_id = "doc-" + num(i);
    if (i < 433) {
      MetaRecord r;
      r.record_id = "S2-" + num(i) + "x";
      r.title = "A Study of Topic " + num(i) + ": Methods, Data & Results";
      r.doi = "10.1000/paper." + num(i);
      r.arxiv_id = "2001." + num(i) + "0";
      r.s2_id = "s2-" + num(i);
      switch (i % 5) {
        case 0: d.s2_id = r.s2_id; break;
        case 1: d.doi = r.doi; break;
        case 2: d.arxiv_id = r.arxiv_id; break;
        case 3:  // composed title in the store, decomposed and upper-cased in the corpus
          r.title = "\u00c9tude of Topic " + num(i) + ": Methods, Data & Results";
          d.title = "E\u0301TUDE  of topic " + num(i) + " methods data  results";
          break;
        case 4:  // agreement: two identifiers, same record
          d.doi = r.doi;
          d.title = r.title;
          break;
      }
      f.expected[d.doc_id] = r.record_id;
      f.records.push_back(r);
    } else {
      switch (i - 433) {
        case 0: d.doi = "10.1000/paper.999"; break;         // no such DOI
        case 1: d.title = "A Study of Topic 000 Method"; break;  // near miss
        case 2: d.arxiv_id = "2001.99990"; break;            // unused arXiv id
        case 3: break;                                       // no identifiers
        case 4: d.s2_id = "S2-000x"; break;                  // a record id, not an s2 id
      }
    }
    f.docs.push_back(d);
  }
  for (std::size_t k = 0; k < 150; ++k) {
    MetaRecord r;
    r.record_id = "D-" + num(k);
    r.title = "Unrelated Work " + num(k);
    r.doi = "10.2000/other." + num(k);
    f.records.push_back(r);
  }
  std::mt19937_64 rng(seed);
  std::shuffle(f.records.begin(), f.records.end(), rng);
  for (auto& r : f.records) r.title_norm = normalize_title(r.title);
  return f;
}

}  // namespace fixture
