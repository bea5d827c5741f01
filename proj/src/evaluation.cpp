#include "citeie/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace citeie {

using nlohmann::json;

double f1_of(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }

PRF PRF::from_counts(std::size_t tp, std::size_t fp, std::size_t fn, bool empty_is_perfect) {
  PRF out;
  out.tp = tp;
  out.fp = fp;
  out.fn = fn;
  if (empty_is_perfect && tp + fp == 0 && tp + fn == 0) {
    out.precision = out.recall = out.f1 = 1.0;
    return out;
  }
  out.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  out.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  out.f1 = f1_of(out.precision, out.recall);
  return out;
}

MentionReport mention_f1(const DocMentions& pred, const DocMentions& gold) {
  std::array<std::size_t, 4> tp{}, fp{}, fn{};
  std::set<std::string> docs;
  for (const auto& [d, _] : pred) docs.insert(d);
  for (const auto& [d, _] : gold) docs.insert(d);
  static const std::vector<Mention> kEmpty;
  for (const auto& d : docs) {
    auto pi = pred.find(d);
    auto gi = gold.find(d);
    std::set<Mention> p(pi == pred.end() ? kEmpty.begin() : pi->second.begin(),
                        pi == pred.end() ? kEmpty.end() : pi->second.end());
    std::set<Mention> g(gi == gold.end() ? kEmpty.begin() : gi->second.begin(),
                        gi == gold.end() ? kEmpty.end() : gi->second.end());
    for (const auto& m : p) {
      auto t = static_cast<std::size_t>(m.type);
      if (g.count(m)) ++tp[t];
      else ++fp[t];
    }
    for (const auto& m : g)
      if (!p.count(m)) ++fn[static_cast<std::size_t>(m.type)];
  }
  MentionReport rep;
  std::size_t present = 0;
  for (std::size_t t = 0; t < 4; ++t) {
    rep.per_type[t] = PRF::from_counts(tp[t], fp[t], fn[t]);
    rep.macro.tp += tp[t];
    rep.macro.fp += fp[t];
    rep.macro.fn += fn[t];
    if (tp[t] + fp[t] + fn[t] == 0) continue;
    ++present;
    rep.macro.precision += rep.per_type[t].precision;
    rep.macro.recall += rep.per_type[t].recall;
    rep.macro.f1 += rep.per_type[t].f1;
  }
  if (present == 0) {
    rep.macro.precision = rep.macro.recall = rep.macro.f1 = 1.0;
  } else {
    rep.macro.precision /= static_cast<double>(present);
    rep.macro.recall /= static_cast<double>(present);
    rep.macro.f1 /= static_cast<double>(present);
  }
  return rep;
}

namespace {

template <class T>
PRF set_prf(const std::set<T>& pred, const std::set<T>& gold) {
  std::size_t tp = 0;
  for (const auto& x : pred) tp += gold.count(x);
  return PRF::from_counts(tp, pred.size() - tp, gold.size() - tp, true);
}

PRF doc_prf(const std::set<Relation4>& pred, const std::set<Relation4>& gold, int arity) {
  if (arity == 4) return set_prf(pred, gold);
  if (arity == 2) {
    std::vector<Relation4> p(pred.begin(), pred.end()), g(gold.begin(), gold.end());
    return set_prf(flatten_relations(p), flatten_relations(g));
  }
  throw UsageError("relation arity must be 2 or 4");
}

PRF mean_prf(const std::vector<PRF>& per_doc) {
  PRF out;
  if (per_doc.empty()) return out;
  for (const auto& p : per_doc) {
    out.precision += p.precision;
    out.recall += p.recall;
    out.f1 += p.f1;
    out.tp += p.tp;
    out.fp += p.fp;
    out.fn += p.fn;
  }
  const double n = static_cast<double>(per_doc.size());
  out.precision /= n;
  out.recall /= n;
  out.f1 /= n;
  return out;
}

}  // namespace

PRF doc_level_relation_metric(const DocRelations& pred, const DocRelations& gold, int arity) {
  std::set<std::string> docs;
  for (const auto& [d, _] : pred) docs.insert(d);
  for (const auto& [d, _] : gold) docs.insert(d);
  static const std::set<Relation4> kEmpty;
  std::vector<PRF> per_doc;
  for (const auto& d : docs) {
    auto pi = pred.find(d);
    auto gi = gold.find(d);
    per_doc.push_back(doc_prf(pi == pred.end() ? kEmpty : pi->second,
                              gi == gold.end() ? kEmpty : gi->second, arity));
  }
  return mean_prf(per_doc);
}

double doc_level_f1(std::span<const DocRelationItem> items, int arity) {
  std::vector<PRF> per_doc;
  per_doc.reserve(items.size());
  for (const auto& it : items) per_doc.push_back(doc_prf(it.pred, it.gold, arity));
  return mean_prf(per_doc).f1;
}

ClassReport corpus_level_relation_metric(std::span<const Candidate> cands) {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (const auto& c : cands) {
    if (c.predicted && c.label) ++tp;
    else if (c.predicted) ++fp;
    else if (c.label) ++fn;
    else ++tn;
  }
  ClassReport rep;
  rep.positive = PRF::from_counts(tp, fp, fn, true);
  rep.negative = PRF::from_counts(tn, fn, fp, true);
  rep.macro_precision = (rep.positive.precision + rep.negative.precision) / 2;
  rep.macro_recall = (rep.positive.recall + rep.negative.recall) / 2;
  rep.macro_f1 = (rep.positive.f1 + rep.negative.f1) / 2;
  return rep;
}

double binary_f1(std::span<const Candidate> cands) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const auto& c : cands) {
    if (c.predicted && c.label) ++tp;
    else if (c.predicted) ++fp;
    else if (c.label) ++fn;
  }
  return PRF::from_counts(tp, fp, fn).f1;
}

std::vector<Candidate> corpus_candidates(const std::map<std::string, ScoredCandidates>& scored,
                                         const DocRelations& gold, int arity) {
  static const std::set<Relation4> kEmpty;
  std::vector<Candidate> out;
  for (const auto& [doc, cands] : scored) {
    auto gi = gold.find(doc);
    const auto& g = gi == gold.end() ? kEmpty : gi->second;
    if (arity == 4) {
      for (const auto& [rel, decision] : cands) out.push_back({decision, g.count(rel) > 0});
    } else if (arity == 2) {
      std::vector<Relation4> all, positive;
      for (const auto& [rel, decision] : cands) {
        all.push_back(rel);
        if (decision) positive.push_back(rel);
      }
      std::vector<Relation4> gv(g.begin(), g.end());
      auto gold_pairs = flatten_relations(gv);
      auto pos_pairs = flatten_relations(positive);
      for (const auto& pair : flatten_relations(all))
        out.push_back({pos_pairs.count(pair) > 0, gold_pairs.count(pair) > 0});
    } else {
      throw UsageError("relation arity must be 2 or 4");
    }
  }
  return out;
}

json to_json(const BootstrapResult& r) {
  return {{"p_value", r.p_value},
          {"metric_a", r.metric_a},
          {"metric_b", r.metric_b},
          {"b_at_least_a", r.b_at_least_a},
          {"a_at_least_b", r.a_at_least_b},
          {"n_resamples", r.n_resamples},
          {"n_items", r.n_items},
          {"seed", r.seed},
          {"two_sided", r.two_sided},
          {"hierarchical", r.hierarchical},
          {"tie_convention", kTieConvention}};
}

// ---------------------------------------------------------------------------

std::size_t BucketedReport::total() const {
  std::size_t n = 0;
  for (const auto& r : rows) n += r.count;
  return n;
}

namespace {

std::string bucket_label(const std::vector<std::size_t>& edges, std::size_t i) {
  if (i + 1 < edges.size())
    return "[" + std::to_string(edges[i]) + "," + std::to_string(edges[i + 1]) + ")";
  return "[" + std::to_string(edges[i]) + ",inf)";
}

}  // namespace

BucketedReport bucket_by_citations(const DocRelations& pred, const DocRelations& gold,
                                   const CitationGraph& graph, const LinkMap& links, int arity,
                                   const std::vector<std::size_t>& edges) {
  Histogram h = Histogram::with_edges(edges);
  std::vector<DocRelations> pred_b(edges.size()), gold_b(edges.size());
  BucketedReport rep;
  rep.key = "inbound citations";
  rep.rows.resize(edges.size());
  for (std::size_t i = 0; i < edges.size(); ++i) rep.rows[i].label = bucket_label(edges, i);

  std::set<std::string> docs;
  for (const auto& [d, _] : gold) docs.insert(d);
  for (const auto& [d, _] : pred) docs.insert(d);
  for (const auto& d : docs) {
    std::size_t cites = 0;
    bool flagged = true;
    if (auto rid = links.record_for(d))
      if (auto idx = graph.index(*rid)) {
        cites = graph.citations(*idx);
        flagged = false;
      }
    std::size_t b = h.bucket_of(cites);
    ++rep.rows[b].count;
    if (flagged) ++rep.rows[b].flagged;
    if (auto it = gold.find(d); it != gold.end()) gold_b[b][d] = it->second;
    else gold_b[b][d] = {};
    if (auto it = pred.find(d); it != pred.end()) pred_b[b][d] = it->second;
  }
  for (std::size_t b = 0; b < edges.size(); ++b)
    if (rep.rows[b].count > 0) rep.rows[b].metric = doc_level_relation_metric(pred_b[b], gold_b[b], arity);
  return rep;
}

double relation_span_distance(const Relation4& rel, const Document& doc) {
  std::array<std::vector<std::size_t>, 4> starts;
  for (std::size_t k = 0; k < 4; ++k) {
    const ClusterId& id = rel.cluster(kEntityTypes[k]);
    auto it = doc.clusters.find(id);
    if (it == doc.clusters.end() || it->second.empty())
      throw ValidationError("relation_span_distance: cluster '" + id + "' has no mentions");
    for (std::size_t idx : it->second) starts[k].push_back(doc.mentions.at(idx).start);
  }
  const std::size_t n = doc.body_token_count();
  if (n == 0) return 0.0;
  double sum = 0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t b = a + 1; b < 4; ++b) {
      if (rel.cluster(kEntityTypes[a]) == rel.cluster(kEntityTypes[b])) continue;
      for (std::size_t x : starts[a])
        for (std::size_t y : starts[b]) {
          sum += static_cast<double>(x > y ? x - y : y - x);
          ++pairs;
        }
    }
  return pairs ? sum / static_cast<double>(pairs) / static_cast<double>(n) : 0.0;
}

std::map<std::string, double> global_saliency_rate(std::span<const Document> docs) {
  std::map<std::string, std::pair<std::size_t, std::size_t>> counts;  // salient, total
  for (const auto& d : docs) {
    std::vector<bool> salient(d.mentions.size(), false);
    for (const auto& [id, members] : d.clusters)
      if (d.salient.count(id))
        for (std::size_t i : members) salient[i] = true;
    for (std::size_t i = 0; i < d.mentions.size(); ++i) {
      auto& c = counts[d.surface(d.mentions[i])];
      c.first += salient[i] ? 1 : 0;
      ++c.second;
    }
  }
  std::map<std::string, double> out;
  for (const auto& [form, c] : counts)
    out[form] = static_cast<double>(c.first) / static_cast<double>(c.second);
  return out;
}

// ---------------------------------------------------------------------------

json to_json(const PRF& p) {
  return {{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1},
          {"tp", p.tp},               {"fp", p.fp},         {"fn", p.fn}};
}

json to_json(const BucketedReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    json j = {{"bucket", row.label}, {"count", row.count}, {"flagged", row.flagged}};
    if (row.metric) j["metric"] = to_json(*row.metric);
    rows.push_back(std::move(j));
  }
  return {{"key", r.key}, {"rows", rows}};
}

std::string format_table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size() && c < width.size(); ++c) width[c] = std::max(width[c], r[c].size());
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t c = 0; c < width.size(); ++c) {
      std::string cell = c < r.size() ? r[c] : "";
      out << (c ? "  " : "") << cell << std::string(width[c] - cell.size(), ' ');
    }
    out << '\n';
  };
  line(header);
  std::size_t total = 0;
  for (auto w : width) total += w;
  out << std::string(total + 2 * (width.empty() ? 0 : width.size() - 1), '-') << '\n';
  for (const auto& r : rows) line(r);
  return out.str();
}

std::string fmt_score(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace citeie
