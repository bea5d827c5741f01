#include "citeie/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include "citeie/errors.hpp"

namespace citeie {

using nlohmann::json;

DocPrediction Pipeline::predict(const DocInput& in) const {
  if (!mention || !saliency || !relation) throw UsageError("pipeline: missing model");
  const Document& doc = *in.doc;
  DocPrediction out;
  out.doc_id = doc.doc_id;
  for (const Mention& m : mention->predict(doc))
    if (!doc.in_citance(m)) out.mentions.push_back(m);
  out.clusters = coref(out.mentions, doc);

  auto probs = saliency->mention_probs(in, out.mentions);
  std::map<EntityType, std::vector<ClusterId>> by_type;
  for (const auto& [id, members] : out.clusters) {
    if (members.empty()) continue;
    std::vector<double> p;
    for (std::size_t i : members) p.push_back(probs[i]);
    double s = cluster_saliency(p);
    out.cluster_scores[id] = s;
    if (s >= saliency->threshold()) {
      out.salient.insert(id);
      by_type[out.mentions[members.front()].type].push_back(id);
    }
  }

  auto cands = relation_candidates(by_type);
  out.relation_probs = relation->score(in, out.mentions, out.clusters, cands);
  for (std::size_t c = 0; c < cands.size(); ++c) {
    bool yes = out.relation_probs[c] >= relation->threshold();
    out.candidates.emplace_back(cands[c], yes);
    if (yes) out.relations.insert(cands[c]);
  }
  return out;
}

bool grounded_in_citance(const DocPrediction& pred, const Document& doc) {
  for (const Mention& m : pred.mentions)
    if (doc.in_citance(m)) return true;
  auto cluster_in_citance = [&](const ClusterId& id) {
    auto it = pred.clusters.find(id);
    if (it == pred.clusters.end()) return false;
    return std::any_of(it->second.begin(), it->second.end(),
                       [&](std::size_t i) { return doc.in_citance(pred.mentions.at(i)); });
  };
  for (const auto& id : pred.salient)
    if (cluster_in_citance(id)) return true;
  for (const auto& r : pred.relations)
    for (EntityType t : kEntityTypes)
      if (cluster_in_citance(r.cluster(t))) return true;
  return false;
}

std::map<ClusterId, std::optional<ClusterId>> map_clusters(const Clusters& pred_clusters,
                                                           std::span<const Mention> pred_mentions,
                                                           const Document& gold) {
  std::map<ClusterId, std::optional<ClusterId>> out;
  for (const auto& [pid, members] : pred_clusters) {
    std::map<ClusterId, std::size_t> overlap;
    for (std::size_t i : members) {
      const Mention& pm = pred_mentions[i];
      for (const auto& [gid, gmembers] : gold.clusters) {
        bool hit = std::any_of(gmembers.begin(), gmembers.end(), [&](std::size_t g) {
          const Mention& gm = gold.mentions[g];
          return pm.start < gm.end && gm.start < pm.end;
        });
        if (hit) ++overlap[gid];
      }
    }
    std::optional<ClusterId> best;
    std::size_t best_n = 0;
    for (const auto& [gid, n] : overlap)
      if (n > best_n) {
        best = gid;
        best_n = n;
      }
    out[pid] = (best && 2 * best_n > members.size()) ? best : std::nullopt;
  }
  return out;
}

DocOutcome score_document(const DocPrediction& pred, const Document& gold) {
  auto mapping = map_clusters(pred.clusters, pred.mentions, gold);
  auto to_gold = [&](const ClusterId& id) {
    auto it = mapping.find(id);
    return it != mapping.end() && it->second ? *it->second : "?" + id;
  };
  auto map_rel = [&](const Relation4& r) {
    return Relation4{to_gold(r.task), to_gold(r.dataset), to_gold(r.method), to_gold(r.metric)};
  };
  DocOutcome o;
  o.doc_id = gold.doc_id;
  o.pred_mentions = pred.mentions;
  o.gold_mentions = gold.mentions;
  for (const auto& id : pred.salient) o.pred_salient.insert(to_gold(id));
  o.gold_salient = gold.salient;
  for (const auto& r : pred.relations) o.pred_relations.insert(map_rel(r));
  o.gold_relations.insert(gold.relations.begin(), gold.relations.end());
  for (const auto& [r, yes] : pred.candidates) o.candidates.emplace_back(map_rel(r), yes);
  return o;
}

// ---------------------------------------------------------------------------

namespace {

json mentions_json(const std::vector<Mention>& ms) {
  json a = json::array();
  for (const auto& m : ms) a.push_back({m.start, m.end, to_string(m.type)});
  return a;
}

std::vector<Mention> mentions_from(const json& a) {
  std::vector<Mention> out;
  for (const auto& m : a)
    out.push_back({m.at(0).get<std::size_t>(), m.at(1).get<std::size_t>(),
                   parse_entity_type(m.at(2).get<std::string>())});
  return out;
}

json rel_json(const Relation4& r) { return json::array({r.task, r.dataset, r.method, r.metric}); }

Relation4 rel_from(const json& a) {
  return {a.at(0).get<std::string>(), a.at(1).get<std::string>(), a.at(2).get<std::string>(),
          a.at(3).get<std::string>()};
}

json rels_json(const std::set<Relation4>& rs) {
  json a = json::array();
  for (const auto& r : rs) a.push_back(rel_json(r));
  return a;
}

std::set<Relation4> rels_from(const json& a) {
  std::set<Relation4> out;
  for (const auto& r : a) out.insert(rel_from(r));
  return out;
}

}  // namespace

json outcome_to_json(const DocOutcome& o) {
  json cands = json::array();
  for (const auto& [r, yes] : o.candidates) cands.push_back({rel_json(r), yes});
  return {{"doc_id", o.doc_id},
          {"pred_mentions", mentions_json(o.pred_mentions)},
          {"gold_mentions", mentions_json(o.gold_mentions)},
          {"pred_salient", o.pred_salient},
          {"gold_salient", o.gold_salient},
          {"pred_relations", rels_json(o.pred_relations)},
          {"gold_relations", rels_json(o.gold_relations)},
          {"candidates", cands}};
}

DocOutcome outcome_from_json(const json& j) {
  DocOutcome o;
  o.doc_id = j.at("doc_id").get<std::string>();
  o.pred_mentions = mentions_from(j.at("pred_mentions"));
  o.gold_mentions = mentions_from(j.at("gold_mentions"));
  o.pred_salient = j.at("pred_salient").get<std::set<ClusterId>>();
  o.gold_salient = j.at("gold_salient").get<std::set<ClusterId>>();
  o.pred_relations = rels_from(j.at("pred_relations"));
  o.gold_relations = rels_from(j.at("gold_relations"));
  for (const auto& c : j.at("candidates")) o.candidates.emplace_back(rel_from(c.at(0)), c.at(1).get<bool>());
  return o;
}

void write_outcomes(std::ostream& out, std::span<const DocOutcome> outcomes) {
  for (const auto& o : outcomes) out << outcome_to_json(o).dump() << '\n';
}

std::vector<DocOutcome> read_outcomes(std::istream& in) {
  std::vector<DocOutcome> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(outcome_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError(e.what(), lineno);
    } catch (const Error& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  return out;
}

std::vector<DocOutcome> load_outcomes(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open outcomes " + path);
  return read_outcomes(in);
}

// ---------------------------------------------------------------------------

Metric parse_metric(std::string_view s) {
  if (s == "mention") return Metric::mention;
  if (s == "saliency") return Metric::saliency;
  if (s == "relation4") return Metric::relation4;
  if (s == "relation2") return Metric::relation2;
  if (s == "corpus4") return Metric::corpus4;
  if (s == "corpus2") return Metric::corpus2;
  throw UsageError("unknown metric '" + std::string(s) + "'");
}

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::mention: return "mention";
    case Metric::saliency: return "saliency";
    case Metric::relation4: return "relation4";
    case Metric::relation2: return "relation2";
    case Metric::corpus4: return "corpus4";
    case Metric::corpus2: return "corpus2";
  }
  return "?";
}

namespace {

// Items are keyed by position so a bootstrap resample may repeat a document.
std::string pos_key(std::size_t i) { return std::to_string(i); }

DocRelations pred_relations(std::span<const DocOutcome> os) {
  DocRelations d;
  for (std::size_t i = 0; i < os.size(); ++i) d[pos_key(i)] = os[i].pred_relations;
  return d;
}

DocRelations gold_relations(std::span<const DocOutcome> os) {
  DocRelations d;
  for (std::size_t i = 0; i < os.size(); ++i) d[pos_key(i)] = os[i].gold_relations;
  return d;
}

ClassReport corpus_report(std::span<const DocOutcome> os, int arity) {
  std::map<std::string, ScoredCandidates> scored;
  for (std::size_t i = 0; i < os.size(); ++i) scored[pos_key(i)] = os[i].candidates;
  auto cands = corpus_candidates(scored, gold_relations(os), arity);
  return corpus_level_relation_metric(cands);
}

MentionReport mention_report(std::span<const DocOutcome> os) {
  DocMentions p, g;
  for (std::size_t i = 0; i < os.size(); ++i) {
    p[pos_key(i)] = os[i].pred_mentions;
    g[pos_key(i)] = os[i].gold_mentions;
  }
  return mention_f1(p, g);
}

PRF saliency_report(std::span<const DocOutcome> os) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const auto& o : os) {
    std::size_t hit = 0;
    for (const auto& c : o.pred_salient) hit += o.gold_salient.count(c);
    tp += hit;
    fp += o.pred_salient.size() - hit;
    fn += o.gold_salient.size() - hit;
  }
  return PRF::from_counts(tp, fp, fn);
}

}  // namespace

double metric_value(Metric m, std::span<const DocOutcome> os) {
  switch (m) {
    case Metric::mention: return mention_report(os).macro.f1;
    case Metric::saliency: return saliency_report(os).f1;
    case Metric::relation4: return doc_level_relation_metric(pred_relations(os), gold_relations(os), 4).f1;
    case Metric::relation2: return doc_level_relation_metric(pred_relations(os), gold_relations(os), 2).f1;
    case Metric::corpus4: return corpus_report(os, 4).macro_f1;
    case Metric::corpus2: return corpus_report(os, 2).macro_f1;
  }
  return 0;
}

EvalSummary summarize(std::span<const DocOutcome> os) {
  EvalSummary s;
  s.documents = os.size();
  s.mention = mention_report(os);
  s.saliency = saliency_report(os);
  auto p = pred_relations(os), g = gold_relations(os);
  s.relation4 = doc_level_relation_metric(p, g, 4);
  s.relation2 = doc_level_relation_metric(p, g, 2);
  s.corpus4 = corpus_report(os, 4);
  s.corpus2 = corpus_report(os, 2);
  return s;
}

namespace {

json class_json(const ClassReport& c) {
  return {{"positive", to_json(c.positive)},
          {"negative", to_json(c.negative)},
          {"macro_precision", c.macro_precision},
          {"macro_recall", c.macro_recall},
          {"macro_f1", c.macro_f1}};
}

}  // namespace

json to_json(const EvalSummary& s) {
  json per_type = json::object();
  for (EntityType t : kEntityTypes) per_type[std::string(to_string(t))] = to_json(s.mention.per_type[static_cast<std::size_t>(t)]);
  return {{"documents", s.documents},
          {"mention", {{"macro", to_json(s.mention.macro)}, {"per_type", per_type}}},
          {"saliency", to_json(s.saliency)},
          {"relation_doc_4ary", to_json(s.relation4)},
          {"relation_doc_binary", to_json(s.relation2)},
          {"relation_corpus_4ary", class_json(s.corpus4)},
          {"relation_corpus_binary", class_json(s.corpus2)},
          {"empty_document_convention", "gold = pred = empty scores (1, 1, 1)"}};
}

std::string format_summary(const EvalSummary& s) {
  std::vector<std::vector<std::string>> rows;
  auto row = [&](const std::string& name, double p, double r, double f) {
    rows.push_back({name, fmt_score(p), fmt_score(r), fmt_score(f)});
  };
  for (EntityType t : kEntityTypes) {
    const PRF& x = s.mention.per_type[static_cast<std::size_t>(t)];
    row("mention " + std::string(to_string(t)), x.precision, x.recall, x.f1);
  }
  row("mention (type average)", s.mention.macro.precision, s.mention.macro.recall, s.mention.macro.f1);
  row("salient clusters", s.saliency.precision, s.saliency.recall, s.saliency.f1);
  row("relation doc-level 4-ary", s.relation4.precision, s.relation4.recall, s.relation4.f1);
  row("relation doc-level binary", s.relation2.precision, s.relation2.recall, s.relation2.f1);
  row("relation corpus-level 4-ary (macro)", s.corpus4.macro_precision, s.corpus4.macro_recall, s.corpus4.macro_f1);
  row("relation corpus-level binary (macro)", s.corpus2.macro_precision, s.corpus2.macro_recall, s.corpus2.macro_f1);
  return "# documents: " + std::to_string(s.documents) + "; empty gold and prediction scores (1, 1, 1)\n" +
         format_table({"metric", "P", "R", "F1"}, rows);
}

PreparedDocs prepare_inputs(std::vector<Document> docs, const FeatureSources& src) {
  PreparedDocs out;
  out.docs = std::move(docs);
  static const std::vector<Citance> kNone;
  std::vector<const std::vector<Citance>*> cits(out.docs.size(), &kNone);
  std::vector<std::optional<std::string>> records(out.docs.size());
  for (std::size_t i = 0; i < out.docs.size(); ++i) {
    if (src.links) records[i] = src.links->record_for(out.docs[i].doc_id);
    if (src.citances && records[i])
      if (auto it = src.citances->find(*records[i]); it != src.citances->end()) cits[i] = &it->second;
    if (src.append_citances && !cits[i]->empty())
      out.docs[i] = append_citance_sections(out.docs[i], *cits[i]);
  }
  out.inputs.resize(out.docs.size());
  for (std::size_t i = 0; i < out.docs.size(); ++i) {
    DocInput& in = out.inputs[i];
    in.doc = &out.docs[i];
    if (src.embeddings) {
      in.graph = records[i] ? src.embeddings->lookup(*records[i])
                            : std::vector<double>(src.embeddings->dim(), 0.0);
    }
    if (src.tfidf) {
      if (!src.idf) throw UsageError("tfidf features need an IDF table");
      std::vector<std::string> toks;
      for (const auto& sec : out.docs[i].sections) toks.insert(toks.end(), sec.tokens.begin(), sec.tokens.end());
      in.tfidf = citation_tfidf(toks, *cits[i], *src.idf);
    }
  }
  return out;
}

PRF saliency_mention_prf(const SaliencyModel& model, std::span<const DocInput> docs) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const auto& in : docs) {
    auto probs = model.mention_probs(in, in.doc->mentions);
    std::vector<bool> gold(in.doc->mentions.size(), false);
    for (const auto& [id, members] : in.doc->clusters)
      if (in.doc->salient.count(id))
        for (std::size_t i : members) gold[i] = true;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      bool pred = probs[i] >= model.threshold();
      if (pred && gold[i]) ++tp;
      else if (pred) ++fp;
      else if (gold[i]) ++fn;
    }
  }
  return PRF::from_counts(tp, fp, fn);
}

}  // namespace citeie
