#pragma once

// End-to-end inference: mentions -> coreference -> saliency -> candidate
// tuples -> relations, plus scoring against gold and per-document outcome
// records used by evaluation and significance testing.

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "citeie/citation_text.hpp"
#include "citeie/evaluation.hpp"
#include "citeie/graph_embed.hpp"
#include "citeie/ie_models.hpp"
#include "json.hpp"

namespace citeie {

struct DocPrediction {
  std::string doc_id;
  std::vector<Mention> mentions;
  Clusters clusters;
  std::map<ClusterId, double> cluster_scores;
  std::set<ClusterId> salient;
  ScoredCandidates candidates;
  std::vector<double> relation_probs;
  std::set<Relation4> relations;
};

struct Pipeline {
  const MentionModel* mention = nullptr;
  const SaliencyModel* saliency = nullptr;
  const RelationModel* relation = nullptr;
  CorefFn coref = surface_coref;

  DocPrediction predict(const DocInput& in) const;
};

// True when a predicted mention, salient cluster or relation argument sits
// in a citance section.
bool grounded_in_citance(const DocPrediction& pred, const Document& doc);

// Predicted cluster -> gold cluster when more than half of its mentions
// overlap mentions of that gold cluster (the gold cluster with the most
// overlapping mentions, lowest id on ties).
std::map<ClusterId, std::optional<ClusterId>> map_clusters(const Clusters& pred_clusters,
                                                           std::span<const Mention> pred_mentions,
                                                           const Document& gold);

// Per-document outcome in gold cluster identities. Unmapped predicted
// clusters keep a "?"-prefixed id so they can never match gold.
struct DocOutcome {
  std::string doc_id;
  std::vector<Mention> pred_mentions, gold_mentions;
  std::set<ClusterId> pred_salient, gold_salient;
  std::set<Relation4> pred_relations, gold_relations;
  ScoredCandidates candidates;

  bool operator==(const DocOutcome&) const = default;
};

DocOutcome score_document(const DocPrediction& pred, const Document& gold);

nlohmann::json outcome_to_json(const DocOutcome& o);
DocOutcome outcome_from_json(const nlohmann::json& j);
void write_outcomes(std::ostream& out, std::span<const DocOutcome> outcomes);
std::vector<DocOutcome> read_outcomes(std::istream& in);
std::vector<DocOutcome> load_outcomes(const std::string& path);

enum class Metric { mention, saliency, relation4, relation2, corpus4, corpus2 };
Metric parse_metric(std::string_view s);
std::string_view to_string(Metric m);
double metric_value(Metric m, std::span<const DocOutcome> outcomes);

struct EvalSummary {
  std::size_t documents = 0;
  MentionReport mention;
  PRF saliency;  // salient clusters, pooled
  PRF relation4, relation2;
  ClassReport corpus4, corpus2;
};

EvalSummary summarize(std::span<const DocOutcome> outcomes);
nlohmann::json to_json(const EvalSummary& s);
std::string format_summary(const EvalSummary& s);

// Optional side inputs attached to every document.
struct FeatureSources {
  const LinkMap* links = nullptr;
  const EmbeddingTable* embeddings = nullptr;  // graph vectors keyed by record id
  const std::map<std::string, std::vector<Citance>>* citances = nullptr;  // by target record id
  const IdfTable* idf = nullptr;
  bool append_citances = false;
  bool tfidf = false;
};

// Owns the (possibly citance-extended) documents its inputs point into.
struct PreparedDocs {
  std::vector<Document> docs;
  std::vector<DocInput> inputs;

  PreparedDocs() = default;
  PreparedDocs(const PreparedDocs&) = delete;
  PreparedDocs& operator=(const PreparedDocs&) = delete;
  PreparedDocs(PreparedDocs&&) = default;
  PreparedDocs& operator=(PreparedDocs&&) = default;
};

// Unlinked documents, or linked ones without an embedding, get the zero
// graph vector; documents without citances get all-zero TF-IDF.
PreparedDocs prepare_inputs(std::vector<Document> docs, const FeatureSources& src);

// Mention-level saliency decisions on gold mentions at the model threshold.
PRF saliency_mention_prf(const SaliencyModel& model, std::span<const DocInput> docs);

}  // namespace citeie
