#pragma once

// Desk-scale multi-task IE components: token encoder, CRF mention tagger,
// additive-attention span embeddings, saliency classifier and 4-ary
// relation scorer with optional graph-embedding fusion.

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "citeie/corpus.hpp"
#include "citeie/crf.hpp"
#include "citeie/graph_embed.hpp"
#include "citeie/nn.hpp"

namespace citeie {

enum class Fusion { none, stage1, stage2 };
std::string_view to_string(Fusion f);
Fusion parse_fusion(std::string_view s);

enum class Task { mention, saliency, relation };
std::string_view to_string(Task t);
Task parse_task(std::string_view s);

// --- vocabulary and encoder ------------------------------------------------

class Vocab {
public:
  static constexpr std::size_t kUnknown = 0;

  Vocab();
  // Every token seen in `docs`, sorted, after the unknown bucket.
  static Vocab build(std::span<const Document> docs);
  static Vocab from_tokens(std::vector<std::string> tokens);  // tokens[0] is the unknown bucket

  std::size_t size() const { return tokens_.size(); }
  std::size_t index(const std::string& token) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct EncoderConfig {
  std::size_t d_tok = 64;
  std::size_t d_ctx = 128;
  std::size_t max_section_len = 512;  // longer sections are split into continuation chunks
};

// Per-section bidirectional recurrence over token embeddings, then a second
// bidirectional recurrence over the concatenation of all sections.
class TokenEncoder {
public:
  struct Cache {
    std::vector<std::size_t> ids;
    std::vector<std::pair<std::size_t, std::size_t>> chunks;  // [begin, end)
    nn::Mat embedded;  // d_tok x T
    nn::Mat section;   // d_ctx x T
    nn::Mat output;    // d_ctx x T
  };

  TokenEncoder() = default;
  TokenEncoder(Vocab vocab, const EncoderConfig& cfg, Rng& rng);

  const Vocab& vocab() const { return vocab_; }
  const EncoderConfig& config() const { return cfg_; }
  std::size_t out_dim() const { return cfg_.d_ctx; }

  // d_ctx x T over every token, citance sections included. Throws
  // ValidationError on a document without tokens.
  nn::Mat encode(const Document& doc, Cache* cache = nullptr) const;
  void backward(const Cache& cache, const nn::Mat& d_output);

  void collect(nn::ParamList& out);

  nn::Param embeddings;  // d_tok x |V|
  nn::BiRecurrent section_rnn;
  nn::BiRecurrent doc_rnn;

private:
  Vocab vocab_;
  EncoderConfig cfg_;
};

// --- span embeddings -------------------------------------------------------

// Additive attention: score_i = v . tanh(A x_i + a), weights = softmax(score),
// span = sum_i weight_i (P x_i + p).
class SpanAttention {
public:
  struct Cache {
    std::size_t begin = 0, end = 0;
    nn::Mat hidden;     // d_span x L
    nn::Vec weights;    // L
    nn::Mat projected;  // d_span x L
  };

  SpanAttention() = default;
  SpanAttention(std::size_t d_in, std::size_t d_span, Rng& rng);

  std::size_t out_dim() const { return static_cast<std::size_t>(proj.out_dim()); }
  // Span [begin, end) over token columns. Throws UsageError on an empty span.
  nn::Vec forward(const nn::Mat& tokens, std::size_t begin, std::size_t end,
                  Cache* cache = nullptr) const;
  // Adds dL/dtokens into d_tokens columns [begin, end).
  void backward(const nn::Mat& tokens, const Cache& cache, const nn::Vec& d_out, nn::Mat& d_tokens);

  void collect(nn::ParamList& out);

  nn::Linear score_hidden;
  nn::Param score_vector;  // d_span x 1
  nn::Linear proj;
};

// --- saliency ----------------------------------------------------------------

struct SaliencyConfig {
  std::size_t d_span = 64;
  std::size_t hidden = 128;
  std::size_t graph_dim = kGraphDim;
  Fusion fusion = Fusion::stage2;
  bool use_tfidf = false;
};

// Stage 1: tanh(W1 [span; tfidf?; graph?] + b1). Stage 2: w2 . [h1; graph?] + b2.
class SaliencyClassifier {
public:
  struct Cache {
    nn::Vec in1, h1, in2;
    double logit = 0;
  };

  SaliencyClassifier() = default;
  SaliencyClassifier(const SaliencyConfig& cfg, Rng& rng);

  const SaliencyConfig& config() const { return cfg_; }
  double logit(const nn::Vec& span, std::span<const double> graph, double tfidf,
               Cache* cache = nullptr) const;
  double probability(const nn::Vec& span, std::span<const double> graph, double tfidf) const;
  // Returns dL/dspan; the graph input is frozen.
  nn::Vec backward(const Cache& cache, double d_logit);

  void collect(nn::ParamList& out) { stage1.collect(out); stage2.collect(out); }

  nn::Linear stage1;
  nn::Linear stage2;
  double threshold = 0.5;

private:
  SaliencyConfig cfg_;
};

// Max over mention probabilities of one coreference cluster.
double cluster_saliency(std::span<const double> mention_probs);

// --- relations ---------------------------------------------------------------

struct RelationConfig {
  std::size_t d_span = 64;
  std::size_t d_rel = 64;
  std::size_t graph_dim = kGraphDim;
  Fusion fusion = Fusion::stage1;
};

// Span vectors of each entity's mentions inside one section, by entity type.
using SectionSpans = std::array<std::vector<const nn::Vec*>, 4>;

class RelationScorer {
public:
  struct Cache {
    std::vector<SectionSpans> sections;
    std::vector<std::array<std::vector<std::size_t>, 4>> argmax;  // per section, type, dim
    std::vector<nn::Vec> in1, hidden;
    nn::Vec in2;
    double logit = 0;
  };

  RelationScorer() = default;
  RelationScorer(const RelationConfig& cfg, Rng& rng);

  const RelationConfig& config() const { return cfg_; }
  // Every section must hold at least one span per type.
  double logit(const std::vector<SectionSpans>& sections, std::span<const double> graph,
               Cache* cache = nullptr) const;
  // Gradients for each span pointer referenced in the cache.
  std::map<const nn::Vec*, nn::Vec> backward(const Cache& cache, double d_logit);

  void collect(nn::ParamList& out) { section_net.collect(out); final_net.collect(out); }

  nn::Linear section_net;
  nn::Linear final_net;
  double threshold = 0.5;

private:
  RelationConfig cfg_;
};

// Groups span vectors of a candidate's clusters by section. Sections count
// only if all four entities appear there; otherwise every mention is pooled
// as one pseudo-section and `fallback` is set. Throws ValidationError if a
// cluster has no mention.
struct RelationSections {
  std::vector<SectionSpans> sections;
  bool fallback = false;
};
using Clusters = std::map<ClusterId, std::vector<std::size_t>>;
RelationSections relation_sections(const Relation4& candidate, const Document& doc,
                                   std::span<const Mention> mentions, const Clusters& clusters,
                                   std::span<const nn::Vec> span_vecs);

// Full cross-product of salient clusters by type, capped at `cap` tuples in
// lexicographic cluster-id order.
inline constexpr std::size_t kMaxCandidates = 10000;
std::vector<Relation4> relation_candidates(const std::map<EntityType, std::vector<ClusterId>>& salient_by_type,
                                           std::size_t cap = kMaxCandidates);

// Type of a cluster (type of its first mention).
EntityType cluster_type(const Clusters& clusters, std::span<const Mention> mentions,
                        const ClusterId& id);

// --- coreference ---------------------------------------------------------------

using CorefFn = std::function<Clusters(std::span<const Mention>, const Document&)>;

// Clusters mentions by (entity type, case-folded surface string); ids are
// "Type:surface".
Clusters surface_coref(std::span<const Mention> mentions, const Document& doc);
// Returns the document's own clusters unchanged.
Clusters gold_coref(std::span<const Mention> mentions, const Document& doc);

// --- task models ---------------------------------------------------------------

struct ModelConfig {
  Task task = Task::mention;
  EncoderConfig encoder;
  std::size_t hidden = 128;
  std::size_t d_span = 64;
  std::size_t d_rel = 64;
  std::size_t graph_dim = kGraphDim;
  Fusion fusion = Fusion::none;
  bool use_tfidf = false;
  std::uint64_t seed = 133;

  bool operator==(const ModelConfig&) const = default;
};

// Per-document side inputs; graph is empty when no embedding is available
// and is treated as the zero vector.
struct DocInput {
  const Document* doc = nullptr;
  std::vector<double> graph;
  std::vector<double> tfidf;  // per token, may be empty
};

class TaskModel {
public:
  virtual ~TaskModel() = default;
  virtual const ModelConfig& config() const = 0;
  virtual nn::ParamList params() = 0;
  virtual TokenEncoder& encoder() = 0;
};

class MentionModel : public TaskModel {
public:
  MentionModel() = default;
  MentionModel(const ModelConfig& cfg, Vocab vocab);

  const ModelConfig& config() const override { return cfg_; }
  nn::ParamList params() override;
  TokenEncoder& encoder() override { return encoder_; }

  // Tag potentials per section (kNumTags x section length).
  std::vector<nn::Mat> emissions(const Document& doc) const;
  // Viterbi per section; citance sections are all-O.
  std::vector<TagSequence> tag(const Document& doc) const;
  std::vector<Mention> predict(const Document& doc) const;
  // Negative log-likelihood of the gold tags over body sections; adds
  // gradients when `backprop`.
  double loss(const Document& doc, bool backprop);

  const Crf& crf() const { return crf_; }

private:
  ModelConfig cfg_;
  TokenEncoder encoder_;
  nn::Linear emit1, emit2;
  Crf crf_;
};

class SaliencyModel : public TaskModel {
public:
  SaliencyModel() = default;
  SaliencyModel(const ModelConfig& cfg, Vocab vocab);

  const ModelConfig& config() const override { return cfg_; }
  nn::ParamList params() override;
  TokenEncoder& encoder() override { return encoder_; }

  std::vector<double> mention_probs(const DocInput& in, std::span<const Mention> mentions) const;
  // Mean binary cross-entropy over `mentions`.
  double loss(const DocInput& in, std::span<const Mention> mentions, std::span<const double> labels,
              bool backprop);

  SpanAttention& attention() { return attention_; }
  SaliencyClassifier& classifier() { return classifier_; }
  double threshold() const { return classifier_.threshold; }
  void set_threshold(double t) { classifier_.threshold = t; }

private:
  double span_tfidf(const DocInput& in, const Mention& m) const;

  ModelConfig cfg_;
  TokenEncoder encoder_;
  SpanAttention attention_;
  SaliencyClassifier classifier_;
};

class RelationModel : public TaskModel {
public:
  RelationModel() = default;
  RelationModel(const ModelConfig& cfg, Vocab vocab);

  const ModelConfig& config() const override { return cfg_; }
  nn::ParamList params() override;
  TokenEncoder& encoder() override { return encoder_; }

  // Probability per candidate; `fallback_flags` receives the pseudo-section flag.
  std::vector<double> score(const DocInput& in, std::span<const Mention> mentions,
                            const Clusters& clusters, std::span<const Relation4> candidates,
                            std::vector<bool>* fallback_flags = nullptr) const;
  double loss(const DocInput& in, std::span<const Mention> mentions, const Clusters& clusters,
              std::span<const Relation4> candidates, std::span<const double> labels, bool backprop);

  SpanAttention& attention() { return attention_; }
  RelationScorer& scorer() { return scorer_; }
  double threshold() const { return scorer_.threshold; }
  void set_threshold(double t) { scorer_.threshold = t; }

private:
  ModelConfig cfg_;
  TokenEncoder encoder_;
  SpanAttention attention_;
  RelationScorer scorer_;
};

// Graph input handed to a fused head; empty means the zero vector.
std::vector<double> graph_input(std::span<const double> graph, std::size_t dim);

}  // namespace citeie
