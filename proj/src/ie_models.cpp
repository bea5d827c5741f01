#include "citeie/ie_models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "citeie/errors.hpp"
#include "citeie/linkage.hpp"
#include "citeie/log.hpp"

namespace citeie {

using nn::Mat;
using nn::Vec;

std::string_view to_string(Fusion f) {
  switch (f) {
    case Fusion::none: return "none";
    case Fusion::stage1: return "stage1";
    case Fusion::stage2: return "stage2";
  }
  return "?";
}

Fusion parse_fusion(std::string_view s) {
  if (s == "none") return Fusion::none;
  if (s == "stage1") return Fusion::stage1;
  if (s == "stage2") return Fusion::stage2;
  throw UsageError("unknown fusion mode '" + std::string(s) + "' (none|stage1|stage2)");
}

std::string_view to_string(Task t) {
  switch (t) {
    case Task::mention: return "mention";
    case Task::saliency: return "saliency";
    case Task::relation: return "relation";
  }
  return "?";
}

Task parse_task(std::string_view s) {
  if (s == "mention") return Task::mention;
  if (s == "saliency") return Task::saliency;
  if (s == "relation") return Task::relation;
  throw UsageError("unknown task '" + std::string(s) + "' (mention|saliency|relation)");
}

std::vector<double> graph_input(std::span<const double> graph, std::size_t dim) {
  if (graph.empty()) return std::vector<double>(dim, 0.0);
  return {graph.begin(), graph.end()};
}

// ---------------------------------------------------------------------------

Vocab::Vocab() : tokens_{"<unk>"} { index_.emplace(tokens_[0], 0); }

Vocab Vocab::build(std::span<const Document> docs) {
  std::set<std::string> seen;
  for (const auto& d : docs)
    for (const auto& s : d.sections) seen.insert(s.tokens.begin(), s.tokens.end());
  std::vector<std::string> tokens{"<unk>"};
  for (const auto& t : seen)
    if (t != "<unk>") tokens.push_back(t);
  return from_tokens(std::move(tokens));
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  if (tokens.empty()) throw ValidationError("vocab: missing unknown bucket");
  Vocab v;
  v.tokens_ = std::move(tokens);
  v.index_.clear();
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) v.index_.emplace(v.tokens_[i], i);
  return v;
}

std::size_t Vocab::index(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnknown : it->second;
}

TokenEncoder::TokenEncoder(Vocab vocab, const EncoderConfig& cfg, Rng& rng)
    : embeddings("encoder.embeddings", static_cast<Eigen::Index>(cfg.d_tok),
                 static_cast<Eigen::Index>(vocab.size())),
      section_rnn("encoder.section", static_cast<Eigen::Index>(cfg.d_tok),
                  static_cast<Eigen::Index>(cfg.d_ctx), rng),
      doc_rnn("encoder.document", static_cast<Eigen::Index>(cfg.d_ctx),
              static_cast<Eigen::Index>(cfg.d_ctx), rng),
      vocab_(std::move(vocab)),
      cfg_(cfg) {
  if (cfg.max_section_len == 0) throw UsageError("encoder: max_section_len must be positive");
  nn::init_uniform(embeddings, rng, 0.5);
}

Mat TokenEncoder::encode(const Document& doc, Cache* cache) const {
  Cache local;
  Cache& c = cache ? *cache : local;
  c.ids.clear();
  c.chunks.clear();
  for (const auto& s : doc.sections) {
    std::size_t begin = c.ids.size();
    for (const auto& t : s.tokens) c.ids.push_back(vocab_.index(t));
    for (std::size_t b = begin; b < c.ids.size(); b += cfg_.max_section_len)
      c.chunks.emplace_back(b, std::min(c.ids.size(), b + cfg_.max_section_len));
  }
  const auto T = static_cast<Eigen::Index>(c.ids.size());
  if (T == 0) throw ValidationError("encode: document '" + doc.doc_id + "' has no tokens");

  c.embedded.resize(static_cast<Eigen::Index>(cfg_.d_tok), T);
  for (Eigen::Index t = 0; t < T; ++t)
    c.embedded.col(t) = embeddings.value.col(static_cast<Eigen::Index>(c.ids[t]));
  c.section.resize(static_cast<Eigen::Index>(cfg_.d_ctx), T);
  for (auto [b, e] : c.chunks) {
    auto bi = static_cast<Eigen::Index>(b);
    auto len = static_cast<Eigen::Index>(e - b);
    c.section.middleCols(bi, len) = section_rnn.forward(c.embedded.middleCols(bi, len));
  }
  c.output = doc_rnn.forward(c.section);
  return c.output;
}

void TokenEncoder::backward(const Cache& c, const Mat& d_output) {
  Mat d_section = doc_rnn.backward(c.section, c.output, d_output);
  for (auto [b, e] : c.chunks) {
    auto bi = static_cast<Eigen::Index>(b);
    auto len = static_cast<Eigen::Index>(e - b);
    Mat d_emb = section_rnn.backward(c.embedded.middleCols(bi, len), c.section.middleCols(bi, len),
                                     d_section.middleCols(bi, len));
    for (Eigen::Index t = 0; t < len; ++t)
      embeddings.grad.col(static_cast<Eigen::Index>(c.ids[b + t])) += d_emb.col(t);
  }
}

void TokenEncoder::collect(nn::ParamList& out) {
  out.push_back(&embeddings);
  section_rnn.collect(out);
  doc_rnn.collect(out);
}

// ---------------------------------------------------------------------------

SpanAttention::SpanAttention(std::size_t d_in, std::size_t d_span, Rng& rng)
    : score_hidden("span.score_hidden", static_cast<Eigen::Index>(d_in),
                   static_cast<Eigen::Index>(d_span), rng),
      score_vector("span.score_vector", static_cast<Eigen::Index>(d_span), 1),
      proj("span.proj", static_cast<Eigen::Index>(d_in), static_cast<Eigen::Index>(d_span), rng) {
  nn::init_uniform(score_vector, rng);
}

Vec SpanAttention::forward(const Mat& tokens, std::size_t begin, std::size_t end, Cache* cache) const {
  if (end <= begin || end > static_cast<std::size_t>(tokens.cols()))
    throw UsageError("span_embed: empty or out-of-range span");
  Cache local;
  Cache& c = cache ? *cache : local;
  c.begin = begin;
  c.end = end;
  auto X = tokens.middleCols(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin));
  c.hidden = nn::tanh(score_hidden.forward_cols(X));
  Vec scores = c.hidden.transpose() * score_vector.value.col(0);
  double m = scores.maxCoeff();
  c.weights = (scores.array() - m).exp();
  c.weights /= c.weights.sum();
  c.projected = proj.forward_cols(X);
  return c.projected * c.weights;
}

void SpanAttention::backward(const Mat& tokens, const Cache& c, const Vec& d_out, Mat& d_tokens) {
  const auto b = static_cast<Eigen::Index>(c.begin);
  const auto L = static_cast<Eigen::Index>(c.end - c.begin);
  Mat X = tokens.middleCols(b, L);
  Mat d_proj = d_out * c.weights.transpose();
  Mat dX = proj.backward_cols(X, d_proj);
  Vec d_w = c.projected.transpose() * d_out;
  Vec d_scores = c.weights.array() * (d_w.array() - c.weights.dot(d_w));
  score_vector.grad.col(0) += c.hidden * d_scores;
  Mat d_hidden = score_vector.value.col(0) * d_scores.transpose();
  dX += score_hidden.backward_cols(X, nn::tanh_grad(c.hidden, d_hidden));
  d_tokens.middleCols(b, L) += dX;
}

void SpanAttention::collect(nn::ParamList& out) {
  score_hidden.collect(out);
  out.push_back(&score_vector);
  proj.collect(out);
}

// ---------------------------------------------------------------------------

namespace {

std::size_t stage1_width(const SaliencyConfig& c) {
  return c.d_span + (c.use_tfidf ? 1 : 0) + (c.fusion == Fusion::stage1 ? c.graph_dim : 0);
}

void check_graph(Fusion f, std::span<const double> graph, std::size_t dim) {
  if (f != Fusion::none && graph.size() != dim)
    throw ValidationError("graph vector has length " + std::to_string(graph.size()) +
                          ", fused head expects " + std::to_string(dim));
}

}  // namespace

SaliencyClassifier::SaliencyClassifier(const SaliencyConfig& cfg, Rng& rng)
    : stage1("saliency.stage1", static_cast<Eigen::Index>(stage1_width(cfg)),
             static_cast<Eigen::Index>(cfg.hidden), rng),
      stage2("saliency.stage2",
             static_cast<Eigen::Index>(cfg.hidden + (cfg.fusion == Fusion::stage2 ? cfg.graph_dim : 0)), 1,
             rng),
      cfg_(cfg) {}

double SaliencyClassifier::logit(const Vec& span, std::span<const double> graph, double tfidf,
                                 Cache* cache) const {
  check_graph(cfg_.fusion, graph, cfg_.graph_dim);
  Cache local;
  Cache& c = cache ? *cache : local;
  c.in1.resize(static_cast<Eigen::Index>(stage1_width(cfg_)));
  Eigen::Index k = 0;
  c.in1.segment(k, span.size()) = span;
  k += span.size();
  if (cfg_.use_tfidf) c.in1(k++) = tfidf;
  if (cfg_.fusion == Fusion::stage1)
    for (double g : graph) c.in1(k++) = g;
  c.h1 = nn::tanh(stage1.forward(c.in1));
  c.in2.resize(stage2.in_dim());
  c.in2.head(c.h1.size()) = c.h1;
  if (cfg_.fusion == Fusion::stage2)
    for (std::size_t i = 0; i < graph.size(); ++i) c.in2(c.h1.size() + static_cast<Eigen::Index>(i)) = graph[i];
  c.logit = stage2.forward(c.in2)(0);
  return c.logit;
}

double SaliencyClassifier::probability(const Vec& span, std::span<const double> graph,
                                       double tfidf) const {
  return nn::sigmoid(logit(span, graph, tfidf));
}

Vec SaliencyClassifier::backward(const Cache& c, double d_logit) {
  Vec d_in2 = stage2.backward(c.in2, Vec::Constant(1, d_logit));
  Vec d_h1 = d_in2.head(c.h1.size());
  Vec d_pre = (d_h1.array() * (1.0 - c.h1.array().square())).matrix();
  Vec d_in1 = stage1.backward(c.in1, d_pre);
  return d_in1.head(static_cast<Eigen::Index>(cfg_.d_span));
}

double cluster_saliency(std::span<const double> probs) {
  if (probs.empty()) throw UsageError("cluster_saliency: empty cluster");
  return *std::max_element(probs.begin(), probs.end());
}

// ---------------------------------------------------------------------------

RelationScorer::RelationScorer(const RelationConfig& cfg, Rng& rng)
    : section_net("relation.section",
                  static_cast<Eigen::Index>(4 * cfg.d_span + (cfg.fusion == Fusion::stage1 ? cfg.graph_dim : 0)),
                  static_cast<Eigen::Index>(cfg.d_rel), rng),
      final_net("relation.final",
                static_cast<Eigen::Index>(cfg.d_rel + (cfg.fusion == Fusion::stage2 ? cfg.graph_dim : 0)), 1,
                rng),
      cfg_(cfg) {}

double RelationScorer::logit(const std::vector<SectionSpans>& sections, std::span<const double> graph,
                             Cache* cache) const {
  check_graph(cfg_.fusion, graph, cfg_.graph_dim);
  if (sections.empty()) throw UsageError("score_relation: no sections to pool");
  Cache local;
  Cache& c = cache ? *cache : local;
  const auto ds = static_cast<Eigen::Index>(cfg_.d_span);
  c.sections = sections;
  c.argmax.assign(sections.size(), {});
  c.in1.assign(sections.size(), Vec());
  c.hidden.assign(sections.size(), Vec());
  Vec avg = Vec::Zero(static_cast<Eigen::Index>(cfg_.d_rel));
  for (std::size_t s = 0; s < sections.size(); ++s) {
    Vec& in1 = c.in1[s];
    in1.resize(section_net.in_dim());
    for (std::size_t k = 0; k < 4; ++k) {
      const auto& spans = sections[s][k];
      if (spans.empty()) throw UsageError("score_relation: section lacks an entity");
      auto& arg = c.argmax[s][k];
      arg.assign(static_cast<std::size_t>(ds), 0);
      for (Eigen::Index d = 0; d < ds; ++d) {
        double best = (*spans[0])(d);
        for (std::size_t m = 1; m < spans.size(); ++m)
          if ((*spans[m])(d) > best) {
            best = (*spans[m])(d);
            arg[static_cast<std::size_t>(d)] = m;
          }
        in1(static_cast<Eigen::Index>(k) * ds + d) = best;
      }
    }
    if (cfg_.fusion == Fusion::stage1)
      for (std::size_t i = 0; i < graph.size(); ++i) in1(4 * ds + static_cast<Eigen::Index>(i)) = graph[i];
    c.hidden[s] = nn::tanh(section_net.forward(in1));
    avg += c.hidden[s];
  }
  avg /= static_cast<double>(sections.size());
  c.in2.resize(final_net.in_dim());
  c.in2.head(avg.size()) = avg;
  if (cfg_.fusion == Fusion::stage2)
    for (std::size_t i = 0; i < graph.size(); ++i) c.in2(avg.size() + static_cast<Eigen::Index>(i)) = graph[i];
  c.logit = final_net.forward(c.in2)(0);
  return c.logit;
}

std::map<const Vec*, Vec> RelationScorer::backward(const Cache& c, double d_logit) {
  const auto ds = static_cast<Eigen::Index>(cfg_.d_span);
  std::map<const Vec*, Vec> grads;
  Vec d_in2 = final_net.backward(c.in2, Vec::Constant(1, d_logit));
  Vec d_avg = d_in2.head(static_cast<Eigen::Index>(cfg_.d_rel));
  const double inv = 1.0 / static_cast<double>(c.sections.size());
  for (std::size_t s = 0; s < c.sections.size(); ++s) {
    Vec d_pre = ((inv * d_avg).array() * (1.0 - c.hidden[s].array().square())).matrix();
    Vec d_in1 = section_net.backward(c.in1[s], d_pre);
    for (std::size_t k = 0; k < 4; ++k) {
      for (Eigen::Index d = 0; d < ds; ++d) {
        const Vec* src = c.sections[s][k][c.argmax[s][k][static_cast<std::size_t>(d)]];
        auto [it, fresh] = grads.try_emplace(src);
        if (fresh) it->second = Vec::Zero(ds);
        it->second(d) += d_in1(static_cast<Eigen::Index>(k) * ds + d);
      }
    }
  }
  return grads;
}

EntityType cluster_type(const Clusters& clusters, std::span<const Mention> mentions,
                        const ClusterId& id) {
  auto it = clusters.find(id);
  if (it == clusters.end() || it->second.empty())
    throw ValidationError("cluster '" + id + "' has no mentions");
  return mentions[it->second.front()].type;
}

RelationSections relation_sections(const Relation4& cand, const Document& doc,
                                   std::span<const Mention> mentions, const Clusters& clusters,
                                   std::span<const Vec> span_vecs) {
  std::map<std::size_t, SectionSpans> by_section;
  SectionSpans whole;
  for (std::size_t k = 0; k < 4; ++k) {
    const ClusterId& id = cand.cluster(kEntityTypes[k]);
    auto it = clusters.find(id);
    if (it == clusters.end() || it->second.empty())
      throw ValidationError("relation candidate references cluster '" + id + "' without mentions");
    for (std::size_t idx : it->second) {
      const Vec* v = &span_vecs[idx];
      by_section[doc.section_of(mentions[idx].start)][k].push_back(v);
      whole[k].push_back(v);
    }
  }
  RelationSections out;
  for (auto& [sec, spans] : by_section) {
    bool all = std::all_of(spans.begin(), spans.end(), [](const auto& v) { return !v.empty(); });
    if (all) out.sections.push_back(std::move(spans));
  }
  if (out.sections.empty()) {
    out.sections.push_back(std::move(whole));
    out.fallback = true;
  }
  return out;
}

std::vector<Relation4> relation_candidates(
    const std::map<EntityType, std::vector<ClusterId>>& salient_by_type, std::size_t cap) {
  std::array<std::vector<ClusterId>, 4> lists;
  for (std::size_t k = 0; k < 4; ++k) {
    if (auto it = salient_by_type.find(kEntityTypes[k]); it != salient_by_type.end()) lists[k] = it->second;
    std::sort(lists[k].begin(), lists[k].end());
    lists[k].erase(std::unique(lists[k].begin(), lists[k].end()), lists[k].end());
  }
  std::vector<Relation4> out;
  std::size_t total = 1;
  for (const auto& l : lists) total *= l.size();
  for (const auto& t : lists[0])
    for (const auto& d : lists[1])
      for (const auto& m : lists[2])
        for (const auto& r : lists[3]) {
          if (out.size() >= cap) goto done;
          out.push_back({t, d, m, r});
        }
done:
  if (total > cap)
    log::warn("relation candidates truncated from " + std::to_string(total) + " to " + std::to_string(cap));
  return out;
}

// ---------------------------------------------------------------------------

Clusters surface_coref(std::span<const Mention> mentions, const Document& doc) {
  Clusters out;
  for (std::size_t i = 0; i < mentions.size(); ++i) {
    std::string key = std::string(to_string(mentions[i].type)) + ":" + casefold(doc.surface(mentions[i]));
    out[key].push_back(i);
  }
  return out;
}

Clusters gold_coref(std::span<const Mention>, const Document& doc) { return doc.clusters; }

// ---------------------------------------------------------------------------

namespace {

Rng model_rng(const ModelConfig& cfg) { return stream(cfg.seed, fnv1a(to_string(cfg.task))); }

}  // namespace

MentionModel::MentionModel(const ModelConfig& cfg, Vocab vocab) : cfg_(cfg) {
  Rng rng = model_rng(cfg);
  encoder_ = TokenEncoder(std::move(vocab), cfg.encoder, rng);
  emit1 = nn::Linear("mention.emit1", static_cast<Eigen::Index>(cfg.encoder.d_ctx),
                     static_cast<Eigen::Index>(cfg.hidden), rng);
  emit2 = nn::Linear("mention.emit2", static_cast<Eigen::Index>(cfg.hidden),
                     static_cast<Eigen::Index>(kNumTags), rng);
  crf_ = Crf(rng);
}

nn::ParamList MentionModel::params() {
  nn::ParamList out;
  encoder_.collect(out);
  emit1.collect(out);
  emit2.collect(out);
  crf_.collect(out);
  return out;
}

std::vector<Mat> MentionModel::emissions(const Document& doc) const {
  Mat H = encoder_.encode(doc);
  auto off = doc.section_offsets();
  std::vector<Mat> out;
  for (std::size_t s = 0; s < doc.sections.size(); ++s) {
    auto len = static_cast<Eigen::Index>(off[s + 1] - off[s]);
    if (len == 0) {
      out.emplace_back(static_cast<Eigen::Index>(kNumTags), 0);
      continue;
    }
    Mat h = nn::tanh(emit1.forward_cols(H.middleCols(static_cast<Eigen::Index>(off[s]), len)));
    out.push_back(emit2.forward_cols(h));
  }
  return out;
}

std::vector<TagSequence> MentionModel::tag(const Document& doc) const {
  auto em = emissions(doc);
  std::vector<TagSequence> out(doc.sections.size());
  for (std::size_t s = 0; s < doc.sections.size(); ++s) {
    if (doc.sections[s].kind == SectionKind::citance)
      out[s].assign(doc.sections[s].tokens.size(), kOutside);
    else
      out[s] = crf_.viterbi(em[s]);
  }
  return out;
}

std::vector<Mention> MentionModel::predict(const Document& doc) const {
  auto tags = tag(doc);
  std::vector<SectionKind> kinds;
  for (const auto& s : doc.sections) kinds.push_back(s.kind);
  return decode_iobes(tags, kinds);
}

double MentionModel::loss(const Document& doc, bool backprop) {
  TokenEncoder::Cache cache;
  Mat H = encoder_.encode(doc, &cache);
  auto gold = encode_iobes(doc);
  auto off = doc.section_offsets();
  Mat dH = Mat::Zero(H.rows(), H.cols());
  double nll = 0;
  std::size_t tokens = 0;
  for (std::size_t s = 0; s < doc.sections.size(); ++s)
    if (doc.sections[s].kind == SectionKind::body) tokens += doc.sections[s].tokens.size();
  if (tokens == 0) return 0.0;
  const double scale = 1.0 / static_cast<double>(tokens);
  for (std::size_t s = 0; s < doc.sections.size(); ++s) {
    if (doc.sections[s].kind != SectionKind::body) continue;
    auto len = static_cast<Eigen::Index>(off[s + 1] - off[s]);
    if (len == 0) continue;
    Mat Hs = H.middleCols(static_cast<Eigen::Index>(off[s]), len);
    Mat h = nn::tanh(emit1.forward_cols(Hs));
    Mat em = emit2.forward_cols(h);
    nll -= crf_.log_likelihood(em, gold[s]);
    if (backprop) {
      CrfGrad g = crf_.nll_grad(em, gold[s]);
      g.emissions *= scale;
      g.transitions *= scale;
      g.start *= scale;
      g.end *= scale;
      crf_.accumulate(g);
      Mat dh = emit2.backward_cols(h, g.emissions);
      dH.middleCols(static_cast<Eigen::Index>(off[s]), len) += emit1.backward_cols(Hs, nn::tanh_grad(h, dh));
    }
  }
  if (backprop) encoder_.backward(cache, dH);
  return nll * scale;
}

// ---------------------------------------------------------------------------

SaliencyModel::SaliencyModel(const ModelConfig& cfg, Vocab vocab) : cfg_(cfg) {
  Rng rng = model_rng(cfg);
  encoder_ = TokenEncoder(std::move(vocab), cfg.encoder, rng);
  attention_ = SpanAttention(cfg.encoder.d_ctx, cfg.d_span, rng);
  classifier_ = SaliencyClassifier({cfg.d_span, cfg.hidden, cfg.graph_dim, cfg.fusion, cfg.use_tfidf}, rng);
}

nn::ParamList SaliencyModel::params() {
  nn::ParamList out;
  encoder_.collect(out);
  attention_.collect(out);
  classifier_.collect(out);
  return out;
}

double SaliencyModel::span_tfidf(const DocInput& in, const Mention& m) const {
  if (!cfg_.use_tfidf || in.tfidf.empty()) return 0.0;
  double s = 0;
  for (std::size_t i = m.start; i < m.end; ++i) s += in.tfidf.at(i);
  return s / static_cast<double>(m.length());
}

std::vector<double> SaliencyModel::mention_probs(const DocInput& in,
                                                 std::span<const Mention> mentions) const {
  std::vector<double> out;
  if (mentions.empty()) return out;
  Mat H = encoder_.encode(*in.doc);
  auto graph = graph_input(in.graph, cfg_.graph_dim);
  for (const Mention& m : mentions)
    out.push_back(classifier_.probability(attention_.forward(H, m.start, m.end), graph, span_tfidf(in, m)));
  return out;
}

double SaliencyModel::loss(const DocInput& in, std::span<const Mention> mentions,
                           std::span<const double> labels, bool backprop) {
  if (mentions.empty()) return 0.0;
  TokenEncoder::Cache cache;
  Mat H = encoder_.encode(*in.doc, &cache);
  Mat dH = Mat::Zero(H.rows(), H.cols());
  auto graph = graph_input(in.graph, cfg_.graph_dim);
  const double scale = 1.0 / static_cast<double>(mentions.size());
  double total = 0;
  for (std::size_t i = 0; i < mentions.size(); ++i) {
    SpanAttention::Cache ac;
    SaliencyClassifier::Cache cc;
    Vec span = attention_.forward(H, mentions[i].start, mentions[i].end, &ac);
    double z = classifier_.logit(span, graph, span_tfidf(in, mentions[i]), &cc);
    total += nn::bce_with_logit(z, labels[i]);
    if (backprop) {
      Vec d_span = classifier_.backward(cc, scale * nn::bce_grad(z, labels[i]));
      attention_.backward(H, ac, d_span, dH);
    }
  }
  if (backprop) encoder_.backward(cache, dH);
  return total * scale;
}

// ---------------------------------------------------------------------------

RelationModel::RelationModel(const ModelConfig& cfg, Vocab vocab) : cfg_(cfg) {
  Rng rng = model_rng(cfg);
  encoder_ = TokenEncoder(std::move(vocab), cfg.encoder, rng);
  attention_ = SpanAttention(cfg.encoder.d_ctx, cfg.d_span, rng);
  scorer_ = RelationScorer({cfg.d_span, cfg.d_rel, cfg.graph_dim, cfg.fusion}, rng);
}

nn::ParamList RelationModel::params() {
  nn::ParamList out;
  encoder_.collect(out);
  attention_.collect(out);
  scorer_.collect(out);
  return out;
}

std::vector<double> RelationModel::score(const DocInput& in, std::span<const Mention> mentions,
                                         const Clusters& clusters, std::span<const Relation4> candidates,
                                         std::vector<bool>* fallback_flags) const {
  std::vector<double> out;
  if (fallback_flags) fallback_flags->clear();
  if (candidates.empty()) return out;
  Mat H = encoder_.encode(*in.doc);
  std::vector<Vec> spans;
  spans.reserve(mentions.size());
  for (const Mention& m : mentions) spans.push_back(attention_.forward(H, m.start, m.end));
  auto graph = graph_input(in.graph, cfg_.graph_dim);
  for (const auto& cand : candidates) {
    auto rs = relation_sections(cand, *in.doc, mentions, clusters, spans);
    if (fallback_flags) fallback_flags->push_back(rs.fallback);
    out.push_back(nn::sigmoid(scorer_.logit(rs.sections, graph)));
  }
  return out;
}

double RelationModel::loss(const DocInput& in, std::span<const Mention> mentions, const Clusters& clusters,
                           std::span<const Relation4> candidates, std::span<const double> labels,
                           bool backprop) {
  if (candidates.empty()) return 0.0;
  TokenEncoder::Cache cache;
  Mat H = encoder_.encode(*in.doc, &cache);
  std::vector<Vec> spans(mentions.size());
  std::vector<SpanAttention::Cache> caches(mentions.size());
  for (std::size_t i = 0; i < mentions.size(); ++i)
    spans[i] = attention_.forward(H, mentions[i].start, mentions[i].end, &caches[i]);
  auto graph = graph_input(in.graph, cfg_.graph_dim);
  const double scale = 1.0 / static_cast<double>(candidates.size());
  std::vector<Vec> d_spans(mentions.size());
  double total = 0;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    auto rs = relation_sections(candidates[c], *in.doc, mentions, clusters, spans);
    RelationScorer::Cache sc;
    double z = scorer_.logit(rs.sections, graph, &sc);
    total += nn::bce_with_logit(z, labels[c]);
    if (backprop) {
      for (auto& [ptr, g] : scorer_.backward(sc, scale * nn::bce_grad(z, labels[c]))) {
        auto idx = static_cast<std::size_t>(ptr - spans.data());
        if (d_spans[idx].size() == 0) d_spans[idx] = Vec::Zero(g.size());
        d_spans[idx] += g;
      }
    }
  }
  if (backprop) {
    Mat dH = Mat::Zero(H.rows(), H.cols());
    for (std::size_t i = 0; i < mentions.size(); ++i)
      if (d_spans[i].size() > 0) attention_.backward(H, caches[i], d_spans[i], dH);
    encoder_.backward(cache, dH);
  }
  return total * scale;
}

}  // namespace citeie
