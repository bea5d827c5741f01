#include "citeie/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "citeie/errors.hpp"
#include "citeie/evaluation.hpp"
#include "citeie/log.hpp"

namespace citeie {

std::vector<double> default_threshold_grid() {
  std::vector<double> g;
  for (int k = 1; k <= 19; ++k) g.push_back(0.05 * k);
  return g;
}

ThresholdChoice select_threshold(std::span<const double> probs, std::span<const double> labels,
                                 const std::vector<double>& grid) {
  if (probs.size() != labels.size()) throw UsageError("select_threshold: size mismatch");
  if (grid.empty()) throw UsageError("select_threshold: empty grid");
  ThresholdChoice best{grid.front(), -1.0};
  for (double theta : grid) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      bool pred = probs[i] >= theta, gold = labels[i] > 0.5;
      if (pred && gold) ++tp;
      else if (pred) ++fp;
      else if (gold) ++fn;
    }
    // exact ratio so equal F1 values compare equal
    double f1 = tp == 0 ? 0.0 : 2.0 * double(tp) / double(2 * tp + fp + fn);
    if (f1 > best.f1) best = {theta, f1};
  }
  return best;
}

double validation_score(double loss, double f1) { return f1 * std::exp(-loss); }

bool EarlyStopping::update(double score) {
  ++epochs_;
  if (score > best_) {
    best_ = score;
    best_epoch_ = epochs_ - 1;
    return true;
  }
  return false;
}

TrainHistory fit(nn::ParamList params, std::size_t n_train, const ExampleLoss& example_loss,
                 const Evaluate& evaluate, const TrainConfig& cfg) {
  if (n_train == 0) throw UsageError("training split has no usable examples");
  if (cfg.batch_size == 0) throw UsageError("batch_size must be positive");
  TrainHistory hist;
  EarlyStopping stop(cfg.patience);
  std::vector<nn::Mat> best = nn::snapshot(params);
  nn::zero_grads(params);
  std::vector<std::size_t> order(n_train);

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = stream(cfg.seed, 0x7a11, epoch);
    shuffle(order, rng);
    double total = 0;
    for (std::size_t b = 0; b < n_train; b += cfg.batch_size) {
      std::size_t e = std::min(n_train, b + cfg.batch_size);
      for (std::size_t k = b; k < e; ++k) total += example_loss(order[k], epoch, true);
      const double inv = 1.0 / static_cast<double>(e - b);
      for (nn::Param* p : params) p->grad *= inv;
      if (!std::isfinite(total) || !std::isfinite(nn::global_grad_norm(params)))
        throw NumericalError("training loss became non-finite at epoch " + std::to_string(epoch) +
                             " (try a smaller learning rate)");
      nn::sgd_step(params, cfg.lr, cfg.clip_norm);
    }
    if (!nn::all_finite(params)) throw NumericalError("parameters became non-finite at epoch " + std::to_string(epoch));

    EpochRecord rec;
    rec.train_loss = total / static_cast<double>(n_train);
    std::tie(rec.val_loss, rec.val_f1) = evaluate();
    if (!std::isfinite(rec.val_loss)) throw NumericalError("validation loss is non-finite");
    rec.score = validation_score(rec.val_loss, rec.val_f1);
    hist.epochs.push_back(rec);
    log::info("epoch " + std::to_string(epoch) + " train_loss=" + std::to_string(rec.train_loss) +
              " val_loss=" + std::to_string(rec.val_loss) + " val_f1=" + std::to_string(rec.val_f1));
    if (stop.update(rec.score)) best = nn::snapshot(params);
    if (stop.should_stop()) {
      hist.stopped_early = epoch + 1 < cfg.max_epochs;
      break;
    }
  }
  nn::restore(params, best);
  hist.best_epoch = stop.best_epoch();
  return hist;
}

// ---------------------------------------------------------------------------

std::vector<double> saliency_labels(const Document& doc) {
  std::vector<double> labels(doc.mentions.size(), 0.0);
  for (const auto& [id, members] : doc.clusters)
    if (doc.salient.count(id))
      for (std::size_t i : members) labels[i] = 1.0;
  return labels;
}

namespace {

std::map<EntityType, std::vector<ClusterId>> salient_by_type(const Document& doc) {
  std::map<EntityType, std::vector<ClusterId>> out;
  for (const auto& id : doc.salient)
    out[cluster_type(doc.clusters, doc.mentions, id)].push_back(id);
  return out;
}

void require_nonempty(std::span<const DocInput> split, const char* name) {
  if (split.empty()) throw UsageError(std::string(name) + " split is empty");
}

}  // namespace

std::vector<Relation4> relation_negatives(const Document& doc) {
  std::set<Relation4> gold(doc.relations.begin(), doc.relations.end());
  std::vector<Relation4> out;
  for (auto& r : relation_candidates(salient_by_type(doc)))
    if (!gold.count(r)) out.push_back(r);
  return out;
}

RelationBatch relation_training_candidates(const Document& doc, std::size_t neg_ratio, Rng& rng) {
  RelationBatch batch;
  std::set<Relation4> pos(doc.relations.begin(), doc.relations.end());
  for (const auto& r : pos) {
    batch.candidates.push_back(r);
    batch.labels.push_back(1.0);
  }
  auto neg = relation_negatives(doc);
  std::size_t k = std::min(neg.size(), neg_ratio * std::max<std::size_t>(1, pos.size()));
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + uniform_index(rng, neg.size() - i);
    std::swap(neg[i], neg[j]);
    batch.candidates.push_back(neg[i]);
    batch.labels.push_back(0.0);
  }
  return batch;
}

RelationBatch relation_eval_candidates(const Document& doc) {
  RelationBatch batch;
  std::set<Relation4> gold(doc.relations.begin(), doc.relations.end());
  batch.candidates = relation_candidates(salient_by_type(doc));
  for (const auto& r : batch.candidates) batch.labels.push_back(gold.count(r) ? 1.0 : 0.0);
  return batch;
}

// ---------------------------------------------------------------------------

TrainHistory train_mention(MentionModel& model, std::span<const DocInput> train,
                           std::span<const DocInput> val, const TrainConfig& cfg) {
  require_nonempty(train, "training");
  require_nonempty(val, "validation");
  auto loss = [&](std::size_t i, std::size_t, bool backprop) { return model.loss(*train[i].doc, backprop); };
  auto evaluate = [&]() {
    double total = 0;
    DocMentions pred, gold;
    for (const auto& in : val) {
      total += model.loss(*in.doc, false);
      pred[in.doc->doc_id] = model.predict(*in.doc);
      gold[in.doc->doc_id] = in.doc->mentions;
    }
    return std::pair{total / static_cast<double>(val.size()), mention_f1(pred, gold).macro.f1};
  };
  return fit(model.params(), train.size(), loss, evaluate, cfg);
}

TrainHistory train_saliency(SaliencyModel& model, std::span<const DocInput> train,
                            std::span<const DocInput> val, const TrainConfig& cfg) {
  require_nonempty(train, "training");
  require_nonempty(val, "validation");
  std::vector<std::size_t> usable;
  std::vector<std::vector<double>> labels(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    labels[i] = saliency_labels(*train[i].doc);
    if (!train[i].doc->mentions.empty()) usable.push_back(i);
  }
  auto val_probs = [&](std::vector<double>& probs, std::vector<double>& gold) {
    for (const auto& in : val) {
      auto p = model.mention_probs(in, in.doc->mentions);
      auto g = saliency_labels(*in.doc);
      probs.insert(probs.end(), p.begin(), p.end());
      gold.insert(gold.end(), g.begin(), g.end());
    }
  };
  auto loss = [&](std::size_t k, std::size_t, bool backprop) {
    std::size_t i = usable[k];
    return model.loss(train[i], train[i].doc->mentions, labels[i], backprop);
  };
  auto evaluate = [&]() {
    std::vector<double> probs, gold;
    val_probs(probs, gold);
    double total = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      double p = std::clamp(probs[i], 1e-12, 1 - 1e-12);
      total -= gold[i] > 0.5 ? std::log(p) : std::log1p(-p);
    }
    double mean = probs.empty() ? 0.0 : total / static_cast<double>(probs.size());
    return std::pair{mean, select_threshold(probs, gold).f1};
  };
  TrainHistory hist = fit(model.params(), usable.size(), loss, evaluate, cfg);
  std::vector<double> probs, gold;
  val_probs(probs, gold);
  hist.threshold = select_threshold(probs, gold);
  model.set_threshold(hist.threshold.theta);
  return hist;
}

TrainHistory train_relation(RelationModel& model, std::span<const DocInput> train,
                            std::span<const DocInput> val, const TrainConfig& cfg) {
  require_nonempty(train, "training");
  require_nonempty(val, "validation");
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < train.size(); ++i)
    if (!relation_eval_candidates(*train[i].doc).candidates.empty()) usable.push_back(i);
  std::vector<RelationBatch> val_sets;
  for (const auto& in : val) val_sets.push_back(relation_eval_candidates(*in.doc));

  auto val_probs = [&](std::vector<double>& probs, std::vector<double>& gold) {
    for (std::size_t v = 0; v < val.size(); ++v) {
      auto p = model.score(val[v], val[v].doc->mentions, val[v].doc->clusters, val_sets[v].candidates);
      probs.insert(probs.end(), p.begin(), p.end());
      gold.insert(gold.end(), val_sets[v].labels.begin(), val_sets[v].labels.end());
    }
  };
  auto loss = [&](std::size_t k, std::size_t epoch, bool backprop) {
    const DocInput& in = train[usable[k]];
    Rng rng = stream(cfg.seed, fnv1a(in.doc->doc_id), epoch);
    auto batch = relation_training_candidates(*in.doc, cfg.neg_ratio, rng);
    return model.loss(in, in.doc->mentions, in.doc->clusters, batch.candidates, batch.labels, backprop);
  };
  auto evaluate = [&]() {
    std::vector<double> probs, gold;
    val_probs(probs, gold);
    double total = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      double p = std::clamp(probs[i], 1e-12, 1 - 1e-12);
      total -= gold[i] > 0.5 ? std::log(p) : std::log1p(-p);
    }
    double mean = probs.empty() ? 0.0 : total / static_cast<double>(probs.size());
    return std::pair{mean, select_threshold(probs, gold).f1};
  };
  TrainHistory hist = fit(model.params(), usable.size(), loss, evaluate, cfg);
  std::vector<double> probs, gold;
  val_probs(probs, gold);
  hist.threshold = select_threshold(probs, gold);
  model.set_threshold(hist.threshold.theta);
  return hist;
}

}  // namespace citeie
