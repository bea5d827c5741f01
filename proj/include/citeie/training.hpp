#pragma once

// Per-task training on gold inputs: minibatch SGD with clipping, early
// stopping on a validation score, and threshold selection on a grid.

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "citeie/ie_models.hpp"

namespace citeie {

struct TrainConfig {
  std::size_t max_epochs = 20;
  std::size_t patience = 10;
  std::size_t batch_size = 4;
  double lr = 0.1;
  double clip_norm = 5.0;
  std::size_t neg_ratio = 5;  // relation negatives per positive
  std::uint64_t seed = 133;
};

// 0.05, 0.10, ..., 0.95.
std::vector<double> default_threshold_grid();

// Highest F1 of (p >= theta) against labels; ties go to the smaller theta.
struct ThresholdChoice {
  double theta = 0.5;
  double f1 = 0;
};
ThresholdChoice select_threshold(std::span<const double> probs, std::span<const double> labels,
                                 const std::vector<double>& grid = default_threshold_grid());

// F1 scaled by exp(-loss): grows with F1 and shrinks with the loss.
double validation_score(double loss, double f1);

class EarlyStopping {
public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  // Records one epoch; returns true when it is a new best (strictly greater).
  bool update(double score);
  bool should_stop() const { return epochs_ > 0 && epochs_ - 1 - best_epoch_ >= patience_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best_score() const { return best_; }
  std::size_t epochs() const { return epochs_; }

private:
  std::size_t patience_;
  std::size_t epochs_ = 0;
  std::size_t best_epoch_ = 0;
  double best_ = -std::numeric_limits<double>::infinity();
};

struct EpochRecord {
  double train_loss = 0;
  double val_loss = 0;
  double val_f1 = 0;
  double score = 0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
  ThresholdChoice threshold;
};

// Generic loop. `example_loss(i, epoch, backprop)` returns the loss of
// training example i; `evaluate()` returns (validation loss, validation F1). The best
// epoch's parameters are restored at the end.
using ExampleLoss = std::function<double(std::size_t, std::size_t, bool)>;
using Evaluate = std::function<std::pair<double, double>()>;
TrainHistory fit(nn::ParamList params, std::size_t n_train, const ExampleLoss& example_loss,
                 const Evaluate& evaluate, const TrainConfig& cfg);

// Gold saliency labels: 1 for mentions in salient clusters.
std::vector<double> saliency_labels(const Document& doc);

// Gold-typed candidate tuples over salient clusters, minus the gold relations.
std::vector<Relation4> relation_negatives(const Document& doc);

// Gold relations plus up to neg_ratio sampled negatives per positive
// (at least one negative when the document has no positives). Labels align.
struct RelationBatch {
  std::vector<Relation4> candidates;
  std::vector<double> labels;
};
RelationBatch relation_training_candidates(const Document& doc, std::size_t neg_ratio, Rng& rng);
// Full candidate set over gold salient clusters, labelled by gold.
RelationBatch relation_eval_candidates(const Document& doc);

// Throw UsageError on an empty split and NumericalError on a non-finite loss.
TrainHistory train_mention(MentionModel& model, std::span<const DocInput> train,
                           std::span<const DocInput> val, const TrainConfig& cfg);
TrainHistory train_saliency(SaliencyModel& model, std::span<const DocInput> train,
                            std::span<const DocInput> val, const TrainConfig& cfg);
TrainHistory train_relation(RelationModel& model, std::span<const DocInput> train,
                            std::span<const DocInput> val, const TrainConfig& cfg);

}  // namespace citeie
