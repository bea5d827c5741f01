#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "citeie/errors.hpp"
#include "citeie/pipeline.hpp"
#include "citeie/training.hpp"
#include "support.hpp"

using namespace citeie;
using fixture::body;
using fixture::make_doc;

namespace {

double brute_best_f1(const std::vector<double>& p, const std::vector<double>& y, double theta) {
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    bool pr = p[i] >= theta, g = y[i] > 0.5;
    tp += pr && g;
    fp += pr && !g;
    fn += !pr && g;
  }
  return tp == 0 ? 0 : 2 * tp / (2 * tp + fp + fn);
}

// Saliency decided by the mention token alone: "key*" words are salient,
// "aux*" words are not.
std::vector<Document> separable_docs(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Document> out;
  for (std::size_t d = 0; d < n; ++d) {
    std::vector<std::string> toks;
    for (int i = 0; i < 16; ++i) toks.push_back("f" + std::to_string(uniform_index(rng, 8)));
    Document doc;
    doc.doc_id = "s" + std::to_string(d);
    for (std::size_t m = 0; m < 4; ++m) {
      bool sal = (m + d) % 2 == 0;
      std::size_t pos = 4 * m + 1;
      toks[pos] = (sal ? "key" : "aux") + std::to_string(uniform_index(rng, 3));
      ClusterId id = "c" + std::to_string(m);
      doc.clusters[id] = {m};
      doc.mentions.push_back({pos, pos + 1, kEntityTypes[m]});
      if (sal) doc.salient.insert(id);
    }
    doc.sections.push_back({toks, SectionKind::body, std::nullopt});
    out.push_back(doc);
  }
  return out;
}

ModelConfig small(Task t) {
  ModelConfig c;
  c.task = t;
  c.encoder = {16, 16, 512};
  c.hidden = 16;
  c.d_span = 16;
  c.d_rel = 16;
  return c;
}

std::vector<DocInput> inputs(const std::vector<Document>& docs) {
  std::vector<DocInput> out;
  for (const auto& d : docs) out.push_back({&d, {}, {}});
  return out;
}

}  // namespace

TEST(Threshold, GridIsFivePercentSteps) {
  auto g = default_threshold_grid();
  ASSERT_EQ(g.size(), 19u);
  EXPECT_NEAR(g.front(), 0.05, 1e-12);
  EXPECT_NEAR(g.back(), 0.95, 1e-12);
}

TEST(Threshold, ArgmaxOverGridLowestOnTies) {
  Rng rng(3);
  auto grid = default_threshold_grid();
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> p, y;
    for (std::size_t i = 0, n = 1 + uniform_index(rng, 30); i < n; ++i) {
      p.push_back(uniform01(rng));
      y.push_back(static_cast<double>(uniform_index(rng, 2)));
    }
    auto choice = select_threshold(p, y);
    double best = -1, theta = 0;
    for (double t : grid) {
      double f = brute_best_f1(p, y, t);
      if (f > best) {
        best = f;
        theta = t;
      }
    }
    EXPECT_NEAR(choice.f1, best, 1e-12);
    EXPECT_EQ(choice.theta, theta);
  }
}

TEST(ValidationScore, GrowsWithF1ShrinksWithLoss) {
  EXPECT_GT(validation_score(0.5, 0.8), validation_score(0.5, 0.7));
  EXPECT_GT(validation_score(0.4, 0.8), validation_score(0.5, 0.8));
  EXPECT_EQ(validation_score(0.0, 1.0), 1.0);
}

TEST(EarlyStop, FlatMetricHaltsAfterPatience) {
  EarlyStopping es(10);
  EXPECT_TRUE(es.update(0.5));
  for (int i = 0; i < 9; ++i) {
    EXPECT_FALSE(es.update(0.5));
    EXPECT_FALSE(es.should_stop());
  }
  EXPECT_FALSE(es.update(0.5));
  EXPECT_TRUE(es.should_stop());
  EXPECT_EQ(es.best_epoch(), 0u);
}

TEST(Fit, FlatValidationStopsAtEleven) {
  nn::Param p("w", 1, 1);
  TrainConfig cfg;
  auto h = fit({&p}, 4, [&](std::size_t, std::size_t, bool) { return 1.0; },
               [] { return std::make_pair(0.1, 0.5); }, cfg);
  EXPECT_EQ(h.epochs.size(), 11u);
  EXPECT_TRUE(h.stopped_early);
  EXPECT_EQ(h.best_epoch, 0u);
}

TEST(Fit, RestoresBestEpoch) {
  nn::Param p("w", 1, 1);
  TrainConfig cfg;
  cfg.max_epochs = 6;
  cfg.lr = 1.0;
  cfg.batch_size = 1;
  std::vector<double> seen;
  int epoch_calls = 0;
  // constant gradient 1 per example: w decreases by 1 per step
  auto loss = [&](std::size_t, std::size_t, bool backprop) {
    if (backprop) p.grad(0, 0) += 1.0;
    return 0.0;
  };
  auto eval = [&] {
    seen.push_back(p.value(0, 0));
    ++epoch_calls;
    return std::make_pair(0.0, epoch_calls == 3 ? 1.0 : 0.1);
  };
  auto h = fit({&p}, 2, loss, eval, cfg);
  EXPECT_EQ(h.best_epoch, 2u);
  EXPECT_EQ(p.value(0, 0), seen[2]);
  EXPECT_EQ(seen[2], -6.0);
}

TEST(Fit, NonFiniteLossAborts) {
  nn::Param p("w", 1, 1);
  auto nan_loss = [](std::size_t, std::size_t, bool) { return std::numeric_limits<double>::quiet_NaN(); };
  EXPECT_THROW(fit({&p}, 3, nan_loss, [] { return std::make_pair(0.0, 0.0); }, TrainConfig{}), NumericalError);
}

TEST(Fit, ClipsGlobalNorm) {
  nn::Param p("w", 2, 1);
  TrainConfig cfg;
  cfg.max_epochs = 1;
  cfg.batch_size = 1;
  cfg.lr = 1.0;
  auto loss = [&](std::size_t, std::size_t, bool) {
    p.grad(0, 0) += 30.0;
    p.grad(1, 0) += 40.0;
    return 0.0;
  };
  fit({&p}, 1, loss, [] { return std::make_pair(0.0, 1.0); }, cfg);
  EXPECT_NEAR(p.value(0, 0), -3.0, 1e-12);
  EXPECT_NEAR(p.value(1, 0), -4.0, 1e-12);
}

TEST(Train, EmptySplitIsUsageError) {
  auto docs = separable_docs(2, 1);
  SaliencyModel m(small(Task::saliency), Vocab::build(docs));
  auto in = inputs(docs);
  EXPECT_THROW(train_saliency(m, {}, in, TrainConfig{}), UsageError);
  EXPECT_THROW(train_saliency(m, in, {}, TrainConfig{}), UsageError);
}

TEST(Train, SeparableSaliencyReachesHighF1) {
  auto docs = separable_docs(20, 5);
  auto val_docs = separable_docs(6, 6);
  std::vector<Document> all = docs;
  all.insert(all.end(), val_docs.begin(), val_docs.end());
  SaliencyModel m(small(Task::saliency), Vocab::build(all));
  auto tr = inputs(docs), va = inputs(val_docs);
  auto h = train_saliency(m, tr, va, TrainConfig{});
  EXPECT_LE(h.epochs.size(), 20u);
  auto prf = saliency_mention_prf(m, tr);
  EXPECT_GE(prf.f1, 0.95);
  EXPECT_GT(m.threshold(), 0.0);
  EXPECT_LT(m.threshold(), 1.0);
}

TEST(Train, MentionLossDecreases) {
  auto docs = load_corpus(std::string(CITEIE_TEST_DATA) + "/five_docs.jsonl");
  MentionModel m(small(Task::mention), Vocab::build(docs));
  auto in = inputs(docs);
  TrainConfig cfg;
  cfg.max_epochs = 8;
  auto h = train_mention(m, in, in, cfg);
  EXPECT_LT(h.epochs.back().train_loss, h.epochs.front().train_loss);
}

TEST(Train, Deterministic) {
  auto docs = separable_docs(8, 2);
  auto run = [&] {
    SaliencyModel m(small(Task::saliency), Vocab::build(docs));
    auto in = inputs(docs);
    TrainConfig cfg;
    cfg.max_epochs = 3;
    auto h = train_saliency(m, in, in, cfg);
    return std::make_pair(h.epochs.back().train_loss, m.mention_probs(in[0], docs[0].mentions));
  };
  EXPECT_EQ(run(), run());
}

TEST(RelationSampling, NegativesAndRatio) {
  // two tasks, one of everything else: one gold relation, one negative
  auto d = make_doc("r", {body("t1 t2 d m x")},
                    {{0, 1, EntityType::Task}, {1, 2, EntityType::Task}, {2, 3, EntityType::Dataset},
                     {3, 4, EntityType::Method}, {4, 5, EntityType::Metric}},
                    {{"T1", {0}}, {"T2", {1}}, {"D", {2}}, {"M", {3}}, {"X", {4}}}, {"T1", "T2", "D", "M", "X"},
                    {{"T1", "D", "M", "X"}});
  auto neg = relation_negatives(d);
  ASSERT_EQ(neg.size(), 1u);
  EXPECT_EQ(neg[0], (Relation4{"T2", "D", "M", "X"}));
  Rng rng(1);
  auto batch = relation_training_candidates(d, 5, rng);
  EXPECT_EQ(batch.candidates.size(), 2u);
  EXPECT_EQ(batch.labels, (std::vector<double>{1, 0}));
  auto eval = relation_eval_candidates(d);
  EXPECT_EQ(eval.candidates.size(), 2u);
}

TEST(RelationSampling, RatioCapsNegatives) {
  Document d;
  d.doc_id = "many";
  std::vector<std::string> toks;
  std::size_t pos = 0;
  for (EntityType t : kEntityTypes)
    for (int k = 0; k < 3; ++k) {
      ClusterId id = std::string(to_string(t)) + std::to_string(k);
      toks.push_back(id);
      d.clusters[id] = {d.mentions.size()};
      d.mentions.push_back({pos, pos + 1, t});
      d.salient.insert(id);
      ++pos;
    }
  d.sections.push_back({toks, SectionKind::body, std::nullopt});
  d.relations = {{"Task0", "Dataset0", "Method0", "Metric0"}};
  validate(d);
  EXPECT_EQ(relation_negatives(d).size(), 80u);  // 3^4 - 1
  Rng rng(2);
  auto b = relation_training_candidates(d, 5, rng);
  EXPECT_EQ(b.candidates.size(), 6u);
  std::set<Relation4> uniq(b.candidates.begin(), b.candidates.end());
  EXPECT_EQ(uniq.size(), 6u);
  // no positives: still at least ratio x 1 negatives
  d.relations.clear();
  auto none = relation_training_candidates(d, 5, rng);
  EXPECT_EQ(none.candidates.size(), 5u);
}

TEST(RelationSampling, CandidatesHaveRecallOneOnGoldSalient) {
  auto docs = load_corpus(std::string(CITEIE_TEST_DATA) + "/five_docs.jsonl");
  for (const auto& d : docs) {
    auto c = relation_eval_candidates(d);
    std::set<Relation4> s(c.candidates.begin(), c.candidates.end());
    for (const auto& r : d.relations) EXPECT_TRUE(s.count(r)) << d.doc_id;
  }
}
