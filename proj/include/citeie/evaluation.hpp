#pragma once

// Mention, saliency and relation metrics, bootstrap significance tests and
// bucketed breakdowns. Everything here is a pure function of predictions
// and gold annotations.

#include <atomic>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "citeie/citation_graph.hpp"
#include "citeie/corpus.hpp"
#include "citeie/errors.hpp"
#include "citeie/linkage.hpp"
#include "citeie/log.hpp"
#include "citeie/rng.hpp"
#include "json.hpp"

namespace citeie {

struct PRF {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::size_t tp = 0, fp = 0, fn = 0;

  std::size_t predicted() const { return tp + fp; }
  std::size_t gold() const { return tp + fn; }

  // Zero denominators give 0, except that with no gold and no predictions
  // `empty_is_perfect` scores (1, 1, 1).
  static PRF from_counts(std::size_t tp, std::size_t fp, std::size_t fn, bool empty_is_perfect = false);
};

double f1_of(double precision, double recall);

// --- mentions -------------------------------------------------------------------

using DocMentions = std::map<std::string, std::vector<Mention>>;

struct MentionReport {
  std::array<PRF, 4> per_type;  // indexed by EntityType
  PRF macro;  // P, R, F1 averaged over types present in gold or predictions; counts summed
};

// Exact span and type match, counted corpus-wide per type.
MentionReport mention_f1(const DocMentions& pred, const DocMentions& gold);

// --- relations ------------------------------------------------------------------

using DocRelations = std::map<std::string, std::set<Relation4>>;

// Per-document P/R/F1 on exact tuple matches (arity 4) or on the flattened
// binary pairs (arity 2), then unweighted means over the union of
// documents. A document with no gold and no predictions scores (1, 1, 1).
PRF doc_level_relation_metric(const DocRelations& pred, const DocRelations& gold, int arity);

struct Candidate {
  bool predicted = false;
  bool label = false;
};

struct ClassReport {
  PRF positive;
  PRF negative;
  double macro_precision = 0, macro_recall = 0, macro_f1 = 0;
};

// Pooled binary classification over every candidate, with the macro average
// of the positive- and negative-class scores. A class absent from both
// labels and predictions scores F1 = 1.
ClassReport corpus_level_relation_metric(std::span<const Candidate> candidates);

// Positive-class F1 of pooled candidates.
double binary_f1(std::span<const Candidate> candidates);

// Scored 4-ary candidates of one document with their decisions.
using ScoredCandidates = std::vector<std::pair<Relation4, bool>>;

// Candidates at arity 4 are the tuples themselves; at arity 2 each document's
// candidate pairs are the flattened tuples, predicted positive when some
// positive tuple contains them.
std::vector<Candidate> corpus_candidates(const std::map<std::string, ScoredCandidates>& scored,
                                         const DocRelations& gold, int arity);

// --- bootstrap ------------------------------------------------------------------

struct BootstrapOptions {
  std::size_t n_resamples = 10000;
  std::uint64_t seed = 0;
  bool two_sided = false;
  unsigned jobs = 1;
};

struct BootstrapResult {
  double p_value = 1.0;
  double metric_a = 0;  // on the full test set (mean over seeds when hierarchical)
  double metric_b = 0;
  std::size_t b_at_least_a = 0;  // resamples with metric(B) >= metric(A)
  std::size_t a_at_least_b = 0;
  std::size_t n_resamples = 0;
  std::size_t n_items = 0;
  std::uint64_t seed = 0;
  bool two_sided = false;
  bool hierarchical = false;
};

inline constexpr const char* kTieConvention = "ties count for B (p counts metric(B) >= metric(A))";

nlohmann::json to_json(const BootstrapResult& r);

namespace detail {

inline constexpr std::uint64_t kResampleStream = 0xb0075ULL;
inline constexpr std::uint64_t kSeedStream = 0x5eedULL;

template <class Body>
void parallel_resamples(std::size_t n, unsigned jobs, Body body) {
  jobs = std::max(1u, jobs);
  if (jobs == 1 || n < 2 * jobs) {
    for (std::size_t r = 0; r < n; ++r) body(r);
    return;
  }
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < jobs; ++t)
    pool.emplace_back([&, t] {
      for (std::size_t r = n * t / jobs; r < n * (t + 1) / jobs; ++r) body(r);
    });
  for (auto& th : pool) th.join();
}

inline double p_from_counts(std::size_t b_ge, std::size_t a_ge, std::size_t n, bool two_sided) {
  const double nd = static_cast<double>(n);
  double one = static_cast<double>(b_ge) / nd;
  if (!two_sided) return one;
  double other = static_cast<double>(a_ge) / nd;
  return std::min(1.0, 2.0 * std::min(one, other));
}

template <class Item, class Metric>
BootstrapResult hierarchical_impl(const std::vector<std::vector<Item>>& a,
                                  const std::vector<std::vector<Item>>& b, Metric metric,
                                  const BootstrapOptions& opts, bool hierarchical) {
  if (a.empty() || b.empty()) throw UsageError("bootstrap: empty seed list");
  const std::size_t n = a.front().size();
  for (const auto& s : a)
    if (s.size() != n) throw UsageError("bootstrap: seeds of system A cover different test sets");
  for (const auto& s : b)
    if (s.size() != n) throw UsageError("bootstrap: systems are not aligned on the same test items");
  if (n == 0) throw UsageError("bootstrap: empty test set");
  if (opts.n_resamples == 0) throw UsageError("bootstrap: n_resamples must be positive");
  if (opts.n_resamples < 1000)
    log::warn("bootstrap: " + std::to_string(opts.n_resamples) + " resamples give an unstable p-value");

  BootstrapResult res;
  res.n_resamples = opts.n_resamples;
  res.n_items = n;
  res.seed = opts.seed;
  res.two_sided = opts.two_sided;
  res.hierarchical = hierarchical;
  for (const auto& s : a) res.metric_a += metric(s);
  for (const auto& s : b) res.metric_b += metric(s);
  res.metric_a /= static_cast<double>(a.size());
  res.metric_b /= static_cast<double>(b.size());

  std::atomic<std::size_t> b_ge{0}, a_ge{0};
  parallel_resamples(opts.n_resamples, opts.jobs, [&](std::size_t r) {
    std::size_t ia = 0, ib = 0;
    if (a.size() > 1 || b.size() > 1) {
      Rng pick = stream(opts.seed, kSeedStream, r);
      ia = uniform_index(pick, a.size());
      ib = uniform_index(pick, b.size());
    }
    Rng rng = stream(opts.seed, kResampleStream, r);
    std::vector<Item> sa, sb;
    sa.reserve(n);
    sb.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t j = uniform_index(rng, n);
      sa.push_back(a[ia][j]);
      sb.push_back(b[ib][j]);
    }
    double ma = metric(sa), mb = metric(sb);
    if (mb >= ma) ++b_ge;
    if (ma >= mb) ++a_ge;
  });
  res.b_at_least_a = b_ge.load();
  res.a_at_least_b = a_ge.load();
  res.p_value = p_from_counts(res.b_at_least_a, res.a_at_least_b, res.n_resamples, opts.two_sided);
  return res;
}

}  // namespace detail

// Resamples aligned test items with replacement. The one-sided p-value is
// the fraction of resamples where system B scores at least as well as A
// (A is the proposed system). `metric` maps a vector of items to a score.
template <class Item, class Metric>
BootstrapResult paired_bootstrap(const std::vector<Item>& a, const std::vector<Item>& b, Metric metric,
                                 const BootstrapOptions& opts = {}) {
  if (a.size() != b.size()) throw UsageError("bootstrap: systems are not aligned on the same test items");
  return detail::hierarchical_impl<Item>(std::vector<std::vector<Item>>{a},
                                         std::vector<std::vector<Item>>{b}, metric, opts, false);
}

// Each resample first draws one training seed per system, then one shared
// bootstrap test set. With a single seed per system this is exactly
// paired_bootstrap.
template <class Item, class Metric>
BootstrapResult hierarchical_bootstrap(const std::vector<std::vector<Item>>& per_seed_a,
                                       const std::vector<std::vector<Item>>& per_seed_b, Metric metric,
                                       const BootstrapOptions& opts = {}) {
  return detail::hierarchical_impl<Item>(per_seed_a, per_seed_b, metric, opts, true);
}

// Per-document relation outcome, the bootstrap unit for relation metrics.
struct DocRelationItem {
  std::string doc_id;
  std::set<Relation4> pred;
  std::set<Relation4> gold;
};

double doc_level_f1(std::span<const DocRelationItem> items, int arity);

// --- bucketed analyses ------------------------------------------------------------

struct BucketRow {
  std::string label;
  std::size_t count = 0;
  std::size_t flagged = 0;    // e.g. documents with no graph record
  std::optional<PRF> metric;  // omitted for empty buckets
};

struct BucketedReport {
  std::string key;
  std::vector<BucketRow> rows;
  std::size_t total() const;
};

inline const std::vector<std::size_t> kCitationBucketEdges = {0, 10, 50, 250};

// Documents grouped by inbound citation count, each bucket scored with the
// document-level relation metric. Unlinked documents fall in the zero bucket
// and are flagged.
BucketedReport bucket_by_citations(const DocRelations& pred, const DocRelations& gold,
                                   const CitationGraph& graph, const LinkMap& links, int arity,
                                   const std::vector<std::size_t>& edges = kCitationBucketEdges);

// Mean |start_i - start_j| over mention pairs drawn from distinct clusters of
// the relation, divided by the body token count.
double relation_span_distance(const Relation4& rel, const Document& doc);

// For each mention surface form: salient occurrences / occurrences.
std::map<std::string, double> global_saliency_rate(std::span<const Document> docs);

// --- report output ------------------------------------------------------------------

nlohmann::json to_json(const PRF& p);
nlohmann::json to_json(const BucketedReport& r);

// Aligned plain-text table.
std::string format_table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows);
std::string fmt_score(double v);

}  // namespace citeie
