#pragma once

// DeepWalk: truncated uniform random walks over the undirected citation
// graph, then skip-gram with negative sampling.

#include <atomic>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "citeie/citation_graph.hpp"

namespace citeie {

inline constexpr std::size_t kGraphDim = 128;

struct WalkParams {
  std::size_t walks_per_node = 10;
  std::size_t walk_length = 40;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
};

struct WalkCorpus {
  std::vector<std::vector<NodeIndex>> walks;  // ordered by (round, node)
  std::vector<std::string> node_ids;          // index -> record id
  WalkParams params;

  std::size_t token_count() const;
};

// Every node starts walks_per_node walks; a walk stops early at an isolated
// node. Each (node, round) pair has its own random stream, so the corpus is
// identical for any `jobs`.
WalkCorpus generate_walks(const CitationGraph& g, const WalkParams& params);

enum class TrainMode { deterministic, hogwild };

struct SkipGramParams {
  std::size_t dim = kGraphDim;
  std::size_t window = 5;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  double lr = 0.025;  // decays linearly to lr * 1e-4
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::deterministic;
  unsigned jobs = 1;  // hogwild only
};

class EmbeddingTable {
public:
  EmbeddingTable() = default;
  EmbeddingTable(std::size_t dim, std::vector<std::string> ids, std::vector<double> data);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
  std::optional<std::span<const double>> find(std::string_view id) const;

  // Absent ids map to the zero vector and are counted as misses.
  std::vector<double> lookup(std::string_view id) const;
  std::size_t misses() const { return misses_.load(); }

  bool operator==(const EmbeddingTable& o) const {
    return dim_ == o.dim_ && ids_ == o.ids_ && data_ == o.data_;
  }

  EmbeddingTable(const EmbeddingTable& o)
      : dim_(o.dim_), ids_(o.ids_), data_(o.data_), index_(o.index_) {}
  EmbeddingTable& operator=(const EmbeddingTable& o) {
    dim_ = o.dim_;
    ids_ = o.ids_;
    data_ = o.data_;
    index_ = o.index_;
    misses_ = 0;
    return *this;
  }
  EmbeddingTable(EmbeddingTable&&) = default;
  EmbeddingTable& operator=(EmbeddingTable&& o) noexcept {
    dim_ = o.dim_;
    ids_ = std::move(o.ids_);
    data_ = std::move(o.data_);
    index_ = std::move(o.index_);
    misses_ = 0;
    return *this;
  }

private:
  std::size_t dim_ = kGraphDim;
  std::vector<std::string> ids_;
  std::vector<double> data_;
  std::unordered_map<std::string, std::size_t> index_;
  mutable std::atomic<std::size_t> misses_{0};
};

// Input (node) and output (context) vectors.
struct SkipGramModel {
  EmbeddingTable input;
  EmbeddingTable context;
  std::vector<double> epoch_loss;  // mean per-pair loss of each epoch
};

using EpochCallback = std::function<void(std::size_t epoch, const SkipGramModel&)>;

// Throws NumericalError when the loss turns non-finite and UsageError on an
// empty corpus.
SkipGramModel train_skipgram_model(const WalkCorpus& corpus, const SkipGramParams& params,
                                   const EpochCallback& on_epoch = {});
EmbeddingTable train_skipgram(const WalkCorpus& corpus, const SkipGramParams& params);

// Per-pair negative-sampling loss
//   -log s(u.v) - sum_k log s(-u.n_k)
// and its gradient with respect to u, v and each n_k.
double sgns_pair_loss(std::span<const double> center, std::span<const double> context,
                      std::span<const std::span<const double>> negatives);
void sgns_pair_grad(std::span<const double> center, std::span<const double> context,
                    std::span<const std::span<const double>> negatives,
                    std::span<double> grad_center, std::span<double> grad_context,
                    std::span<const std::span<double>> grad_negatives);

double cosine(std::span<const double> a, std::span<const double> b);

// Text: header `N dim`, then `id v1 ... vdim` per line; values use the
// shortest round-trip decimal form.
void write_embeddings_text(std::ostream& out, const EmbeddingTable& t);
EmbeddingTable read_embeddings_text(std::istream& in);
// Binary: 16-byte magic, u64 count, u64 dim, then per row u32 id length,
// id bytes and dim little-endian float64 values.
void write_embeddings_binary(std::ostream& out, const EmbeddingTable& t);
EmbeddingTable read_embeddings_binary(std::istream& in);
void save_embeddings(const std::string& path, const EmbeddingTable& t);
// Detects the binary magic, otherwise parses text.
EmbeddingTable load_embeddings(const std::string& path);

}  // namespace citeie
