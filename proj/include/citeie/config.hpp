#pragma once

// Run configuration: a `key = value` text file, overridable by flags.
// Relative paths resolve against the data root (CITEIE_DATA_ROOT, else the
// current directory).

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "citeie/ie_models.hpp"
#include "citeie/training.hpp"

namespace citeie {

inline constexpr const char* kDataRootEnv = "CITEIE_DATA_ROOT";

struct RunConfig {
  std::string data_root;

  // inputs
  std::string train_corpus, dev_corpus, test_corpus;
  std::string doc_ids;  // per-document identifiers for linkage
  std::string store;
  std::string citing_docs;
  // artifacts
  std::string graph;  // prefix: <graph>.nodes, <graph>.edges
  std::string links;
  std::string embeddings;
  std::string citances;
  std::string idf;
  std::string checkpoints;  // directory
  std::string reports;      // directory

  std::string task = "all";  // mention | saliency | relation | all
  std::optional<Fusion> fusion;  // unset: per-task default when use_graph, else none
  bool use_citances = false;
  bool use_tfidf = false;
  bool use_graph = false;
  std::vector<std::uint64_t> seeds = {133, 11, 22};

  // model
  std::size_t d_tok = 64, d_ctx = 128, hidden = 128, d_span = 64, d_rel = 64;
  std::size_t max_section_len = 512;
  // training
  TrainConfig train;
  // graph embedding
  std::size_t embed_dim = kGraphDim, walks_per_node = 10, walk_length = 40;
  std::size_t window = 5, sgns_negatives = 5, embed_epochs = 5;
  double embed_lr = 0.025;
  // citances
  std::size_t max_citing = 25;
  // significance
  std::size_t n_resamples = 10000;
  bool two_sided = false;

  std::uint64_t seed = 0;  // seed for data-level randomness (walks, sampling, bootstrap)
  unsigned jobs = 1;
  bool deterministic = true;

  // Sets one key; throws UsageError on an unknown key or bad value.
  void set(const std::string& key, const std::string& value);
  std::string resolve(const std::string& path) const;
  // Every effective setting, one `key = value` per line, sorted by key.
  std::string to_text() const;
  std::map<std::string, std::string> to_map() const;

  Fusion fusion_for(Task t) const;
  ModelConfig model_config(Task t, std::uint64_t seed) const;
};

RunConfig read_run_config(std::istream& in, const std::string& data_root);
RunConfig load_run_config(const std::string& path);
RunConfig default_run_config();

// Existence of the named input paths, non-empty seeds, and an embeddings
// path whenever graph fusion is enabled. Throws UsageError.
void validate_inputs(const RunConfig& cfg, const std::vector<std::string>& required_keys);

}  // namespace citeie
