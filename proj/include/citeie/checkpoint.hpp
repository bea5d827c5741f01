#pragma once

// Versioned binary model container: config, vocabulary, decision threshold
// and named parameter tensors.
//
// Layout (little-endian): magic "CITEIE-CKPT" + NUL, u32 version, then
// length-prefixed strings and u64 counts; each tensor is name, rows, cols
// and column-major doubles.

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "citeie/ie_models.hpp"

namespace citeie {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig config;
  std::vector<std::string> vocab;
  double threshold = 0.5;
  std::vector<std::pair<std::string, nn::Mat>> params;
};

std::string model_config_to_text(const ModelConfig& cfg);
ModelConfig model_config_from_text(const std::string& text);

void write_checkpoint(std::ostream& out, TaskModel& model, double threshold);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, TaskModel& model, double threshold);
Checkpoint load_checkpoint_file(const std::string& path);

// Copies tensors into a model built from the same config and vocabulary.
// Throws ValidationError on a name or shape mismatch.
void apply_checkpoint(TaskModel& model, const Checkpoint& ckpt);

template <class Model>
Model load_model(const std::string& path) {
  Checkpoint ck = load_checkpoint_file(path);
  Model m(ck.config, Vocab::from_tokens(ck.vocab));
  apply_checkpoint(m, ck);
  if constexpr (requires { m.set_threshold(0.5); }) m.set_threshold(ck.threshold);
  return m;
}

}  // namespace citeie
