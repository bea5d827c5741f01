#pragma once

// Linear-chain CRF over the 17 IOBES tags. Illegal transitions, starts and
// ends carry -inf potential through a fixed mask, so decoding and the
// partition function only ever see legal paths.

#include <span>

#include "citeie/corpus.hpp"
#include "citeie/nn.hpp"

namespace citeie {

struct CrfGrad {
  nn::Mat emissions;    // kNumTags x T
  nn::Mat transitions;  // kNumTags x kNumTags, [from, to]
  nn::Vec start;
  nn::Vec end;
};

class Crf {
public:
  // Zero-initialized learnable potentials.
  Crf();
  explicit Crf(Rng& rng);

  // Potentials with the legality mask applied.
  double transition(Tag from, Tag to) const;
  double start(Tag t) const;
  double end(Tag t) const;

  // `emissions` is kNumTags x T.
  double path_score(const nn::Mat& emissions, std::span<const Tag> tags) const;
  double log_partition(const nn::Mat& emissions) const;
  // log p(tags); throws ValidationError for illegal gold.
  double log_likelihood(const nn::Mat& emissions, std::span<const Tag> tags) const;
  // Best legal path; on equal scores the lower tag index wins.
  TagSequence viterbi(const nn::Mat& emissions) const;

  // Gradient of the negative log-likelihood.
  CrfGrad nll_grad(const nn::Mat& emissions, std::span<const Tag> tags) const;
  // Adds the potential parts of `g` to the parameter gradients.
  void accumulate(const CrfGrad& g);

  void collect(nn::ParamList& out) { out.push_back(&trans_); out.push_back(&start_); out.push_back(&end_); }

  nn::Param& transitions() { return trans_; }
  nn::Param& starts() { return start_; }
  nn::Param& ends() { return end_; }

private:
  nn::Param trans_;
  nn::Param start_;
  nn::Param end_;
};

}  // namespace citeie
