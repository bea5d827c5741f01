#include "citeie/crf.hpp"

#include <cmath>
#include <limits>

#include "citeie/errors.hpp"

namespace citeie {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr Eigen::Index K = static_cast<Eigen::Index>(kNumTags);

double lse_pair(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace

Crf::Crf() : trans_("crf.transitions", K, K), start_("crf.start", K, 1), end_("crf.end", K, 1) {}

Crf::Crf(Rng& rng) : Crf() {
  nn::init_uniform(trans_, rng, 0.1);
}

double Crf::transition(Tag from, Tag to) const {
  return legal_transition(from, to) ? trans_.value(from, to) : kNegInf;
}
double Crf::start(Tag t) const { return legal_start(t) ? start_.value(t, 0) : kNegInf; }
double Crf::end(Tag t) const { return legal_end(t) ? end_.value(t, 0) : kNegInf; }

double Crf::path_score(const nn::Mat& em, std::span<const Tag> tags) const {
  if (tags.empty()) return 0.0;
  double s = start(tags[0]) + em(tags[0], 0);
  for (std::size_t t = 1; t < tags.size(); ++t)
    s += transition(tags[t - 1], tags[t]) + em(tags[t], static_cast<Eigen::Index>(t));
  return s + end(tags.back());
}

double Crf::log_partition(const nn::Mat& em) const {
  const Eigen::Index T = em.cols();
  if (T == 0) return 0.0;
  nn::Vec alpha(K);
  for (Eigen::Index j = 0; j < K; ++j) alpha(j) = start(static_cast<Tag>(j)) + em(j, 0);
  nn::Vec next(K);
  for (Eigen::Index t = 1; t < T; ++t) {
    for (Eigen::Index j = 0; j < K; ++j) {
      double acc = kNegInf;
      for (Eigen::Index i = 0; i < K; ++i)
        acc = lse_pair(acc, alpha(i) + transition(static_cast<Tag>(i), static_cast<Tag>(j)));
      next(j) = acc + em(j, t);
    }
    alpha.swap(next);
  }
  double z = kNegInf;
  for (Eigen::Index j = 0; j < K; ++j) z = lse_pair(z, alpha(j) + end(static_cast<Tag>(j)));
  return z;
}

double Crf::log_likelihood(const nn::Mat& em, std::span<const Tag> tags) const {
  if (static_cast<Eigen::Index>(tags.size()) != em.cols())
    throw ValidationError("crf: tag count does not match emission columns");
  if (!is_legal(tags)) throw ValidationError("crf: gold tag sequence is not IOBES-legal");
  return path_score(em, tags) - log_partition(em);
}

TagSequence Crf::viterbi(const nn::Mat& em) const {
  const Eigen::Index T = em.cols();
  if (T == 0) return {};
  nn::Mat delta(K, T);
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> back(K, T);
  for (Eigen::Index j = 0; j < K; ++j) delta(j, 0) = start(static_cast<Tag>(j)) + em(j, 0);
  for (Eigen::Index t = 1; t < T; ++t) {
    for (Eigen::Index j = 0; j < K; ++j) {
      double best = kNegInf;
      int arg = 0;
      for (Eigen::Index i = 0; i < K; ++i) {
        double s = delta(i, t - 1) + transition(static_cast<Tag>(i), static_cast<Tag>(j));
        if (s > best) {
          best = s;
          arg = static_cast<int>(i);
        }
      }
      delta(j, t) = best + em(j, t);
      back(j, t) = arg;
    }
  }
  double best = kNegInf;
  int arg = 0;
  for (Eigen::Index j = 0; j < K; ++j) {
    double s = delta(j, T - 1) + end(static_cast<Tag>(j));
    if (s > best) {
      best = s;
      arg = static_cast<int>(j);
    }
  }
  TagSequence out(static_cast<std::size_t>(T));
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    out[static_cast<std::size_t>(t)] = static_cast<Tag>(arg);
    if (t > 0) arg = back(arg, t);
  }
  return out;
}

CrfGrad Crf::nll_grad(const nn::Mat& em, std::span<const Tag> tags) const {
  const Eigen::Index T = em.cols();
  CrfGrad g{nn::Mat::Zero(K, T), nn::Mat::Zero(K, K), nn::Vec::Zero(K), nn::Vec::Zero(K)};
  if (T == 0) return g;
  if (static_cast<Eigen::Index>(tags.size()) != T || !is_legal(tags))
    throw ValidationError("crf: gold tag sequence is not IOBES-legal");

  nn::Mat alpha(K, T), beta(K, T);
  for (Eigen::Index j = 0; j < K; ++j) alpha(j, 0) = start(static_cast<Tag>(j)) + em(j, 0);
  for (Eigen::Index t = 1; t < T; ++t)
    for (Eigen::Index j = 0; j < K; ++j) {
      double acc = kNegInf;
      for (Eigen::Index i = 0; i < K; ++i)
        acc = lse_pair(acc, alpha(i, t - 1) + transition(static_cast<Tag>(i), static_cast<Tag>(j)));
      alpha(j, t) = acc + em(j, t);
    }
  for (Eigen::Index j = 0; j < K; ++j) beta(j, T - 1) = end(static_cast<Tag>(j));
  for (Eigen::Index t = T - 2; t >= 0; --t)
    for (Eigen::Index i = 0; i < K; ++i) {
      double acc = kNegInf;
      for (Eigen::Index j = 0; j < K; ++j)
        acc = lse_pair(acc, transition(static_cast<Tag>(i), static_cast<Tag>(j)) + em(j, t + 1) +
                                beta(j, t + 1));
      beta(i, t) = acc;
    }
  double logz = kNegInf;
  for (Eigen::Index j = 0; j < K; ++j) logz = lse_pair(logz, alpha(j, 0) + beta(j, 0));

  auto prob = [&](double logp) { return logp == kNegInf ? 0.0 : std::exp(logp - logz); };

  // Expected counts minus gold counts.
  for (Eigen::Index t = 0; t < T; ++t)
    for (Eigen::Index j = 0; j < K; ++j) g.emissions(j, t) = prob(alpha(j, t) + beta(j, t));
  for (Eigen::Index j = 0; j < K; ++j) {
    g.start(j) = prob(start(static_cast<Tag>(j)) + em(j, 0) + beta(j, 0));
    g.end(j) = prob(alpha(j, T - 1) + end(static_cast<Tag>(j)));
  }
  for (Eigen::Index t = 1; t < T; ++t)
    for (Eigen::Index i = 0; i < K; ++i)
      for (Eigen::Index j = 0; j < K; ++j) {
        double tr = transition(static_cast<Tag>(i), static_cast<Tag>(j));
        if (tr == kNegInf) continue;
        g.transitions(i, j) += prob(alpha(i, t - 1) + tr + em(j, t) + beta(j, t));
      }

  for (Eigen::Index t = 0; t < T; ++t) g.emissions(tags[static_cast<std::size_t>(t)], t) -= 1.0;
  g.start(tags.front()) -= 1.0;
  g.end(tags.back()) -= 1.0;
  for (std::size_t t = 1; t < tags.size(); ++t) g.transitions(tags[t - 1], tags[t]) -= 1.0;
  return g;
}

void Crf::accumulate(const CrfGrad& g) {
  trans_.grad += g.transitions;
  start_.grad.col(0) += g.start;
  end_.grad.col(0) += g.end;
}

}  // namespace citeie
