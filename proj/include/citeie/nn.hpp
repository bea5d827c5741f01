#pragma once

// Small dense layers with explicit forward caches and backward passes.
// Gradients accumulate into Param::grad until zeroed by the optimizer.

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "citeie/rng.hpp"

namespace citeie::nn {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct Param {
  std::string name;
  Mat value;
  Mat grad;

  Param() = default;
  Param(std::string n, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)), value(Mat::Zero(rows, cols)), grad(Mat::Zero(rows, cols)) {}
  void zero_grad() { grad.setZero(); }
};

using ParamList = std::vector<Param*>;

// Glorot-uniform fill.
void init_uniform(Param& p, Rng& rng, double scale = -1.0);

class Linear {
public:
  Linear() = default;
  Linear(const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng);

  Eigen::Index in_dim() const { return W.value.cols(); }
  Eigen::Index out_dim() const { return W.value.rows(); }

  Vec forward(const Vec& x) const { return W.value * x + b.value.col(0); }
  Mat forward_cols(const Mat& X) const {
    return (W.value * X).colwise() + b.value.col(0);
  }
  // Accumulates parameter gradients; returns dL/dx.
  Vec backward(const Vec& x, const Vec& dy);
  Mat backward_cols(const Mat& X, const Mat& dY);

  void collect(ParamList& out) { out.push_back(&W); out.push_back(&b); }

  Param W, b;
};

inline Vec tanh(const Vec& x) { return x.array().tanh().matrix(); }
inline Mat tanh(const Mat& x) { return x.array().tanh().matrix(); }
// Derivative of tanh given its output.
inline Mat tanh_grad(const Mat& y, const Mat& dy) {
  return (dy.array() * (1.0 - y.array().square())).matrix();
}

double sigmoid(double x);
// Binary cross-entropy on a logit, stable for large |logit|.
double bce_with_logit(double logit, double label);
// d/dlogit of bce_with_logit.
inline double bce_grad(double logit, double label) { return sigmoid(logit) - label; }

double log_sum_exp(const Vec& v);

// Elman recurrence h_t = tanh(Wx x_t + Wh h_{t-1} + b) in one direction.
class Recurrent {
public:
  Recurrent() = default;
  Recurrent(const std::string& name, Eigen::Index in, Eigen::Index hidden, Rng& rng);

  Eigen::Index hidden() const { return Wh.value.rows(); }
  // X is in x T; returns hidden x T, processed right-to-left if `reverse`.
  Mat forward(const Mat& X, bool reverse) const;
  // Returns dL/dX.
  Mat backward(const Mat& X, const Mat& H, const Mat& dH, bool reverse);

  void collect(ParamList& out) { out.push_back(&Wx); out.push_back(&Wh); out.push_back(&b); }

  Param Wx, Wh, b;
};

// Two directions concatenated: output rows [forward; backward].
class BiRecurrent {
public:
  BiRecurrent() = default;
  BiRecurrent(const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng);

  Eigen::Index out_dim() const { return fwd.hidden() + bwd.hidden(); }
  Mat forward(const Mat& X) const;
  Mat backward(const Mat& X, const Mat& H, const Mat& dH);

  void collect(ParamList& out) { fwd.collect(out); bwd.collect(out); }

  Recurrent fwd, bwd;
};

double global_grad_norm(const ParamList& params);
// Plain SGD with global-norm clipping; zeroes gradients afterwards.
void sgd_step(const ParamList& params, double lr, double clip_norm);
void zero_grads(const ParamList& params);
bool all_finite(const ParamList& params);

// Parameter value snapshot, for restoring the best epoch.
std::vector<Mat> snapshot(const ParamList& params);
void restore(const ParamList& params, const std::vector<Mat>& values);

}  // namespace citeie::nn
