#include "citeie/nn.hpp"

#include <cmath>
#include <limits>

namespace citeie::nn {

void init_uniform(Param& p, Rng& rng, double scale) {
  if (scale < 0) scale = std::sqrt(6.0 / static_cast<double>(p.value.rows() + p.value.cols()));
  for (Eigen::Index j = 0; j < p.value.cols(); ++j)
    for (Eigen::Index i = 0; i < p.value.rows(); ++i) p.value(i, j) = uniform(rng, -scale, scale);
}

Linear::Linear(const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng)
    : W(name + ".W", out, in), b(name + ".b", out, 1) {
  init_uniform(W, rng);
}

Vec Linear::backward(const Vec& x, const Vec& dy) {
  W.grad.noalias() += dy * x.transpose();
  b.grad.col(0) += dy;
  return W.value.transpose() * dy;
}

Mat Linear::backward_cols(const Mat& X, const Mat& dY) {
  W.grad.noalias() += dY * X.transpose();
  b.grad.col(0) += dY.rowwise().sum();
  return W.value.transpose() * dY;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double bce_with_logit(double z, double y) {
  // max(z,0) - z*y + log(1 + exp(-|z|))
  return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

double log_sum_exp(const Vec& v) {
  double m = v.maxCoeff();
  if (m == -std::numeric_limits<double>::infinity()) return m;
  return m + std::log((v.array() - m).exp().sum());
}

Recurrent::Recurrent(const std::string& name, Eigen::Index in, Eigen::Index hidden, Rng& rng)
    : Wx(name + ".Wx", hidden, in), Wh(name + ".Wh", hidden, hidden), b(name + ".b", hidden, 1) {
  init_uniform(Wx, rng);
  init_uniform(Wh, rng);
}

Mat Recurrent::forward(const Mat& X, bool reverse) const {
  const Eigen::Index T = X.cols();
  const Eigen::Index h = hidden();
  Mat H(h, T);
  Mat pre = (Wx.value * X).colwise() + b.value.col(0);
  Vec prev = Vec::Zero(h);
  for (Eigen::Index s = 0; s < T; ++s) {
    Eigen::Index t = reverse ? T - 1 - s : s;
    Vec z = pre.col(t) + Wh.value * prev;
    H.col(t) = z.array().tanh();
    prev = H.col(t);
  }
  return H;
}

Mat Recurrent::backward(const Mat& X, const Mat& H, const Mat& dH, bool reverse) {
  const Eigen::Index T = X.cols();
  const Eigen::Index h = hidden();
  Mat dpre(h, T);
  Vec carry = Vec::Zero(h);  // dL/dh_t arriving from step t+1
  for (Eigen::Index s = T - 1; s >= 0; --s) {
    Eigen::Index t = reverse ? T - 1 - s : s;
    Vec dh = dH.col(t) + carry;
    Vec dz = (dh.array() * (1.0 - H.col(t).array().square())).matrix();
    dpre.col(t) = dz;
    Eigen::Index prev_t = reverse ? t + 1 : t - 1;
    if (s > 0) Wh.grad.noalias() += dz * H.col(prev_t).transpose();
    carry = Wh.value.transpose() * dz;
  }
  Wx.grad.noalias() += dpre * X.transpose();
  b.grad.col(0) += dpre.rowwise().sum();
  return Wx.value.transpose() * dpre;
}

BiRecurrent::BiRecurrent(const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng)
    : fwd(name + ".fwd", in, out / 2, rng), bwd(name + ".bwd", in, out - out / 2, rng) {}

Mat BiRecurrent::forward(const Mat& X) const {
  Mat out(out_dim(), X.cols());
  out.topRows(fwd.hidden()) = fwd.forward(X, false);
  out.bottomRows(bwd.hidden()) = bwd.forward(X, true);
  return out;
}

Mat BiRecurrent::backward(const Mat& X, const Mat& H, const Mat& dH) {
  const Eigen::Index hf = fwd.hidden();
  const Eigen::Index hb = bwd.hidden();
  Mat dX = fwd.backward(X, H.topRows(hf), dH.topRows(hf), false);
  dX += bwd.backward(X, H.bottomRows(hb), dH.bottomRows(hb), true);
  return dX;
}

double global_grad_norm(const ParamList& params) {
  double sq = 0;
  for (const Param* p : params) sq += p->grad.squaredNorm();
  return std::sqrt(sq);
}

void sgd_step(const ParamList& params, double lr, double clip_norm) {
  double norm = global_grad_norm(params);
  double scale = (clip_norm > 0 && norm > clip_norm) ? clip_norm / norm : 1.0;
  for (Param* p : params) {
    p->value -= (lr * scale) * p->grad;
    p->grad.setZero();
  }
}

void zero_grads(const ParamList& params) {
  for (Param* p : params) p->grad.setZero();
}

bool all_finite(const ParamList& params) {
  for (const Param* p : params)
    if (!p->value.allFinite()) return false;
  return true;
}

std::vector<Mat> snapshot(const ParamList& params) {
  std::vector<Mat> out;
  out.reserve(params.size());
  for (const Param* p : params) out.push_back(p->value);
  return out;
}

void restore(const ParamList& params, const std::vector<Mat>& values) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
}

}  // namespace citeie::nn
