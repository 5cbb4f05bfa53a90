#include "accsurf/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "accsurf/special.hpp"

namespace accsurf {

using ad::Mat;
using ad::Var;

EmbeddingNet EmbeddingNet::create(ad::ParamStore& store, int in_dim,
                                  const std::vector<int>& hidden, int out_dim,
                                  Rng& rng) {
  EmbeddingNet net;
  net.in_dim_ = in_dim;
  net.out_dim_ = out_dim;
  int prev = in_dim;
  std::vector<int> dims = hidden;
  dims.push_back(out_dim);
  for (std::size_t i = 0; i < dims.size(); ++i) {
    int next = dims[i];
    double bound = std::sqrt(6.0 / (prev + next));
    Mat w(prev, next);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        w(r, c) = rng.uniform(-bound, bound);
      }
    }
    net.layers_.push_back(&store.add("net.W" + std::to_string(i), w));
    net.layers_.push_back(
        &store.add("net.b" + std::to_string(i), Mat::Zero(1, next)));
    prev = next;
  }
  return net;
}

Var EmbeddingNet::forward(const Mat& inputs) const {
  Var h = ad::constant(inputs);
  const std::size_t n_layers = layers_.size() / 2;
  for (std::size_t i = 0; i < n_layers; ++i) {
    Var w = ad::leaf(*layers_[2 * i]);
    Var b = ad::leaf(*layers_[2 * i + 1]);
    h = ad::add(ad::matmul(h, w), ad::rep_rows(b, inputs.rows()));
    if (i + 1 < n_layers) h = ad::tanh_(h);
  }
  return h;
}

Mat EmbeddingNet::forward_value(const Mat& inputs) const {
  Mat h = inputs;
  const std::size_t n_layers = layers_.size() / 2;
  for (std::size_t i = 0; i < n_layers; ++i) {
    const Mat& w = layers_[2 * i]->value;
    const Mat& b = layers_[2 * i + 1]->value;
    h = (h * w).rowwise() + b.row(0);
    if (i + 1 < n_layers) h = h.array().tanh().matrix();
  }
  return h;
}

Mat embed_value(const EmbeddingNet& net, const AttributeSpace& space,
                const Arm& arm) {
  Mat x = space.onehot(arm).transpose();
  return net.forward_value(x);
}

KernelParams KernelParams::create(ad::ParamStore& store,
                                  const std::string& prefix, double s0,
                                  double l0) {
  KernelParams kp;
  kp.s_free_ = &store.add(prefix + ".s", Mat::Constant(1, 1, softplus_inv(s0)));
  kp.l_free_ = &store.add(prefix + ".l", Mat::Constant(1, 1, softplus_inv(l0)));
  return kp;
}

double KernelParams::s() const { return softplus(s_free_->value(0, 0)); }
double KernelParams::l() const { return softplus(l_free_->value(0, 0)); }

Var kernel_matrix(const Var& s, const Var& l, const Var& a, const Var& b) {
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("kernel_matrix: embedding dim mismatch");
  }
  // ||a_i - b_j||^2 = |a_i|^2 + |b_j|^2 - 2 a_i.b_j
  Var ra = ad::row_sum(ad::square(a));                      // n x 1
  Var rb = ad::row_sum(ad::square(b));                      // m x 1
  Var cross = ad::matmul(a, ad::transpose(b));              // n x m
  Var d2 = ad::add(ad::add(ad::rep_cols(ra, b.rows()),
                           ad::rep_rows(ad::transpose(rb), a.rows())),
                   ad::scale(cross, -2.0));
  // Distances are clamped below at 0; tiny negatives appear in floats.
  d2 = ad::clamp(d2, 0.0, std::numeric_limits<double>::infinity());
  return ad::mul_scalar(ad::exp_(ad::neg(ad::div_scalar(d2, l))), s);
}

Mat kernel_matrix_value(double s, double l, const Mat& a, const Mat& b) {
  Mat out(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      double d2 = (a.row(i) - b.row(j)).squaredNorm();
      out(i, j) = s * std::exp(-d2 / l);
    }
  }
  return out;
}

std::vector<std::pair<std::size_t, double>> kernel_neighbors(
    std::size_t query, const Mat& embeds, double s, double l, std::size_t k) {
  const std::size_t n = static_cast<std::size_t>(embeds.rows());
  if (k >= n) throw std::invalid_argument("kernel_neighbors: k >= arm count");
  std::vector<std::pair<std::size_t, double>> sims;
  sims.reserve(n - 1);
  for (std::size_t j = 0; j < n; ++j) {
    if (j == query) continue;
    double d2 = (embeds.row(query) - embeds.row(j)).squaredNorm();
    sims.emplace_back(j, s * std::exp(-d2 / l));
  }
  std::stable_sort(sims.begin(), sims.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  sims.resize(k);
  double total = 0.0;
  for (auto& [idx, w] : sims) total += w;
  for (auto& [idx, w] : sims) w /= total;
  return sims;
}

}  // namespace accsurf
