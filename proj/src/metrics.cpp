#include "accsurf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace accsurf {

namespace {

std::vector<std::size_t> active_indices(const GoldSurface& gold) {
  std::vector<std::size_t> idx;
  for (std::size_t a = 0; a < gold.active.size(); ++a) {
    if (gold.active[a]) idx.push_back(a);
  }
  return idx;
}

double mse_over(const Eigen::VectorXd& estimates, const GoldSurface& gold,
                const std::vector<std::size_t>& idx) {
  if (idx.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t a : idx) {
    double d = estimates[a] - gold.gamma[a];
    total += d * d;
  }
  return total / static_cast<double>(idx.size());
}

}  // namespace

double macro_mse(const Eigen::VectorXd& estimates, const GoldSurface& gold) {
  return mse_over(estimates, gold, active_indices(gold));
}

double micro_mse(const Eigen::VectorXd& estimates, const GoldSurface& gold) {
  auto idx = active_indices(gold);
  double total = 0.0, mass = 0.0;
  for (std::size_t a : idx) {
    double d = estimates[a] - gold.gamma[a];
    total += gold.support[a] * d * d;
    mass += gold.support[a];
  }
  return mass > 0.0 ? total / mass : 0.0;
}

double worst_mse(const Eigen::VectorXd& estimates, const GoldSurface& gold,
                 int k) {
  auto idx = active_indices(gold);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (gold.gamma[a] != gold.gamma[b]) return gold.gamma[a] < gold.gamma[b];
    return a < b;
  });
  if (static_cast<int>(idx.size()) > k) idx.resize(k);
  return mse_over(estimates, gold, idx);
}

double infreq_mse(const Eigen::VectorXd& estimates, const GoldSurface& gold,
                  int k) {
  auto idx = active_indices(gold);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (gold.support[a] != gold.support[b]) {
      return gold.support[a] < gold.support[b];
    }
    return a < b;
  });
  if (static_cast<int>(idx.size()) > k) idx.resize(k);
  return mse_over(estimates, gold, idx);
}

Eigen::VectorXd quantile_report(const GoldSurface& gold) {
  const double levels[] = {0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0};
  auto idx = active_indices(gold);
  std::vector<double> values;
  for (std::size_t a : idx) values.push_back(gold.gamma[a]);
  std::sort(values.begin(), values.end());
  Eigen::VectorXd out(7);
  if (values.empty()) {
    out.setZero();
    return out;
  }
  const std::size_t n = values.size();
  for (int i = 0; i < 7; ++i) {
    // Type-1: Q(p) = x_(ceil(n p)) with Q(0) = x_(1), 1-indexed.
    std::size_t rank =
        static_cast<std::size_t>(std::ceil(levels[i] * static_cast<double>(n)));
    if (rank == 0) rank = 1;
    if (rank > n) rank = n;
    out[i] = values[rank - 1];
  }
  return out;
}

MetricSuite evaluate(const Eigen::VectorXd& estimates, const GoldSurface& gold) {
  MetricSuite m;
  m.macro_mse = macro_mse(estimates, gold);
  m.micro_mse = micro_mse(estimates, gold);
  m.worst_mse = worst_mse(estimates, gold);
  m.infreq_mse = infreq_mse(estimates, gold);
  m.quantiles = quantile_report(gold);
  m.active_arms = static_cast<int>(gold.num_active());
  return m;
}

BiasVariance bias_variance(const std::vector<Eigen::VectorXd>& per_seed,
                           const GoldSurface& gold) {
  if (per_seed.size() < 2) {
    throw std::invalid_argument("bias_variance: need at least 2 seeds");
  }
  auto idx = active_indices(gold);
  const double s = static_cast<double>(per_seed.size());
  double bias2 = 0.0, variance = 0.0;
  for (std::size_t a : idx) {
    double mean = 0.0;
    for (const auto& est : per_seed) mean += est[a];
    mean /= s;
    double var = 0.0;
    for (const auto& est : per_seed) {
      var += (est[a] - mean) * (est[a] - mean);
    }
    var /= s;  // population variance so bias^2 + variance == mse exactly
    bias2 += (mean - gold.gamma[a]) * (mean - gold.gamma[a]);
    variance += var;
  }
  const double n_active = idx.empty() ? 1.0 : static_cast<double>(idx.size());
  BiasVariance out;
  out.bias2 = 100.0 * bias2 / n_active;
  out.variance = 100.0 * variance / n_active;
  out.mse = out.bias2 + out.variance;
  return out;
}

}  // namespace accsurf
