#pragma once

#include <Eigen/Dense>
#include <vector>

#include "accsurf/space.hpp"

namespace accsurf {

struct MetricSuite {
  double macro_mse = 0.0;
  double micro_mse = 0.0;
  double worst_mse = 0.0;
  double infreq_mse = 0.0;
  Eigen::VectorXd quantiles;  // 7 levels of per-arm gold accuracy
  int active_arms = 0;
};

// Squared-error aggregates over the active arms of the gold surface. worst/
// infrequent restrict to the min(50, active) lowest-accuracy / least-supported
// arms, ties broken by arm index.
double macro_mse(const Eigen::VectorXd& estimates, const GoldSurface& gold);
double micro_mse(const Eigen::VectorXd& estimates, const GoldSurface& gold);
double worst_mse(const Eigen::VectorXd& estimates, const GoldSurface& gold,
                 int k = 50);
double infreq_mse(const Eigen::VectorXd& estimates, const GoldSurface& gold,
                  int k = 50);

// Type-1 (lower value) quantiles of active-arm gold accuracy at levels
// (0, .1, .3, .5, .7, .9, 1).
Eigen::VectorXd quantile_report(const GoldSurface& gold);

MetricSuite evaluate(const Eigen::VectorXd& estimates, const GoldSurface& gold);

struct BiasVariance {
  double bias2 = 0.0;     // x100, macro mean over active arms
  double variance = 0.0;  // x100
  double mse = 0.0;       // x100; equals bias2 + variance
};

// Across-seed decomposition: one estimate vector per seed.
BiasVariance bias_variance(const std::vector<Eigen::VectorXd>& per_seed,
                           const GoldSurface& gold);

}  // namespace accsurf
