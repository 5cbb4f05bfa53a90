#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "accsurf/io.hpp"

namespace accsurf {

// Library-level command implementations. The CLI wraps these; the test
// suites call them directly.

struct AppendixCMethodResult {
  std::string method;
  Eigen::VectorXd psi_mean;                      // per arm, seed-averaged
  std::vector<Eigen::VectorXd> estimates;        // per seed
  BiasVariance bv;
  double l1_mean = 0.0;
  double l2_mean = 0.0;
};

std::vector<AppendixCMethodResult> run_appendix_c(
    const std::vector<std::uint64_t>& seeds, const EstimatorConfig& cfg,
    int jobs);

struct EstimateCellResult {
  std::string method;
  std::uint64_t seed = 0;
  MetricSuite metrics;
  PosteriorSummary summary;
};

std::vector<EstimateCellResult> run_estimate_grid(const ExperimentConfig& cfg);

struct ExploreCellResult {
  std::string method;
  std::string strategy;
  std::uint64_t seed = 0;
  ExplorationResult result;
};

std::vector<ExploreCellResult> run_explore_grid(const ExperimentConfig& cfg);

struct CalibrateCellResult {
  std::uint64_t seed = 0;
  CalibrationMode mode = CalibrationMode::Raw;
  double nll = 0.0;
  std::vector<double> temperatures;
};

std::vector<CalibrateCellResult> run_calibrate_grid(const ExperimentConfig& cfg);

SyntheticWorld build_world(const ExperimentConfig& cfg);
std::string world_name(const ExperimentConfig& cfg);

// CLI entry points; write output files under cfg.out_dir and return an exit
// code (0 ok, 2 config error, 3 numerical abort).
int cmd_replicate_appendix_c(const ExperimentConfig& cfg);
int cmd_estimate(const ExperimentConfig& cfg);
int cmd_explore(const ExperimentConfig& cfg, bool resume = false);
int cmd_calibrate(const ExperimentConfig& cfg);
int cmd_report(const std::string& dir);

}  // namespace accsurf
