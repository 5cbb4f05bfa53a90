#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "accsurf/calibration.hpp"
#include "accsurf/estimators.hpp"
#include "accsurf/metrics.hpp"
#include "accsurf/world.hpp"

namespace accsurf {

enum class ExplorationStrategy { Variance, Random };

std::string to_string(ExplorationStrategy s);
ExplorationStrategy exploration_strategy_from_string(const std::string& name);

struct ExplorationConfig {
  int budget = 0;
  int arms_per_round = 12;
  int labels_per_arm = 1;
  double lambda = 0.1;
  EstimatorKind estimator = EstimatorKind::BetaGP_SLP;
  CalibrationMode calibration = CalibrationMode::Full;
  ExplorationStrategy strategy = ExplorationStrategy::Variance;
  EstimatorConfig estimator_cfg;
  int min_support = 5;
  std::uint64_t seed = 0;
};

struct RoundRecord {
  int round = 0;
  std::vector<std::size_t> arms;
  std::vector<std::int64_t> instances;  // pool ids; -1 marks a skip
  std::vector<int> labels;
  int skips = 0;
  int labels_used = 0;
  MetricSuite metrics;
};

struct ExplorationLog {
  std::vector<RoundRecord> rounds;  // round 0 is the warm-start snapshot
  int labels_used = 0;
};

// Arms ranked by posterior variance (ties to the lower index). While any arm
// still has zero explicit labels the ranking is restricted to those arms;
// afterwards it is a pure argmax over variance.
std::vector<std::size_t> select_arms(const PosteriorSummary& summary,
                                     const std::vector<int>& explicit_labels,
                                     std::size_t batch);

// Unexplored pool instance with the highest affiliation to the arm; ties go
// to the lower instance id. Returns nullopt when the pool is exhausted.
std::optional<std::size_t> select_instance(
    const Eigen::MatrixXd& affiliation, std::size_t arm,
    const std::vector<bool>& explored);

struct ExplorationResult {
  ExplorationLog log;
  GoldSurface gold;
  PosteriorSummary final_summary;
};

ExplorationResult run_exploration(const SyntheticWorld& world,
                                  std::vector<Instance> seed_data,
                                  std::vector<Instance> pool,
                                  const CalibrationModel& calibration,
                                  const ExplorationConfig& cfg);

}  // namespace accsurf
