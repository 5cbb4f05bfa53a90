#include "accsurf/exploration.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace accsurf {

std::string to_string(ExplorationStrategy s) {
  return s == ExplorationStrategy::Variance ? "variance" : "random";
}

ExplorationStrategy exploration_strategy_from_string(const std::string& name) {
  if (name == "variance") return ExplorationStrategy::Variance;
  if (name == "random") return ExplorationStrategy::Random;
  throw std::invalid_argument("unknown exploration strategy: " + name);
}

std::vector<std::size_t> select_arms(const PosteriorSummary& summary,
                                     const std::vector<int>& explicit_labels,
                                     std::size_t batch) {
  const std::size_t n = static_cast<std::size_t>(summary.variance.size());
  if (batch > n) throw std::invalid_argument("select_arms: batch > arm count");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     if (summary.variance[a] != summary.variance[b]) {
                       return summary.variance[a] > summary.variance[b];
                     }
                     return a < b;
                   });
  std::vector<std::size_t> unexplored, rest;
  for (std::size_t a : order) {
    (explicit_labels[a] == 0 ? unexplored : rest).push_back(a);
  }
  std::vector<std::size_t> picked;
  for (std::size_t a : unexplored) {
    if (picked.size() == batch) break;
    picked.push_back(a);
  }
  for (std::size_t a : rest) {
    if (picked.size() == batch) break;
    picked.push_back(a);
  }
  return picked;
}

std::optional<std::size_t> select_instance(const Eigen::MatrixXd& affiliation,
                                           std::size_t arm,
                                           const std::vector<bool>& explored) {
  std::optional<std::size_t> best;
  double best_p = -1.0;
  for (std::size_t i = 0; i < explored.size(); ++i) {
    if (explored[i]) continue;
    double p = affiliation(static_cast<Eigen::Index>(i),
                           static_cast<Eigen::Index>(arm));
    if (p > best_p) {
      best_p = p;
      best = i;
    }
  }
  return best;
}

ExplorationResult run_exploration(const SyntheticWorld& world,
                                  std::vector<Instance> seed_data,
                                  std::vector<Instance> pool,
                                  const CalibrationModel& calibration,
                                  const ExplorationConfig& cfg) {
  const AttributeSpace& space = world.space;
  const std::size_t n_arms = space.num_arms();
  if (cfg.budget > 0 && cfg.budget < cfg.arms_per_round) {
    throw std::invalid_argument("run_exploration: budget < arms_per_round");
  }
  if (static_cast<double>(pool.size()) * static_cast<double>(n_arms) > 5e7) {
    throw std::invalid_argument(
        "run_exploration: pool x arms too large for dense affiliations");
  }

  Rng rng(Rng::splitmix(cfg.seed ^ 0xe8f10ceULL));
  Rng rng_summary = rng.fork(1);
  Rng rng_random = rng.fork(2);

  // Seed instances carry gold arms and labels; they set the warm-start prior.
  double kappa_acc = 0.0;
  for (auto& inst : seed_data) kappa_acc += oracle_label(world, inst);
  const double kappa =
      seed_data.empty() ? 0.5 : kappa_acc / static_cast<double>(seed_data.size());

  ArmCounts counts(n_arms);
  warm_start(counts, kappa, cfg.lambda);
  for (const auto& inst : seed_data) {
    accumulate(counts, one_hot_dist(space.arm_index(inst.true_arm), n_arms),
               *inst.correctness);
  }

  // Affiliations are fixed for the whole run; the calibration model is fitted
  // once up front.
  Eigen::MatrixXd affiliation(pool.size(), n_arms);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    affiliation.row(i) = calibration.arm_distribution(pool[i]).transpose();
  }

  GoldSurface gold = gold_surface(pool, space, cfg.min_support);
  std::vector<std::size_t> active_arms;
  for (std::size_t a = 0; a < n_arms; ++a) {
    if (gold.active[a]) active_arms.push_back(a);
  }

  Estimator estimator = Estimator::fit(cfg.estimator, counts, space,
                                       cfg.estimator_cfg, cfg.seed);

  ExplorationResult result;
  result.gold = gold;

  PosteriorSummary summary =
      estimator.summarize(cfg.estimator_cfg.mc_summary, rng_summary);
  RoundRecord warm_record;
  warm_record.round = 0;
  warm_record.metrics = evaluate(summary.mean, gold);
  result.log.rounds.push_back(warm_record);

  std::vector<bool> explored(pool.size(), false);
  std::vector<int> explicit_labels(n_arms, 0);
  int used = 0;
  int round = 0;

  while (used < cfg.budget) {
    ++round;
    const int remaining = cfg.budget - used;
    const std::size_t batch = static_cast<std::size_t>(std::min<int>(
        cfg.arms_per_round,
        std::max(1, remaining / std::max(1, cfg.labels_per_arm))));

    std::vector<std::size_t> arms;
    if (cfg.strategy == ExplorationStrategy::Variance) {
      // `summary` is the post-refit posterior from the previous round.
      arms = select_arms(summary, explicit_labels, std::min(batch, n_arms));
    } else {
      // Uniform over active arms, without replacement within the round.
      std::vector<std::size_t> candidates =
          active_arms.empty() ? std::vector<std::size_t>(n_arms) : active_arms;
      if (active_arms.empty()) {
        std::iota(candidates.begin(), candidates.end(), 0);
      }
      for (std::size_t i = 0; i + 1 < candidates.size(); ++i) {
        std::size_t j = static_cast<std::size_t>(rng_random.uniform_int(
            static_cast<std::int64_t>(i),
            static_cast<std::int64_t>(candidates.size()) - 1));
        std::swap(candidates[i], candidates[j]);
      }
      candidates.resize(std::min(batch, candidates.size()));
      arms = candidates;
    }

    RoundRecord record;
    record.round = round;
    bool pool_exhausted = false;
    for (std::size_t arm : arms) {
      for (int rep = 0; rep < cfg.labels_per_arm && used < cfg.budget; ++rep) {
        auto pick = select_instance(affiliation, arm, explored);
        record.arms.push_back(arm);
        if (!pick) {
          record.instances.push_back(-1);
          record.labels.push_back(-1);
          record.skips += 1;
          pool_exhausted = true;
          continue;
        }
        explored[*pick] = true;
        int label = oracle_label(world, pool[*pick]);
        accumulate(counts, affiliation.row(*pick).transpose(), label);
        explicit_labels[arm] += 1;
        ++used;
        record.instances.push_back(static_cast<std::int64_t>(*pick));
        record.labels.push_back(label);
      }
    }

    estimator.refit(counts, cfg.estimator_cfg.round_steps);
    summary = estimator.summarize(cfg.estimator_cfg.mc_summary, rng_summary);
    record.labels_used = used;
    record.metrics = evaluate(summary.mean, gold);
    result.log.rounds.push_back(record);
    if (pool_exhausted) break;
  }

  result.log.labels_used = used;
  result.final_summary = summary;
  return result;
}

}  // namespace accsurf
