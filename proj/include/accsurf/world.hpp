#pragma once

#include <cstdint>
#include <vector>

#include "accsurf/rng.hpp"
#include "accsurf/space.hpp"

namespace accsurf {

// Generator recipe for a synthetic ground truth: a smooth accuracy field over
// a random arm embedding, an (optionally coupled) arm prior, and noisy
// simulated attribute predictors.
struct WorldSpec {
  std::vector<std::string> attribute_names;
  std::vector<int> cardinalities;
  double smoothness = 1.0;          // correlation length of the accuracy field
  double prior_concentration = 1.0; // Dirichlet concentration of the arm prior
  double coupling = 0.0;            // pairwise attribute coupling strength
  std::vector<double> error_rates;  // one per attribute
  double logit_temperature = 1.0;   // < 1 sharpens predictor logits
};

struct SyntheticWorld {
  AttributeSpace space;
  Eigen::VectorXd gamma;                  // exact accuracy per arm
  Eigen::VectorXd prior;                  // arm distribution, sums to 1
  std::vector<Eigen::MatrixXd> confusion; // per attribute: true x observed
  double logit_temperature = 1.0;
  std::uint64_t seed = 0;

  std::vector<Eigen::VectorXd> attribute_marginals() const;
};

// The fixed 10-arm diagnostic setting: one attribute with ten values,
// gamma = (.1,.3,.5,.7,.8,.9,.6,.4,.3,.2), exact attribute observation.
SyntheticWorld make_appendix_c_world();

// Observation plan for the 10-arm setting: per-arm draw counts (1,1,1,20,...).
const std::vector<int>& appendix_c_observation_plan();

// Per-seed realized counts: N_a Bernoulli(gamma_a) draws per arm.
ArmCounts appendix_c_counts(const SyntheticWorld& world, Rng& rng);

SyntheticWorld sample_world(const WorldSpec& spec, Rng& rng);

Instance sample_instance(const SyntheticWorld& world, Rng& rng);
std::vector<Instance> sample_pool(const SyntheticWorld& world, std::size_t n,
                                  Rng& rng);

// Reveals (and records) the service correctness bit for the instance.
int oracle_label(const SyntheticWorld& world, Instance& instance);

}  // namespace accsurf
