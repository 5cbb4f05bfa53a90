#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace accsurf {

using Arm = std::vector<int>;  // one value index per attribute

// Cartesian universe of attribute combinations. Arms are ordered
// lexicographically over their value tuples; every per-arm vector in the
// library uses this order.
class AttributeSpace {
 public:
  AttributeSpace(std::vector<std::string> names, std::vector<int> cardinalities);

  static constexpr std::size_t kArmCap = 1000000;

  std::size_t num_attributes() const { return cardinalities_.size(); }
  std::size_t num_arms() const { return num_arms_; }
  const std::vector<std::string>& attribute_names() const { return names_; }
  const std::vector<int>& cardinalities() const { return cardinalities_; }
  int onehot_width() const { return onehot_width_; }

  std::size_t arm_index(const Arm& arm) const;
  Arm index_to_arm(std::size_t index) const;

  // Concatenated one-hot encoding, one row per arm (num_arms x onehot_width).
  Eigen::MatrixXd onehot_matrix() const;
  Eigen::VectorXd onehot(const Arm& arm) const;

 private:
  std::vector<std::string> names_;
  std::vector<int> cardinalities_;
  std::vector<std::size_t> strides_;
  std::size_t num_arms_ = 0;
  int onehot_width_ = 0;
};

std::vector<Arm> enumerate_arms(const AttributeSpace& space);

// Fractional observation accumulators, one (correct, incorrect) pair per arm.
struct ArmCounts {
  Eigen::VectorXd c1;  // weighted correct mass
  Eigen::VectorXd c0;  // weighted incorrect mass

  explicit ArmCounts(std::size_t num_arms = 0)
      : c1(Eigen::VectorXd::Zero(num_arms)),
        c0(Eigen::VectorXd::Zero(num_arms)) {}

  std::size_t size() const { return static_cast<std::size_t>(c1.size()); }
  double n(std::size_t a) const { return c1[a] + c0[a]; }
  Eigen::VectorXd totals() const { return c1 + c0; }
  double total_mass() const { return c1.sum() + c0.sum(); }
};

// Adds one labeled observation, softly distributed over arms. arm_dist must
// be a probability vector over arms (sums to 1 within 1e-6, no negatives).
void accumulate(ArmCounts& counts, const Eigen::VectorXd& arm_dist, int correct);

// Seeds every arm with lambda*kappa correct / lambda*(1-kappa) incorrect
// pseudo-mass. Requires fresh (all-zero) counts and lambda > 0.
void warm_start(ArmCounts& counts, double kappa, double lambda);

// Per-instance data as seen by the estimators: per-attribute normalized
// log-probability tables plus oracle-only fields.
struct Instance {
  std::vector<Eigen::VectorXd> logits;  // log P(a_k = v | x), normalized rows
  Arm true_arm;                         // hidden from estimators
  int hidden_correct = 0;               // revealed only via the label oracle
  std::optional<int> correctness;       // set once labeled
};

// Empirical accuracy surface. Arms with support below the threshold are
// inactive and excluded from evaluation.
struct GoldSurface {
  Eigen::VectorXd gamma;
  std::vector<int> support;
  std::vector<bool> active;

  std::size_t num_active() const {
    std::size_t k = 0;
    for (bool b : active) k += b ? 1 : 0;
    return k;
  }
};

GoldSurface gold_surface(const std::vector<Instance>& pool,
                         const AttributeSpace& space, int min_support = 5);

Eigen::VectorXd one_hot_dist(std::size_t arm_index, std::size_t num_arms);

}  // namespace accsurf
