#include "accsurf/space.hpp"

#include <stdexcept>

namespace accsurf {

AttributeSpace::AttributeSpace(std::vector<std::string> names,
                               std::vector<int> cardinalities)
    : names_(std::move(names)), cardinalities_(std::move(cardinalities)) {
  if (cardinalities_.empty()) {
    throw std::invalid_argument("AttributeSpace: need at least one attribute");
  }
  if (names_.size() != cardinalities_.size()) {
    throw std::invalid_argument("AttributeSpace: names/cardinalities mismatch");
  }
  std::size_t total = 1;
  for (int c : cardinalities_) {
    if (c < 2) throw std::invalid_argument("AttributeSpace: cardinality < 2");
    if (total > kArmCap / static_cast<std::size_t>(c)) {
      throw std::overflow_error("AttributeSpace: arm count exceeds cap");
    }
    total *= static_cast<std::size_t>(c);
    onehot_width_ += c;
  }
  if (total > kArmCap) {
    throw std::overflow_error("AttributeSpace: arm count exceeds cap");
  }
  num_arms_ = total;
  // Lexicographic order: the last attribute varies fastest.
  strides_.assign(cardinalities_.size(), 1);
  for (int k = static_cast<int>(cardinalities_.size()) - 2; k >= 0; --k) {
    strides_[k] = strides_[k + 1] * static_cast<std::size_t>(cardinalities_[k + 1]);
  }
}

std::size_t AttributeSpace::arm_index(const Arm& arm) const {
  if (arm.size() != cardinalities_.size()) {
    throw std::invalid_argument("arm_index: wrong arm length");
  }
  std::size_t idx = 0;
  for (std::size_t k = 0; k < arm.size(); ++k) {
    if (arm[k] < 0 || arm[k] >= cardinalities_[k]) {
      throw std::out_of_range("arm_index: value out of range");
    }
    idx += strides_[k] * static_cast<std::size_t>(arm[k]);
  }
  return idx;
}

Arm AttributeSpace::index_to_arm(std::size_t index) const {
  if (index >= num_arms_) throw std::out_of_range("index_to_arm: bad index");
  Arm arm(cardinalities_.size());
  for (std::size_t k = 0; k < cardinalities_.size(); ++k) {
    arm[k] = static_cast<int>(index / strides_[k]);
    index %= strides_[k];
  }
  return arm;
}

Eigen::VectorXd AttributeSpace::onehot(const Arm& arm) const {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(onehot_width_);
  int offset = 0;
  for (std::size_t k = 0; k < arm.size(); ++k) {
    v[offset + arm[k]] = 1.0;
    offset += cardinalities_[k];
  }
  return v;
}

Eigen::MatrixXd AttributeSpace::onehot_matrix() const {
  Eigen::MatrixXd x(num_arms_, onehot_width_);
  for (std::size_t a = 0; a < num_arms_; ++a) {
    x.row(a) = onehot(index_to_arm(a)).transpose();
  }
  return x;
}

std::vector<Arm> enumerate_arms(const AttributeSpace& space) {
  std::vector<Arm> arms;
  arms.reserve(space.num_arms());
  for (std::size_t i = 0; i < space.num_arms(); ++i) {
    arms.push_back(space.index_to_arm(i));
  }
  return arms;
}

void accumulate(ArmCounts& counts, const Eigen::VectorXd& arm_dist, int correct) {
  if (static_cast<std::size_t>(arm_dist.size()) != counts.size()) {
    throw std::invalid_argument("accumulate: distribution size mismatch");
  }
  if ((arm_dist.array() < 0.0).any()) {
    throw std::invalid_argument("accumulate: negative arm probability");
  }
  if (std::abs(arm_dist.sum() - 1.0) > 1e-6) {
    throw std::invalid_argument("accumulate: arm distribution must sum to 1");
  }
  if (correct) {
    counts.c1 += arm_dist;
  } else {
    counts.c0 += arm_dist;
  }
}

void warm_start(ArmCounts& counts, double kappa, double lambda) {
  if (lambda <= 0.0) throw std::invalid_argument("warm_start: lambda <= 0");
  if (kappa < 0.0 || kappa > 1.0) {
    throw std::invalid_argument("warm_start: kappa outside [0,1]");
  }
  if (counts.total_mass() != 0.0) {
    throw std::invalid_argument("warm_start: counts not fresh");
  }
  counts.c1.setConstant(lambda * kappa);
  counts.c0.setConstant(lambda * (1.0 - kappa));
}

GoldSurface gold_surface(const std::vector<Instance>& pool,
                         const AttributeSpace& space, int min_support) {
  GoldSurface gs;
  gs.gamma = Eigen::VectorXd::Zero(space.num_arms());
  gs.support.assign(space.num_arms(), 0);
  gs.active.assign(space.num_arms(), false);
  Eigen::VectorXd hits = Eigen::VectorXd::Zero(space.num_arms());
  for (const auto& inst : pool) {
    std::size_t a = space.arm_index(inst.true_arm);
    gs.support[a] += 1;
    hits[a] += inst.hidden_correct;
  }
  for (std::size_t a = 0; a < space.num_arms(); ++a) {
    if (gs.support[a] >= min_support) {
      gs.active[a] = true;
      gs.gamma[a] = hits[a] / gs.support[a];
    }
  }
  return gs;
}

Eigen::VectorXd one_hot_dist(std::size_t arm_index, std::size_t num_arms) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(num_arms);
  v[arm_index] = 1.0;
  return v;
}

}  // namespace accsurf
