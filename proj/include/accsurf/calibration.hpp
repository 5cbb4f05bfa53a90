#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "accsurf/autodiff.hpp"
#include "accsurf/rng.hpp"
#include "accsurf/space.hpp"

namespace accsurf {

enum class CalibrationMode { Raw, Temp, Full };

std::string to_string(CalibrationMode mode);
CalibrationMode calibration_mode_from_string(const std::string& name);

struct CalibrationConfig {
  int hidden = 32;
  int batch_per_source = 32;  // per-step draws from seed and from unlabeled
  double lr = 1e-3;
  int max_steps = 1500;
  int eval_every = 20;
  int patience = 20;
  double holdout_fraction = 0.1;
};

// Joint attribute-uncertainty model: log P(a|x) = sum_k t_k log M_k(a_k|x)
// + N(a) - log Z_x, with Z_x summed exactly over the arm universe.
class CalibrationModel {
 public:
  // Identity model: t = 1, N = 0. Also the Raw-mode readout.
  static CalibrationModel identity(const AttributeSpace& space,
                                   CalibrationMode mode = CalibrationMode::Raw);

  // MLE on seed (gold arms) plus unlabeled data (predictor-argmax arms as
  // pseudo-gold), batched 50/50, with the joint-potential term masked on
  // alternating steps and early stopping on a held-out slice of seed.
  static CalibrationModel fit(const std::vector<Instance>& seed,
                              const std::vector<Instance>& unlabeled,
                              const AttributeSpace& space, CalibrationMode mode,
                              const CalibrationConfig& cfg, std::uint64_t seed_value);

  // Calibrated log P(a|x) over all arms; log-sum-exps to zero. A Raw model
  // reduces to the normalized product of the raw attribute probabilities.
  Eigen::VectorXd joint_logprob(const Instance& instance) const;

  // Soft assignment used when accumulating counts. Raw mode assigns the
  // one-hot arm of the per-attribute argmax predictions.
  Eigen::VectorXd arm_distribution(const Instance& instance) const;

  double mean_nll(const std::vector<Instance>& instances) const;

  CalibrationMode mode() const { return mode_; }
  std::vector<double> temperatures() const;

  CalibrationModel(CalibrationModel&&) = default;
  CalibrationModel& operator=(CalibrationModel&&) = default;

 private:
  CalibrationModel() = default;
  struct Impl;
  std::unique_ptr<Impl> impl_;
  CalibrationMode mode_ = CalibrationMode::Raw;
  const AttributeSpace* space_ = nullptr;
};

Arm argmax_arm(const Instance& instance);

}  // namespace accsurf
