#include "accsurf/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "accsurf/kernel.hpp"
#include "accsurf/special.hpp"

namespace accsurf {

using ad::Mat;
using ad::Var;

std::string to_string(CalibrationMode mode) {
  switch (mode) {
    case CalibrationMode::Raw: return "Raw";
    case CalibrationMode::Temp: return "Temp";
    case CalibrationMode::Full: return "Full";
  }
  return "?";
}

CalibrationMode calibration_mode_from_string(const std::string& name) {
  if (name == "Raw") return CalibrationMode::Raw;
  if (name == "Temp") return CalibrationMode::Temp;
  if (name == "Full") return CalibrationMode::Full;
  throw std::invalid_argument("unknown calibration mode: " + name);
}

Arm argmax_arm(const Instance& instance) {
  Arm arm(instance.logits.size());
  for (std::size_t k = 0; k < instance.logits.size(); ++k) {
    Eigen::Index best = 0;
    instance.logits[k].maxCoeff(&best);
    arm[k] = static_cast<int>(best);
  }
  return arm;
}

struct CalibrationModel::Impl {
  ad::ParamStore store;
  ad::Param* t_free = nullptr;        // K x 1
  EmbeddingNet potential;             // one-hot arm -> scalar
  std::vector<Mat> select;            // per attribute: num_arms x card_k
  Mat arm_onehots;                    // num_arms x onehot_width
  bool use_potential = false;

  Eigen::VectorXd temperatures() const {
    Eigen::VectorXd t = t_free->value.col(0);
    return t.unaryExpr([](double v) { return softplus(v); });
  }

  Eigen::VectorXd potential_scores() const {
    if (!use_potential) return Eigen::VectorXd::Zero(arm_onehots.rows());
    return potential.forward_value(arm_onehots).col(0);
  }

  // Unnormalized scores for a batch of instances: batch x num_arms.
  Mat batch_scores_value(const std::vector<const Instance*>& batch,
                         bool with_potential) const {
    Eigen::VectorXd t = temperatures();
    Mat scores = Mat::Zero(batch.size(), arm_onehots.rows());
    for (std::size_t k = 0; k < select.size(); ++k) {
      Mat logm(batch.size(), select[k].cols());
      for (std::size_t i = 0; i < batch.size(); ++i) {
        logm.row(i) = batch[i]->logits[k].transpose();
      }
      scores += t[k] * (logm * select[k].transpose());
    }
    if (with_potential && use_potential) {
      scores.rowwise() += potential_scores().transpose();
    }
    return scores;
  }
};

CalibrationModel CalibrationModel::identity(const AttributeSpace& space,
                                            CalibrationMode mode) {
  CalibrationModel model;
  model.mode_ = mode;
  model.space_ = &space;
  model.impl_ = std::make_unique<Impl>();
  auto& impl = *model.impl_;
  impl.t_free = &impl.store.add(
      "t", Mat::Constant(space.num_attributes(), 1, softplus_inv(1.0)));
  impl.arm_onehots = space.onehot_matrix();
  impl.use_potential = false;
  const auto& cards = space.cardinalities();
  int offset = 0;
  for (std::size_t k = 0; k < cards.size(); ++k) {
    impl.select.push_back(
        impl.arm_onehots.middleCols(offset, cards[k]));
    offset += cards[k];
  }
  return model;
}

Eigen::VectorXd CalibrationModel::joint_logprob(const Instance& instance) const {
  if (instance.logits.size() != space_->num_attributes()) {
    throw std::invalid_argument("joint_logprob: instance/space mismatch");
  }
  std::vector<const Instance*> batch = {&instance};
  Mat scores = impl_->batch_scores_value(batch, /*with_potential=*/true);
  Eigen::VectorXd row = scores.row(0);
  double mx = row.maxCoeff();
  double lse = mx + std::log((row.array() - mx).exp().sum());
  return row.array() - lse;
}

Eigen::VectorXd CalibrationModel::arm_distribution(const Instance& instance) const {
  if (mode_ == CalibrationMode::Raw) {
    return one_hot_dist(space_->arm_index(argmax_arm(instance)),
                        space_->num_arms());
  }
  return joint_logprob(instance).array().exp();
}

double CalibrationModel::mean_nll(const std::vector<Instance>& instances) const {
  double total = 0.0;
  for (const auto& inst : instances) {
    Eigen::VectorXd lp = joint_logprob(inst);
    total -= lp[space_->arm_index(inst.true_arm)];
  }
  return total / static_cast<double>(instances.size());
}

std::vector<double> CalibrationModel::temperatures() const {
  Eigen::VectorXd t = impl_->temperatures();
  return {t.data(), t.data() + t.size()};
}

namespace {

struct BatchGraph {
  Var nll;
};

// Mean NLL of the gold arms for a batch, as a graph over (t, potential).
BatchGraph build_batch_graph(CalibrationModel::Impl& impl,
                             const std::vector<const Instance*>& batch,
                             const std::vector<std::size_t>& gold_arms,
                             bool with_potential) {
  const Eigen::Index n_arms = impl.arm_onehots.rows();
  Var t = ad::softplus_(ad::leaf(*impl.t_free));  // K x 1
  Var scores;
  for (std::size_t k = 0; k < impl.select.size(); ++k) {
    Mat logm(batch.size(), impl.select[k].cols());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      logm.row(i) = batch[i]->logits[k].transpose();
    }
    Var contrib = ad::matmul(ad::constant(std::move(logm)),
                             ad::constant(Mat(impl.select[k].transpose())));
    // Scale by t_k: pick out component k as a 1x1 node.
    Mat pick = Mat::Zero(1, impl.select.size());
    pick(0, k) = 1.0;
    Var tk = ad::matmul(ad::constant(std::move(pick)), t);
    contrib = ad::mul_scalar(contrib, tk);
    scores = scores.defined() ? ad::add(scores, contrib) : contrib;
  }
  if (with_potential) {
    Var pot = impl.potential.forward(impl.arm_onehots);  // num_arms x 1
    scores = ad::add(scores, ad::rep_rows(ad::transpose(pot),
                                          static_cast<Eigen::Index>(batch.size())));
  }
  Mat target = Mat::Zero(batch.size(), n_arms);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    target(i, gold_arms[i]) = 1.0;
  }
  Var gold = ad::total_sum(ad::mul(ad::constant(std::move(target)), scores));
  Var lse = ad::total_sum(ad::logsumexp_rows(scores));
  BatchGraph g;
  g.nll = ad::scale(ad::sub(lse, gold), 1.0 / static_cast<double>(batch.size()));
  return g;
}

}  // namespace

CalibrationModel CalibrationModel::fit(const std::vector<Instance>& seed,
                                       const std::vector<Instance>& unlabeled,
                                       const AttributeSpace& space,
                                       CalibrationMode mode,
                                       const CalibrationConfig& cfg,
                                       std::uint64_t seed_value) {
  if (seed.empty()) throw std::invalid_argument("fit_calibration: empty seed");
  CalibrationModel model = identity(space, mode);
  if (mode == CalibrationMode::Raw) return model;

  auto& impl = *model.impl_;
  Rng rng(Rng::splitmix(seed_value ^ 0xca11b7a7e));
  if (mode == CalibrationMode::Full) {
    impl.potential = EmbeddingNet::create(impl.store, space.onehot_width(),
                                          {cfg.hidden}, 1, rng);
    impl.use_potential = true;
  }

  // Held-out slice of seed for early stopping.
  std::vector<std::size_t> order(seed.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.uniform_int(0, i - 1));
    std::swap(order[i - 1], order[j]);
  }
  std::vector<Instance> holdout, train;
  if (seed.size() == 1) {
    holdout = train = seed;
  } else {
    std::size_t n_holdout = std::clamp<std::size_t>(
        static_cast<std::size_t>(cfg.holdout_fraction * seed.size()), 1,
        seed.size() - 1);
    for (std::size_t i = 0; i < order.size(); ++i) {
      (i < n_holdout ? holdout : train).push_back(seed[order[i]]);
    }
  }

  std::vector<std::size_t> seed_gold, unlabeled_gold;
  for (const auto& inst : train) {
    seed_gold.push_back(space.arm_index(inst.true_arm));
  }
  for (const auto& inst : unlabeled) {
    unlabeled_gold.push_back(space.arm_index(argmax_arm(inst)));
  }

  auto params = impl.store.all();
  ad::Adam opt(ad::AdamConfig{.lr = cfg.lr});

  double best_nll = model.mean_nll(holdout);
  std::vector<Mat> best_values;
  for (auto* p : params) best_values.push_back(p->value);
  int evals_since_best = 0;

  for (int step = 0; step < cfg.max_steps; ++step) {
    std::vector<const Instance*> batch;
    std::vector<std::size_t> gold;
    for (int i = 0; i < cfg.batch_per_source; ++i) {
      std::size_t j = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(train.size()) - 1));
      batch.push_back(&train[j]);
      gold.push_back(seed_gold[j]);
    }
    for (int i = 0; i < cfg.batch_per_source && !unlabeled.empty(); ++i) {
      std::size_t j = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(unlabeled.size()) - 1));
      batch.push_back(&unlabeled[j]);
      gold.push_back(unlabeled_gold[j]);
    }
    const bool with_potential =
        mode == CalibrationMode::Full && (step % 2 == 0);
    BatchGraph g = build_batch_graph(impl, batch, gold, with_potential);
    ad::backward(g.nll);
    opt.step(params);

    if ((step + 1) % cfg.eval_every == 0) {
      double nll = model.mean_nll(holdout);
      if (nll < best_nll - 1e-9) {
        best_nll = nll;
        for (std::size_t i = 0; i < params.size(); ++i) {
          best_values[i] = params[i]->value;
        }
        evals_since_best = 0;
      } else if (++evals_since_best >= cfg.patience) {
        break;
      }
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i]->value = best_values[i];
  }
  return model;
}

}  // namespace accsurf
