#include "accsurf/world.hpp"

#include <cmath>
#include <stdexcept>

#include "accsurf/special.hpp"

namespace accsurf {

std::vector<Eigen::VectorXd> SyntheticWorld::attribute_marginals() const {
  std::vector<Eigen::VectorXd> marg;
  const auto& cards = space.cardinalities();
  for (int c : cards) marg.push_back(Eigen::VectorXd::Zero(c));
  for (std::size_t a = 0; a < space.num_arms(); ++a) {
    Arm arm = space.index_to_arm(a);
    for (std::size_t k = 0; k < arm.size(); ++k) {
      marg[k][arm[k]] += prior[a];
    }
  }
  return marg;
}

const std::vector<int>& appendix_c_observation_plan() {
  static const std::vector<int> plan = {1, 1, 1, 20, 20, 20, 20, 1, 1, 1};
  return plan;
}

SyntheticWorld make_appendix_c_world() {
  SyntheticWorld w{AttributeSpace({"bucket"}, {10}), {}, {}, {}, 1.0, 0};
  w.gamma.resize(10);
  w.gamma << 0.1, 0.3, 0.5, 0.7, 0.8, 0.9, 0.6, 0.4, 0.3, 0.2;
  const auto& plan = appendix_c_observation_plan();
  double total = 0.0;
  for (int n : plan) total += n;
  w.prior.resize(10);
  for (int a = 0; a < 10; ++a) w.prior[a] = plan[a] / total;
  w.confusion.push_back(Eigen::MatrixXd::Identity(10, 10));
  return w;
}

ArmCounts appendix_c_counts(const SyntheticWorld& world, Rng& rng) {
  const auto& plan = appendix_c_observation_plan();
  ArmCounts counts(world.space.num_arms());
  for (std::size_t a = 0; a < counts.size(); ++a) {
    for (int i = 0; i < plan[a]; ++i) {
      if (rng.bernoulli(world.gamma[a])) {
        counts.c1[a] += 1.0;
      } else {
        counts.c0[a] += 1.0;
      }
    }
  }
  return counts;
}

namespace {

Eigen::MatrixXd uniform_confusion(int cardinality, double error_rate) {
  Eigen::MatrixXd c(cardinality, cardinality);
  c.setConstant(cardinality > 1 ? error_rate / (cardinality - 1) : 0.0);
  c.diagonal().setConstant(1.0 - error_rate);
  return c;
}

// Sample of a smooth random field over arm feature vectors via random
// Fourier features of an RBF with length `smoothness`.
Eigen::VectorXd smooth_field(const Eigen::MatrixXd& feats, double smoothness,
                             Rng& rng) {
  const int n_features = 256;
  const Eigen::Index d = feats.cols();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(feats.rows());
  for (int j = 0; j < n_features; ++j) {
    Eigen::VectorXd omega(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      omega[i] = rng.normal() / smoothness;
    }
    double phase = rng.uniform(0.0, 2.0 * M_PI);
    double weight = rng.normal();
    out.array() += weight * ((feats * omega).array() + phase).cos() *
                   std::sqrt(2.0 / n_features);
  }
  return out;
}

}  // namespace

SyntheticWorld sample_world(const WorldSpec& spec, Rng& rng) {
  if (spec.attribute_names.size() != spec.cardinalities.size()) {
    throw std::invalid_argument("sample_world: names/cardinalities mismatch");
  }
  if (!spec.error_rates.empty() &&
      spec.error_rates.size() != spec.cardinalities.size()) {
    throw std::invalid_argument("sample_world: error_rates size mismatch");
  }
  if (spec.smoothness <= 0.0 || spec.prior_concentration <= 0.0 ||
      spec.logit_temperature <= 0.0) {
    throw std::invalid_argument("sample_world: non-positive scale parameter");
  }
  SyntheticWorld w{AttributeSpace(spec.attribute_names, spec.cardinalities),
                   {}, {}, {}, spec.logit_temperature, 0};
  const std::size_t n = w.space.num_arms();

  // Random projection of one-hot encodings; arms sharing attribute values
  // stay close, so the field inherits the attribute structure.
  const int d = 6;
  Eigen::MatrixXd proj(w.space.onehot_width(), d);
  for (Eigen::Index i = 0; i < proj.rows(); ++i) {
    for (int j = 0; j < d; ++j) proj(i, j) = rng.normal() / std::sqrt(2.0);
  }
  Eigen::MatrixXd feats = w.space.onehot_matrix() * proj;
  Eigen::VectorXd field = smooth_field(feats, spec.smoothness, rng);
  w.gamma = field.unaryExpr([](double h) { return sigmoid(1.5 * h); });

  // Arm prior: Dirichlet draw tilted by random pairwise attribute potentials.
  Eigen::VectorXd logtilt = Eigen::VectorXd::Zero(n);
  const auto& cards = spec.cardinalities;
  if (spec.coupling != 0.0 && cards.size() > 1) {
    std::vector<std::vector<Eigen::MatrixXd>> tables(cards.size());
    for (std::size_t k = 0; k < cards.size(); ++k) {
      for (std::size_t k2 = k + 1; k2 < cards.size(); ++k2) {
        Eigen::MatrixXd t(cards[k], cards[k2]);
        for (int i = 0; i < cards[k]; ++i) {
          for (int j = 0; j < cards[k2]; ++j) t(i, j) = rng.normal();
        }
        tables[k].push_back(t);
      }
    }
    for (std::size_t a = 0; a < n; ++a) {
      Arm arm = w.space.index_to_arm(a);
      double q = 0.0;
      for (std::size_t k = 0; k < cards.size(); ++k) {
        for (std::size_t k2 = k + 1; k2 < cards.size(); ++k2) {
          q += tables[k][k2 - k - 1](arm[k], arm[k2]);
        }
      }
      logtilt[a] = spec.coupling * q;
    }
  }
  w.prior.resize(n);
  for (std::size_t a = 0; a < n; ++a) {
    double g = rng.gamma(spec.prior_concentration, 1.0);
    w.prior[a] = std::max(g, 1e-12) * std::exp(logtilt[a]);
  }
  w.prior /= w.prior.sum();

  for (std::size_t k = 0; k < cards.size(); ++k) {
    double e = spec.error_rates.empty() ? 0.0 : spec.error_rates[k];
    w.confusion.push_back(uniform_confusion(cards[k], e));
  }
  return w;
}

namespace {

Instance sample_instance_impl(const SyntheticWorld& world,
                              const std::vector<Eigen::VectorXd>& marginals,
                              Rng& rng) {
  const auto& space = world.space;
  std::vector<double> weights(world.prior.data(),
                              world.prior.data() + world.prior.size());
  std::size_t arm_idx = rng.categorical(weights);
  Arm arm = space.index_to_arm(arm_idx);

  Instance inst;
  inst.true_arm = arm;
  for (std::size_t k = 0; k < space.num_attributes(); ++k) {
    const Eigen::MatrixXd& conf = world.confusion[k];
    // Observe a noisy value, then emit the Bayes posterior over true values.
    std::vector<double> row(conf.cols());
    for (Eigen::Index j = 0; j < conf.cols(); ++j) row[j] = conf(arm[k], j);
    int obs = static_cast<int>(rng.categorical(row));
    Eigen::VectorXd post(conf.rows());
    for (Eigen::Index v = 0; v < conf.rows(); ++v) {
      post[v] = conf(v, obs) * std::max(marginals[k][v], 1e-12);
    }
    post /= post.sum();
    Eigen::VectorXd logits =
        post.array().log().matrix() / world.logit_temperature;
    // Re-normalize in log space so rows stay proper log-probabilities.
    double mx = logits.maxCoeff();
    double lse = mx + std::log((logits.array() - mx).exp().sum());
    inst.logits.push_back(Eigen::VectorXd((logits.array() - lse).matrix()));
  }
  inst.hidden_correct = rng.bernoulli(world.gamma[arm_idx]) ? 1 : 0;
  return inst;
}

}  // namespace

Instance sample_instance(const SyntheticWorld& world, Rng& rng) {
  return sample_instance_impl(world, world.attribute_marginals(), rng);
}

std::vector<Instance> sample_pool(const SyntheticWorld& world, std::size_t n,
                                  Rng& rng) {
  auto marginals = world.attribute_marginals();
  std::vector<Instance> pool;
  pool.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    pool.push_back(sample_instance_impl(world, marginals, rng));
  }
  return pool;
}

int oracle_label(const SyntheticWorld& world, Instance& instance) {
  (void)world;
  instance.correctness = instance.hidden_correct;
  return instance.hidden_correct;
}

}  // namespace accsurf
