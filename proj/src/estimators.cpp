#include "accsurf/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "accsurf/special.hpp"

namespace accsurf {

using ad::Mat;
using ad::Var;

std::string to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::CPredictor: return "CPredictor";
    case EstimatorKind::BetaI: return "BetaI";
    case EstimatorKind::BernGP: return "BernGP";
    case EstimatorKind::BetaGP: return "BetaGP";
    case EstimatorKind::BetaGP_SL: return "BetaGP-SL";
    case EstimatorKind::BetaGP_SLP: return "BetaGP-SLP";
    case EstimatorKind::BetaGP_AB: return "BetaGP-AB";
  }
  return "?";
}

EstimatorKind estimator_kind_from_string(const std::string& name) {
  if (name == "CPredictor") return EstimatorKind::CPredictor;
  if (name == "BetaI" || name == "Beta-I") return EstimatorKind::BetaI;
  if (name == "BernGP") return EstimatorKind::BernGP;
  if (name == "BetaGP") return EstimatorKind::BetaGP;
  if (name == "BetaGP-SL") return EstimatorKind::BetaGP_SL;
  if (name == "BetaGP-SLP") return EstimatorKind::BetaGP_SLP;
  if (name == "BetaGP-AB") return EstimatorKind::BetaGP_AB;
  throw std::invalid_argument("unknown estimator kind: " + name);
}

double beta_binomial_loglik(double phi, double psi, double c, double n) {
  if (n < c) throw std::invalid_argument("beta_binomial_loglik: n < c");
  phi = std::clamp(phi, kPhiMin, kPhiMax);
  psi = std::clamp(psi, kPsiMin, kPsiMax);
  const double alpha = phi * psi;
  const double beta = (1.0 - phi) * psi;
  return std::lgamma(alpha + c) + std::lgamma(beta + n - c) -
         std::lgamma(psi + n) - std::lgamma(alpha) - std::lgamma(beta) +
         std::lgamma(psi);
}

double bernoulli_gp_loglik(double f, double c, double n) {
  // log sigmoid(f) = -softplus(-f); log(1 - sigmoid(f)) = -softplus(f)
  return -c * softplus(-f) - (n - c) * softplus(f);
}

double dirichlet_scale_loglik(const Eigen::VectorXd& psi,
                              const Eigen::VectorXd& counts) {
  const double total = counts.sum();
  if (!(total > 0.0)) {
    throw std::invalid_argument("dirichlet_scale_loglik: empty counts");
  }
  Eigen::VectorXd p = (counts / total).cwiseMax(1e-8);
  p /= p.sum();
  double out = std::lgamma(psi.sum());
  for (Eigen::Index a = 0; a < psi.size(); ++a) {
    out += (psi[a] - 1.0) * std::log(p[a]) - std::lgamma(psi[a]);
  }
  return out;
}

ArmCounts pool_counts(const ArmCounts& counts, const NeighborTable& neighbors,
                      double threshold) {
  if (neighbors.size() != counts.size()) {
    throw std::invalid_argument("pool_counts: neighbor table size mismatch");
  }
  ArmCounts pooled = counts;
  for (std::size_t a = 0; a < counts.size(); ++a) {
    if (counts.n(a) >= threshold) continue;
    double c1 = 0.0, c0 = 0.0;
    for (const auto& [j, w] : neighbors[a]) {
      c1 += w * counts.c1[j];
      c0 += w * counts.c0[j];
    }
    pooled.c1[a] = c1;
    pooled.c0[a] = c0;
  }
  return pooled;
}

namespace {

Eigen::VectorXd floored_proportions(const ArmCounts& counts) {
  Eigen::VectorXd totals = counts.totals();
  Eigen::VectorXd p = (totals / totals.sum()).cwiseMax(1e-8);
  p /= p.sum();
  return p;
}

}  // namespace

struct Estimator::GpModel {
  ad::ParamStore store;
  EmbeddingNet net;
  KernelParams k1, k2;
  std::vector<SvgpState> states;  // [f] or [f, g]
  std::vector<ad::Param*> params;
  ad::Adam opt;
  Mat inputs;      // one-hot arm encodings
  ArmCounts data;  // counts entering the likelihood (pooled for SLP)
  ArmCounts raw;   // counts entering the Dirichlet term
  Rng train_rng{0};

  GpModel() : data(0), raw(0) {}

  // Builds the per-kind likelihood over (n x S) latent sample matrices.
  LoglikFn make_loglik(EstimatorKind kind, double dirichlet_weight) {
    return [this, kind, dirichlet_weight](const std::vector<Var>& samples) {
      const Eigen::Index n = data.c1.size();
      const Eigen::Index s = samples.front().cols();
      Mat c_rep = data.c1.replicate(1, s);
      Mat n_rep = data.totals().replicate(1, s);
      Var cc = ad::constant(std::move(c_rep));
      Var nn = ad::constant(std::move(n_rep));

      if (kind == EstimatorKind::BernGP) {
        const Var& f = samples[0];
        Var ll = ad::sub(ad::neg(ad::mul(cc, ad::softplus_(ad::neg(f)))),
                         ad::mul(ad::sub(nn, cc), ad::softplus_(f)));
        return ad::total_sum(ll);
      }

      Var alpha, beta;
      Var psi;
      if (kind == EstimatorKind::BetaGP_AB) {
        alpha = ad::clamp(ad::softplus_(samples[0]), kPsiMin, kPsiMax);
        beta = ad::clamp(ad::softplus_(samples[1]), kPsiMin, kPsiMax);
        psi = ad::add(alpha, beta);
      } else {
        Var phi = ad::clamp(ad::sigmoid_(samples[0]), kPhiMin, kPhiMax);
        psi = ad::clamp(ad::softplus_(samples[1]), kPsiMin, kPsiMax);
        alpha = ad::mul(phi, psi);
        beta = ad::mul(ad::sub(ad::constant(Mat(Mat::Ones(n, s))), phi), psi);
      }
      Var ll = ad::add(
          ad::sub(ad::add(ad::lgamma_(ad::add(alpha, cc)),
                          ad::lgamma_(ad::add(beta, ad::sub(nn, cc)))),
                  ad::add(ad::lgamma_(ad::add(psi, nn)),
                          ad::add(ad::lgamma_(alpha), ad::lgamma_(beta)))),
          ad::lgamma_(psi));
      Var total = ad::total_sum(ll);

      if (kind == EstimatorKind::BetaGP_SL || kind == EstimatorKind::BetaGP_SLP) {
        Eigen::VectorXd p = floored_proportions(raw);
        Mat logp_rep = p.array().log().matrix().replicate(1, s);
        Var term = ad::total_sum(
            ad::sub(ad::mul(ad::add_const(psi, -1.0), ad::constant(std::move(logp_rep))),
                    ad::lgamma_(psi)));
        Var coupling = ad::total_sum(ad::lgamma_(ad::col_sum(psi)));
        total = ad::add(total, ad::scale(ad::add(term, coupling), dirichlet_weight));
      }
      return total;
    };
  }

  std::vector<const SvgpState*> state_ptrs() const {
    std::vector<const SvgpState*> out;
    for (const auto& st : states) out.push_back(&st);
    return out;
  }
};

Estimator Estimator::fit(EstimatorKind kind, const ArmCounts& counts,
                         const AttributeSpace& space,
                         const EstimatorConfig& cfg, std::uint64_t seed) {
  if (counts.size() != space.num_arms()) {
    throw std::invalid_argument("fit: counts/space size mismatch");
  }
  Estimator est;
  est.kind_ = kind;
  est.cfg_ = cfg;
  est.space_ = &space;
  est.counts_ = counts;

  if (kind == EstimatorKind::CPredictor) {
    est.global_phi_ = counts.c1.sum() / counts.total_mass();
    return est;
  }
  if (kind == EstimatorKind::BetaI) {
    return est;
  }

  auto gp = std::make_unique<GpModel>();
  Rng rng(Rng::splitmix(seed));
  gp->net = EmbeddingNet::create(gp->store, space.onehot_width(), cfg.hidden,
                                 cfg.embed_dim, rng);
  gp->k1 = KernelParams::create(gp->store, "k1");
  gp->k2 = KernelParams::create(gp->store, "k2");
  gp->inputs = space.onehot_matrix();
  gp->opt = ad::Adam(ad::AdamConfig{.lr = cfg.lr});
  gp->train_rng = rng.fork(0x5eed);

  // Inducing locations start at the embeddings of m distinct arms.
  const std::size_t n_arms = space.num_arms();
  const std::size_t m = std::min<std::size_t>(cfg.inducing, n_arms);
  std::vector<std::size_t> pick(n_arms);
  std::iota(pick.begin(), pick.end(), 0);
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t j = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(i),
                        static_cast<std::int64_t>(n_arms - 1)));
    std::swap(pick[i], pick[j]);
  }
  Mat embeds = gp->net.forward_value(gp->inputs);
  Mat z0(m, cfg.embed_dim);
  for (std::size_t i = 0; i < m; ++i) z0.row(i) = embeds.row(pick[i]);

  gp->states.push_back(SvgpState::create(gp->store, "f", z0, gp->k1));
  if (kind != EstimatorKind::BernGP) {
    gp->states.push_back(SvgpState::create(gp->store, "g", z0, gp->k2));
  }
  gp->params = gp->store.all();
  est.gp_ = std::move(gp);

  est.gp_->raw = counts;
  est.gp_->data = (kind == EstimatorKind::BetaGP_SLP)
                      ? pool_counts(counts, est.current_neighbors(),
                                    cfg.pool_threshold)
                      : counts;
  est.run_steps(cfg.warm_steps);
  return est;
}

NeighborTable Estimator::current_neighbors() const {
  Mat embeds = gp_->net.forward_value(gp_->inputs);
  NeighborTable table(space_->num_arms());
  for (std::size_t a = 0; a < space_->num_arms(); ++a) {
    table[a] = kernel_neighbors(a, embeds, gp_->k1.s(), gp_->k1.l(),
                                static_cast<std::size_t>(cfg_.pool_k));
  }
  return table;
}

void Estimator::run_steps(int steps) {
  auto states = gp_->state_ptrs();
  FitSchedule sched;
  sched.steps = steps;
  sched.lr = cfg_.lr;
  sched.mc_samples = cfg_.mc_train;
  auto rows = svgp_fit(states, gp_->net, gp_->inputs,
                       gp_->make_loglik(kind_, cfg_.dirichlet_weight), sched,
                       gp_->params, gp_->opt, gp_->train_rng);
  trace_.insert(trace_.end(), rows.begin(), rows.end());
}

void Estimator::refit(const ArmCounts& counts, int steps) {
  counts_ = counts;
  if (kind_ == EstimatorKind::CPredictor) {
    global_phi_ = counts.c1.sum() / counts.total_mass();
    return;
  }
  if (kind_ == EstimatorKind::BetaI) return;
  gp_->raw = counts;
  gp_->data = (kind_ == EstimatorKind::BetaGP_SLP)
                  ? pool_counts(counts, current_neighbors(), cfg_.pool_threshold)
                  : counts;
  run_steps(steps);
}

PosteriorSummary Estimator::summarize(int mc_samples, Rng& rng) const {
  const std::size_t n = space_->num_arms();
  PosteriorSummary out;
  out.mean.resize(n);
  out.variance.resize(n);
  out.phi.resize(n);
  out.psi.resize(n);

  if (kind_ == EstimatorKind::CPredictor) {
    out.mean.setConstant(global_phi_);
    out.variance.setZero();
    out.phi.setConstant(global_phi_);
    out.psi.setConstant(counts_.total_mass());
    return out;
  }
  if (kind_ == EstimatorKind::BetaI) {
    for (std::size_t a = 0; a < n; ++a) {
      double c1 = counts_.c1[a], c0 = counts_.c0[a], tot = c1 + c0;
      out.mean[a] = c1 / tot;
      out.variance[a] = c1 * c0 / (tot * tot * (tot + 1.0));
      out.phi[a] = out.mean[a];
      out.psi[a] = tot;
    }
    return out;
  }

  Mat embeds = gp_->net.forward_value(gp_->inputs);
  std::vector<PosteriorGaussian> posts;
  for (const auto& st : gp_->states) {
    posts.push_back(svgp_predict_value(st, embeds));
  }
  const int s = mc_samples;

  Mat f_samp(n, s), g_samp(n, s);
  for (std::size_t k = 0; k < posts.size(); ++k) {
    Mat& dst = (k == 0) ? f_samp : g_samp;
    for (std::size_t a = 0; a < n; ++a) {
      double sd = std::sqrt(posts[k].var[a]);
      for (int j = 0; j < s; ++j) {
        dst(a, j) = posts[k].mean[a] + sd * rng.normal();
      }
    }
  }

  for (std::size_t a = 0; a < n; ++a) {
    double mean_acc = 0.0;
    for (int j = 0; j < s; ++j) {
      double phi_j;
      if (kind_ == EstimatorKind::BetaGP_AB) {
        double alpha = std::clamp(softplus(f_samp(a, j)), kPsiMin, kPsiMax);
        double beta = std::clamp(softplus(g_samp(a, j)), kPsiMin, kPsiMax);
        phi_j = alpha / (alpha + beta);
      } else {
        phi_j = std::clamp(sigmoid(f_samp(a, j)), kPhiMin, kPhiMax);
      }
      mean_acc += phi_j;
    }
    const double mean = mean_acc / s;

    double var_acc = 0.0, phi_acc = 0.0, psi_acc = 0.0;
    for (int j = 0; j < s; ++j) {
      double phi_j, psi_j;
      if (kind_ == EstimatorKind::BernGP) {
        phi_j = std::clamp(sigmoid(f_samp(a, j)), kPhiMin, kPhiMax);
        psi_j = 0.0;
        var_acc += (phi_j - mean) * (phi_j - mean);
      } else if (kind_ == EstimatorKind::BetaGP_AB) {
        double alpha = std::clamp(softplus(f_samp(a, j)), kPsiMin, kPsiMax);
        double beta = std::clamp(softplus(g_samp(a, j)), kPsiMin, kPsiMax);
        phi_j = alpha / (alpha + beta);
        psi_j = alpha + beta;
        var_acc += phi_j * (1.0 - phi_j) / (psi_j + 1.0) +
                   (phi_j - mean) * (phi_j - mean);
      } else {
        phi_j = std::clamp(sigmoid(f_samp(a, j)), kPhiMin, kPhiMax);
        psi_j = std::clamp(softplus(g_samp(a, j)), kPsiMin, kPsiMax);
        var_acc += phi_j * (1.0 - phi_j) / (psi_j + 1.0) +
                   (phi_j - mean) * (phi_j - mean);
      }
      phi_acc += phi_j;
      psi_acc += psi_j;
    }
    out.mean[a] = mean;
    out.variance[a] = std::clamp(var_acc / s, 0.0, 0.25);
    out.phi[a] = phi_acc / s;
    out.psi[a] = psi_acc / s;
  }
  return out;
}

double Estimator::kernel_scale(int which) const {
  if (!gp_) throw std::logic_error("kernel_scale: not a GP estimator");
  return which == 1 ? gp_->k1.s() : gp_->k2.s();
}

double Estimator::kernel_length(int which) const {
  if (!gp_) throw std::logic_error("kernel_length: not a GP estimator");
  return which == 1 ? gp_->k1.l() : gp_->k2.l();
}

ad::Mat Estimator::embeddings() const {
  if (!gp_) throw std::logic_error("embeddings: not a GP estimator");
  return gp_->net.forward_value(gp_->inputs);
}

}  // namespace accsurf
