#pragma once

#include <functional>
#include <span>
#include <vector>

#include "accsurf/autodiff.hpp"
#include "accsurf/kernel.hpp"
#include "accsurf/rng.hpp"

namespace accsurf {

// Variational inducing-point state for one latent GP. The variational
// covariance is parameterized by a free lower factor whose diagonal runs
// through softplus, so Sigma = L L^T stays SPD by construction.
struct SvgpState {
  ad::Param* Z = nullptr;       // m x e inducing locations (trainable)
  ad::Param* mu = nullptr;      // m x 1 variational mean
  ad::Param* L_free = nullptr;  // m x m free lower factor
  KernelParams kernel;

  int m() const { return static_cast<int>(Z->value.rows()); }

  static SvgpState create(ad::ParamStore& store, const std::string& prefix,
                          const ad::Mat& z_init, KernelParams kernel,
                          double init_L_diag = 1.0);

  ad::Var effective_L() const;  // graph path
  ad::Mat effective_L_value() const;
};

// Jitter policy for K_mm: starts at 1e-6 * mean(diag) and escalates x10 up to
// 1e-2 * mean(diag); past that the run aborts.
double pick_jitter(const ad::Mat& kmm);

// KL(N(mu, Sigma) || N(0, Kmm)), closed form.
ad::Var gaussian_kl(const ad::Var& mu, const ad::Var& sigma,
                    const ad::Var& kmm);
double gaussian_kl_value(const ad::Mat& mu, const ad::Mat& sigma,
                         const ad::Mat& kmm);

struct PosteriorGaussian {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;
};

// Marginal predictive q(f) at the given embedding rows:
//   mean = A mu,  cov = K_nn + A (Sigma - K_mm) A^T,  A = K_nm K_mm^{-1}.
// Only the diagonal of the covariance is produced; variances are clamped at
// 1e-12.
struct PredictiveGraph {
  ad::Var mean;  // n x 1
  ad::Var var;   // n x 1
  ad::Var kl;    // 1 x 1
};
PredictiveGraph svgp_predict_graph(const SvgpState& state,
                                   const ad::Var& embeds);
PosteriorGaussian svgp_predict_value(const SvgpState& state,
                                     const ad::Mat& embeds);

// Per-arm log-likelihood hook: receives one (n x mc_samples) latent sample
// matrix per state and returns the total log-likelihood over all samples.
using LoglikFn = std::function<ad::Var(const std::vector<ad::Var>&)>;

struct ElboParts {
  ad::Var elbo;
  double loglik = 0.0;  // per-sample average, for traces
  std::vector<double> kls;
};

// Monte-Carlo ELBO with reparameterized marginal samples and frozen noise:
// one noise matrix (n x S) per state.
ElboParts elbo(std::span<const SvgpState* const> states,
               const EmbeddingNet& net, const ad::Mat& inputs,
               const std::vector<ad::Mat>& noise, const LoglikFn& loglik);

std::vector<ad::Mat> draw_elbo_noise(Rng& rng, std::size_t n_states,
                                     Eigen::Index n, Eigen::Index mc_samples);

struct FitSchedule {
  int steps = 1000;
  double lr = 1e-3;
  int mc_samples = 16;
};

struct TraceRow {
  int step = 0;
  double elbo = 0.0;
  double kl_f = 0.0;
  double kl_g = 0.0;
  double loglik = 0.0;
};

// Runs Adam on -elbo; optimizer moments persist in `opt` across calls.
std::vector<TraceRow> svgp_fit(std::span<const SvgpState* const> states,
                               const EmbeddingNet& net, const ad::Mat& inputs,
                               const LoglikFn& loglik,
                               const FitSchedule& schedule,
                               std::span<ad::Param* const> params,
                               ad::Adam& opt, Rng& rng);

}  // namespace accsurf
