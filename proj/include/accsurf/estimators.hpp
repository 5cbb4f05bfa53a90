#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "accsurf/kernel.hpp"
#include "accsurf/space.hpp"
#include "accsurf/svgp.hpp"

namespace accsurf {

enum class EstimatorKind {
  CPredictor,
  BetaI,
  BernGP,
  BetaGP,
  BetaGP_SL,
  BetaGP_SLP,
  BetaGP_AB,
};

std::string to_string(EstimatorKind kind);
EstimatorKind estimator_kind_from_string(const std::string& name);

// Clamp ranges for the Beta mean/scale transforms.
inline constexpr double kPhiMin = 1e-4;
inline constexpr double kPhiMax = 1.0 - 1e-4;
inline constexpr double kPsiMin = 1e-3;
inline constexpr double kPsiMax = 1e4;

// log integral of rho^c (1-rho)^(n-c) under Beta(rho; phi*psi, (1-phi)*psi),
// i.e. log B(phi*psi + c, (1-phi)*psi + n - c) - log B(phi*psi, (1-phi)*psi).
// Accepts fractional counts; clamps phi/psi to their admissible ranges.
double beta_binomial_loglik(double phi, double psi, double c, double n);

// c * log sigmoid(f) + (n - c) * log(1 - sigmoid(f)).
double bernoulli_gp_loglik(double f, double c, double n);

// Log Dirichlet density of the observed support proportions under
// concentration psi. Zero-count proportions are floored at 1e-8 and the
// vector renormalized.
double dirichlet_scale_loglik(const Eigen::VectorXd& psi,
                              const Eigen::VectorXd& counts);

using NeighborTable = std::vector<std::vector<std::pair<std::size_t, double>>>;

// Arms with n >= threshold keep their counts; the rest get the kernel-weighted
// mean of their neighbors' (c1, c0) pairs.
ArmCounts pool_counts(const ArmCounts& counts, const NeighborTable& neighbors,
                      double threshold = 5.0);

struct EstimatorConfig {
  int embed_dim = 20;
  std::vector<int> hidden = {32, 32};
  int inducing = 50;
  int warm_steps = 1000;
  int round_steps = 50;
  double lr = 1e-3;
  int mc_train = 16;
  int mc_summary = 256;
  double dirichlet_weight = 1.0;
  double pool_threshold = 5.0;
  int pool_k = 3;
};

struct PosteriorSummary {
  Eigen::VectorXd mean;      // E(rho | a)
  Eigen::VectorXd variance;  // V(rho | a), bounded by 0.25
  Eigen::VectorXd phi;       // fitted Beta mean per arm
  Eigen::VectorXd psi;       // fitted Beta scale per arm
};

// A fitted accuracy-surface model. GP-backed kinds keep their optimizer
// moments so refits continue where the previous fit stopped.
class Estimator {
 public:
  static Estimator fit(EstimatorKind kind, const ArmCounts& counts,
                       const AttributeSpace& space, const EstimatorConfig& cfg,
                       std::uint64_t seed);

  void refit(const ArmCounts& counts, int steps);
  PosteriorSummary summarize(int mc_samples, Rng& rng) const;

  EstimatorKind kind() const { return kind_; }
  const std::vector<TraceRow>& trace() const { return trace_; }
  bool is_gp() const { return gp_ != nullptr; }
  double kernel_scale(int which) const;   // 1 -> K1, 2 -> K2
  double kernel_length(int which) const;
  ad::Mat embeddings() const;             // per-arm embedding rows

  Estimator(Estimator&&) = default;
  Estimator& operator=(Estimator&&) = default;

 private:
  struct GpModel;
  Estimator() = default;

  void run_steps(int steps);
  NeighborTable current_neighbors() const;

  EstimatorKind kind_ = EstimatorKind::CPredictor;
  EstimatorConfig cfg_;
  const AttributeSpace* space_ = nullptr;
  ArmCounts counts_{0};     // raw accumulated counts
  double global_phi_ = 0.5; // CPredictor
  std::unique_ptr<GpModel> gp_;
  std::vector<TraceRow> trace_;
};

}  // namespace accsurf
