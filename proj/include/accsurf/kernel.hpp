#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "accsurf/autodiff.hpp"
#include "accsurf/rng.hpp"
#include "accsurf/space.hpp"

namespace accsurf {

// Shared arm embedding: a small MLP over the concatenated one-hot encoding.
// Parameters live in the owning ParamStore; the same net feeds both kernels.
class EmbeddingNet {
 public:
  static EmbeddingNet create(ad::ParamStore& store, int in_dim,
                             const std::vector<int>& hidden, int out_dim,
                             Rng& rng);

  ad::Var forward(const ad::Mat& inputs) const;   // graph path
  ad::Mat forward_value(const ad::Mat& inputs) const;

  int in_dim() const { return in_dim_; }
  int out_dim() const { return out_dim_; }
  std::vector<ad::Param*>& layers() { return layers_; }
  const std::vector<ad::Param*>& layers() const { return layers_; }

 private:
  int in_dim_ = 0;
  int out_dim_ = 0;
  std::vector<ad::Param*> layers_;  // W1, b1, W2, b2, ..., Wout, bout
};

ad::Mat embed_value(const EmbeddingNet& net, const AttributeSpace& space,
                    const Arm& arm);

// Scale/length of one RBF kernel, softplus-reparameterized so both stay
// strictly positive.
class KernelParams {
 public:
  static KernelParams create(ad::ParamStore& store, const std::string& prefix,
                             double s0 = 1.0, double l0 = 1.0);

  double s() const;
  double l() const;
  ad::Var s_var() const { return ad::softplus_(ad::leaf(*s_free_)); }
  ad::Var l_var() const { return ad::softplus_(ad::leaf(*l_free_)); }
  ad::Param* s_free() const { return s_free_; }
  ad::Param* l_free() const { return l_free_; }

 private:
  ad::Param* s_free_ = nullptr;
  ad::Param* l_free_ = nullptr;
};

// K(i,j) = s * exp(-||a_i - b_j||^2 / l) over embedding rows.
ad::Var kernel_matrix(const ad::Var& s, const ad::Var& l, const ad::Var& a,
                      const ad::Var& b);
ad::Mat kernel_matrix_value(double s, double l, const ad::Mat& a,
                            const ad::Mat& b);

// The k most similar arms to `query` (excluded), weights normalized to sum 1,
// ties broken by lower arm index. `embeds` holds one embedding per arm row.
std::vector<std::pair<std::size_t, double>> kernel_neighbors(
    std::size_t query, const ad::Mat& embeds, double s, double l,
    std::size_t k);

}  // namespace accsurf
