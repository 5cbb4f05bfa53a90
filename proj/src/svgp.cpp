#include "accsurf/svgp.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "accsurf/special.hpp"

namespace accsurf {

using ad::Mat;
using ad::Var;

SvgpState SvgpState::create(ad::ParamStore& store, const std::string& prefix,
                            const Mat& z_init, KernelParams kernel,
                            double init_L_diag) {
  SvgpState st;
  st.Z = &store.add(prefix + ".Z", z_init);
  st.mu = &store.add(prefix + ".mu", Mat::Zero(z_init.rows(), 1));
  Mat l0 = Mat::Zero(z_init.rows(), z_init.rows());
  l0.diagonal().setConstant(softplus_inv(init_L_diag));
  st.L_free = &store.add(prefix + ".L", l0);
  st.kernel = kernel;
  return st;
}

Var SvgpState::effective_L() const {
  const Eigen::Index m = L_free->value.rows();
  Mat strict = Mat::Ones(m, m);
  strict.triangularView<Eigen::Upper>().setZero();  // strictly lower mask
  Var lf = ad::leaf(*L_free);
  Var lower = ad::mul(lf, ad::constant(strict));
  Var diag = ad::softplus_(ad::take_diag(lf));
  return ad::add(lower, ad::make_diag(diag));
}

Mat SvgpState::effective_L_value() const {
  Mat l = L_free->value;
  l.triangularView<Eigen::StrictlyUpper>().setZero();
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    l(i, i) = softplus(L_free->value(i, i));
  }
  return l;
}

double pick_jitter(const Mat& kmm) {
  const double base = kmm.diagonal().mean();
  for (double rel = 1e-6; rel <= 1.01e-2; rel *= 10.0) {
    Mat k = kmm + rel * base * Mat::Identity(kmm.rows(), kmm.cols());
    Eigen::LLT<Mat> llt(k);
    if (llt.info() == Eigen::Success) return rel * base;
  }
  throw ad::NumericalError("pick_jitter: Cholesky failed at maximum jitter");
}

Var gaussian_kl(const Var& mu, const Var& sigma, const Var& kmm) {
  const double m = static_cast<double>(mu.rows());
  Var w = ad::spd_solve(kmm, sigma);
  Var trace = ad::total_sum(ad::take_diag(w));
  Var quad = ad::total_sum(ad::mul(mu, ad::spd_solve(kmm, mu)));
  Var logdets = ad::sub(ad::logdet_spd(kmm), ad::logdet_spd(sigma));
  return ad::scale(
      ad::add_const(ad::add(ad::add(trace, quad), logdets), -m), 0.5);
}

double gaussian_kl_value(const Mat& mu, const Mat& sigma, const Mat& kmm) {
  Eigen::LLT<Mat> llt_k(kmm);
  Eigen::LLT<Mat> llt_s(sigma);
  if (llt_k.info() != Eigen::Success || llt_s.info() != Eigen::Success) {
    throw ad::NumericalError("gaussian_kl: input not SPD");
  }
  const double m = static_cast<double>(mu.rows());
  double trace = llt_k.solve(sigma).trace();
  double quad = (mu.transpose() * llt_k.solve(mu))(0, 0);
  double logdet_k = 2.0 * Mat(llt_k.matrixL()).diagonal().array().log().sum();
  double logdet_s = 2.0 * Mat(llt_s.matrixL()).diagonal().array().log().sum();
  return 0.5 * (trace + quad - m + logdet_k - logdet_s);
}

PredictiveGraph svgp_predict_graph(const SvgpState& state, const Var& embeds) {
  if (embeds.rows() == 0) throw std::invalid_argument("predictive: no arms");
  Var s = state.kernel.s_var();
  Var l = state.kernel.l_var();
  Var z = ad::leaf(*state.Z);
  Var knm = kernel_matrix(s, l, embeds, z);
  Var kmm = kernel_matrix(s, l, z, z);
  double jitter = pick_jitter(kmm.value());
  Var kmm_j = ad::add(
      kmm, ad::constant(Mat(jitter * Mat::Identity(kmm.rows(), kmm.cols()))));

  Var at = ad::spd_solve(kmm_j, ad::transpose(knm));  // m x n
  Var a = ad::transpose(at);                          // n x m
  Var mu = ad::leaf(*state.mu);
  Var mean = ad::matmul(a, mu);

  Var el = state.effective_L();
  Var sigma = ad::matmul(el, ad::transpose(el));
  Var mdiff = ad::matmul(a, ad::sub(sigma, kmm_j));   // n x m
  Var quad_diag = ad::row_sum(ad::mul(mdiff, a));     // n x 1
  // k(a, a) = s for every arm.
  Var knn_diag = ad::mul_scalar(ad::constant(Mat(Mat::Ones(embeds.rows(), 1))), s);
  Var var = ad::clamp(ad::add(knn_diag, quad_diag), 1e-12,
                      std::numeric_limits<double>::infinity());

  PredictiveGraph out;
  out.mean = mean;
  out.var = var;
  out.kl = gaussian_kl(mu, sigma, kmm_j);
  return out;
}

PosteriorGaussian svgp_predict_value(const SvgpState& state, const Mat& embeds) {
  if (embeds.rows() == 0) throw std::invalid_argument("predictive: no arms");
  const double s = state.kernel.s();
  const double l = state.kernel.l();
  Mat knm = kernel_matrix_value(s, l, embeds, state.Z->value);
  Mat kmm = kernel_matrix_value(s, l, state.Z->value, state.Z->value);
  kmm += pick_jitter(kmm) * Mat::Identity(kmm.rows(), kmm.cols());
  Eigen::LLT<Mat> llt(kmm);
  if (llt.info() != Eigen::Success) {
    throw ad::NumericalError("predictive: Cholesky failed after jitter");
  }
  Mat a = llt.solve(knm.transpose()).transpose();  // n x m
  Mat el = state.effective_L_value();
  Mat sigma = el * el.transpose();
  PosteriorGaussian out;
  out.mean = a * state.mu->value;
  Mat mdiff = a * (sigma - kmm);
  out.var = (mdiff.cwiseProduct(a)).rowwise().sum();
  out.var.array() += s;
  out.var = out.var.cwiseMax(1e-12);
  return out;
}

std::vector<Mat> draw_elbo_noise(Rng& rng, std::size_t n_states,
                                 Eigen::Index n, Eigen::Index mc_samples) {
  std::vector<Mat> noise(n_states);
  for (auto& e : noise) {
    e.resize(n, mc_samples);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < mc_samples; ++j) {
        e(i, j) = rng.normal();
      }
    }
  }
  return noise;
}

ElboParts elbo(std::span<const SvgpState* const> states,
               const EmbeddingNet& net, const Mat& inputs,
               const std::vector<Mat>& noise, const LoglikFn& loglik) {
  if (states.empty() || noise.size() != states.size()) {
    throw std::invalid_argument("elbo: states/noise mismatch");
  }
  const Eigen::Index mc_samples = noise.front().cols();
  Var embeds = net.forward(inputs);

  std::vector<Var> samples;
  std::vector<Var> kls;
  samples.reserve(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    PredictiveGraph pg = svgp_predict_graph(*states[i], embeds);
    Var mean_rep = ad::rep_cols(pg.mean, mc_samples);
    Var sd_rep = ad::rep_cols(ad::sqrt_(pg.var), mc_samples);
    samples.push_back(
        ad::add(mean_rep, ad::mul(sd_rep, ad::constant(noise[i]))));
    kls.push_back(pg.kl);
  }

  Var ll_total = loglik(samples);
  if (!std::isfinite(ll_total.scalar())) {
    throw ad::NumericalError("elbo: non-finite log-likelihood");
  }
  Var ll_mean = ad::scale(ll_total, 1.0 / static_cast<double>(mc_samples));
  Var result = ll_mean;
  for (const Var& kl : kls) result = ad::sub(result, kl);

  ElboParts parts;
  parts.elbo = result;
  parts.loglik = ll_mean.scalar();
  for (const Var& kl : kls) parts.kls.push_back(kl.scalar());
  return parts;
}

std::vector<TraceRow> svgp_fit(std::span<const SvgpState* const> states,
                               const EmbeddingNet& net, const Mat& inputs,
                               const LoglikFn& loglik,
                               const FitSchedule& schedule,
                               std::span<ad::Param* const> params,
                               ad::Adam& opt, Rng& rng) {
  std::vector<TraceRow> trace;
  trace.reserve(schedule.steps);
  opt.set_lr(schedule.lr);
  for (int step = 0; step < schedule.steps; ++step) {
    auto noise = draw_elbo_noise(rng, states.size(), inputs.rows(),
                                 schedule.mc_samples);
    ElboParts parts = elbo(states, net, inputs, noise, loglik);
    double value = parts.elbo.scalar();
    if (!std::isfinite(value)) {
      std::ostringstream os;
      os << "svgp_fit: ELBO diverged at step " << step << " (last values:";
      for (std::size_t i = trace.size() > 5 ? trace.size() - 5 : 0;
           i < trace.size(); ++i) {
        os << ' ' << trace[i].elbo;
      }
      os << ')';
      throw ad::NumericalError(os.str());
    }
    TraceRow row;
    row.step = static_cast<int>(opt.steps_taken());
    row.elbo = value;
    row.loglik = parts.loglik;
    row.kl_f = parts.kls.empty() ? 0.0 : parts.kls[0];
    row.kl_g = parts.kls.size() > 1 ? parts.kls[1] : 0.0;
    trace.push_back(row);

    ad::backward(ad::neg(parts.elbo));
    opt.step(params);
  }
  return trace;
}

}  // namespace accsurf
