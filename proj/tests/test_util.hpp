#pragma once

#include <functional>

#include "accsurf/autodiff.hpp"
#include "accsurf/rng.hpp"

namespace accsurf::testutil {

using ad::Mat;

// Central finite differences of f() with respect to every entry of x, where
// f reads x by reference.
inline Mat fd_gradient(const std::function<double()>& f, Mat& x,
                       double h = 1e-5) {
  Mat g(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double orig = x(i, j);
      x(i, j) = orig + h;
      const double fp = f();
      x(i, j) = orig - h;
      const double fm = f();
      x(i, j) = orig;
      g(i, j) = (fp - fm) / (2.0 * h);
    }
  }
  return g;
}

inline bool grads_close(const Mat& a, const Mat& b, double tol = 1e-4) {
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      const double scale =
          std::max({1.0, std::abs(a(i, j)), std::abs(b(i, j))});
      if (std::abs(a(i, j) - b(i, j)) > tol * scale) return false;
    }
  }
  return true;
}

inline Mat random_mat(Rng& rng, Eigen::Index r, Eigen::Index c, double lo = -1.0,
                      double hi = 1.0) {
  Mat m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.uniform(lo, hi);
  }
  return m;
}

}  // namespace accsurf::testutil
