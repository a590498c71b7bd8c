#pragma once

#include <functional>

#include "essl/core.hpp"

namespace essl::testing {

/// Central finite differences over every entry of `x`, compared against an
/// analytic gradient. Returns the max-norm relative error. Double precision,
/// step 1e-5 by default.
inline double fd_rel_error(MatD& x, const std::function<double()>& eval,
                           const MatD& analytic, double step = 1e-5) {
  MatD fd(x.rows(), x.cols());
  for (long i = 0; i < x.rows(); ++i)
    for (long j = 0; j < x.cols(); ++j) {
      double saved = x(i, j);
      x(i, j) = saved + step;
      double f1 = eval();
      x(i, j) = saved - step;
      double f0 = eval();
      x(i, j) = saved;
      fd(i, j) = (f1 - f0) / (2.0 * step);
    }
  double denom = std::max(1.0, fd.cwiseAbs().maxCoeff());
  return (analytic - fd).cwiseAbs().maxCoeff() / denom;
}

inline MatD random_mat(long rows, long cols, RngStream& rng, double lo = -1.0,
                       double hi = 1.0) {
  MatD m(rows, cols);
  for (long i = 0; i < rows; ++i)
    for (long j = 0; j < cols; ++j) m(i, j) = rng.uniform(lo, hi);
  return m;
}

/// Random values bounded away from zero (keeps finite differences off the
/// ReLU and |.| kinks).
inline MatD random_mat_off_kinks(long rows, long cols, RngStream& rng) {
  MatD m(rows, cols);
  for (long i = 0; i < rows; ++i)
    for (long j = 0; j < cols; ++j) {
      double v = rng.uniform(0.1, 1.0);
      m(i, j) = rng.bernoulli(0.5) ? v : -v;
    }
  return m;
}

}  // namespace essl::testing
