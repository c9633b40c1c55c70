// Central finite differences against analytic gradients.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace deepbf::testing {

/// ||fd - analytic|| / max(||fd||, ||analytic||) over the probed entries.
/// `loss` is re-evaluated after each perturbation of values[i]; `step` scales
/// with max(1, |values[i]|). Differences whose norm is below `abs_tol` count
/// as exact, for blocks whose true gradient is zero.
inline double gradcheck(std::span<double> values, std::span<const double> analytic,
                        const std::function<double()>& loss, double step = 1e-4,
                        std::size_t max_probes = 0, double abs_tol = 0.0) {
  const std::size_t n = values.size();
  const std::size_t stride = max_probes == 0 || n <= max_probes ? 1 : n / max_probes;
  double diff2 = 0.0, fd2 = 0.0, an2 = 0.0;
  for (std::size_t i = 0; i < n; i += stride) {
    const double old = values[i];
    const double h = step * std::max(1.0, std::abs(old));
    values[i] = old + h;
    const double lp = loss();
    values[i] = old - h;
    const double lm = loss();
    values[i] = old;
    const double fd = (lp - lm) / (2.0 * h);
    diff2 += (fd - analytic[i]) * (fd - analytic[i]);
    fd2 += fd * fd;
    an2 += analytic[i] * analytic[i];
  }
  if (std::sqrt(diff2) <= abs_tol) return 0.0;
  const double denom = std::sqrt(std::max(fd2, an2));
  return denom == 0.0 ? 0.0 : std::sqrt(diff2) / denom;
}

}  // namespace deepbf::testing
