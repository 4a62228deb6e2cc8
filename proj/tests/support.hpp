#pragma once

// Shared independent oracles for the test suites.  Everything here is
// deliberately implemented without the library's own candidate enumeration
// or solver code paths, so disagreement means a real defect.

#include <cmath>
#include <functional>

namespace testsupport {

// Brute-force 1-D proximal map: scan [-10 max(1,|v|), 10 max(1,|v|)] on a
// uniform grid of step 1e-4 and keep the best value of
// penalty(t) + (rho/2)(t - v)^2.
inline double grid_prox(const std::function<double(double)>& penalty, double v,
                        double rho) {
  const double T = 10.0 * std::max(1.0, std::abs(v));
  const double step = 1e-4;
  const long N = static_cast<long>(std::ceil(2.0 * T / step));
  double best_t = -T;
  double best = penalty(-T) + 0.5 * rho * (-T - v) * (-T - v);
  for (long i = 1; i <= N; ++i) {
    const double t = -T + static_cast<double>(i) * step;
    const double obj = penalty(t) + 0.5 * rho * (t - v) * (t - v);
    if (obj < best) {
      best = obj;
      best_t = t;
    }
  }
  return best_t;
}

}  // namespace testsupport
