#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "padmm/constants.hpp"
#include "padmm/engine.hpp"
#include "padmm/problem.hpp"

namespace padmm {

// One verified inequality or identity: passed == (lhs <= rhs + slack).
struct CheckReport {
  std::string name;
  int k = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;
  bool passed = false;
};

namespace detail {

inline CheckReport make_check(std::string name, int k, double lhs, double rhs,
                              double slack) {
  CheckReport r;
  r.name = std::move(name);
  r.k = k;
  r.lhs = lhs;
  r.rhs = rhs;
  r.slack = slack;
  r.passed = lhs <= rhs + slack;
  return r;
}

// |lhs - rhs| <= slack recast as a one-sided check
inline CheckReport make_identity_check(std::string name, int k, double lhs,
                                       double rhs, double slack) {
  CheckReport r;
  r.name = std::move(name);
  r.k = k;
  r.lhs = lhs;
  r.rhs = rhs;
  r.slack = slack;
  r.passed = std::abs(lhs - rhs) <= slack;
  return r;
}

}  // namespace detail

// Lyapunov decrease between consecutive trace records:
//   Lbar_{k+1} + sigma (sum ||dx_i||^2 + ||dy||^2 + ||dz||^2) <= Lbar_k.
// Meaningful as a certificate only when sigma > 0; reported regardless.
inline std::vector<CheckReport> check_sufficient_decrease(
    const ConstantsBundle& constants, std::span<const TraceRecord> trace) {
  std::vector<CheckReport> reports;
  for (std::size_t j = 1; j < trace.size(); ++j) {
    const TraceRecord& prev = trace[j - 1];
    const TraceRecord& cur = trace[j];
    reports.push_back(detail::make_check(
        "sufficient_decrease", cur.k,
        cur.L_bar + constants.sigma * cur.step_sq_total(), prev.L_bar,
        1e-8 * std::max(1.0, std::abs(prev.L_bar))));
  }
  return reports;
}

// Per-update behaviour of the augmented Lagrangian inside one sweep:
// each block update and the y update decrease it by at least the
// corresponding weighted squared step, and the dual update changes it by
// an exactly known amount.  Requires details from check_level = full.
inline std::vector<CheckReport> check_per_update_decrease(
    const ProblemSpec& problem, const SolverConfig& config,
    std::span<const IterationDetail> details) {
  (void)problem;
  std::vector<CheckReport> reports;
  for (const IterationDetail& d : details) {
    for (std::size_t i = 0; i < d.L_after_x.size(); ++i) {
      const double before = i == 0 ? d.L_start : d.L_after_x[i - 1];
      const double after = d.L_after_x[i];
      reports.push_back(detail::make_check(
          "x_update_decrease[" + std::to_string(i) + "]", d.k, d.x_quad_T[i],
          before - after,
          1e-8 * std::max({1.0, std::abs(before), std::abs(after)})));
    }
    reports.push_back(detail::make_check(
        "y_update_decrease", d.k, d.y_quad_D, d.L_after_x.back() - d.L_after_y,
        1e-8 * std::max({1.0, std::abs(d.L_after_x.back()),
                         std::abs(d.L_after_y)})));
    reports.push_back(detail::make_identity_check(
        "z_update_change", d.k, d.L_after_y - d.L_end,
        -d.dz_sq / (config.alpha * config.beta),
        1e-10 * std::max({1.0, std::abs(d.L_after_y), std::abs(d.L_end)})));
  }
  return reports;
}

struct DualBoundsResult {
  bool skipped = false;
  std::string skip_reason;
  std::vector<CheckReport> reports;
};

// Largest relative distance of the columns of [A_1 ... A_p, b] from the
// range of B.  The dual bounds rest on im(A) and b lying inside im(B).
inline double image_condition_residual(const ProblemSpec& problem) {
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(problem.B);
  double worst = 0.0;
  auto probe = [&](const VectorXd& col) {
    const VectorXd res = col - problem.B * cod.solve(col);
    worst = std::max(worst, res.norm() / std::max(1.0, col.norm()));
  };
  for (const BlockSpec& blk : problem.blocks)
    for (Index j = 0; j < blk.A.cols(); ++j) probe(blk.A.col(j));
  probe(problem.b);
  return worst;
}

// Dual-sequence bounds: the multiplier identity induced by the exact y
// update, the step bound tying ||dz||^2 to y movement, and the norm bound
// tying ||z||^2 to the gradient of h.  Skipped (with a reason) when the
// range condition they rest on fails.
inline DualBoundsResult check_dual_bounds(
    const ProblemSpec& problem, const SolverConfig& config,
    const ConstantsBundle& constants, std::span<const IterationDetail> details) {
  DualBoundsResult out;
  const double img = image_condition_residual(problem);
  if (img > 1e-8) {
    out.skipped = true;
    out.skip_reason =
        "range condition violated: distance of [A, b] columns from im(B) is " +
        std::to_string(img);
    return out;
  }
  (void)config;
  const IterationDetail* prev = nullptr;
  for (const IterationDetail& d : details) {
    out.reports.push_back(detail::make_check("dual_multiplier_identity", d.k,
                                             d.dual_identity_err, 0.0,
                                             1e-10 * d.dual_identity_scale));
    {
      const double lhs = d.z_next_sq / (2.0 * config.alpha);
      const double rhs =
          constants.c1 * constants.norm_P * constants.norm_P * d.dy_sq +
          constants.c1 * d.grad_h_next_sq + constants.c6 * d.Bt_dz_sq;
      out.reports.push_back(detail::make_check(
          "dual_norm_bound", d.k, lhs, rhs,
          1e-8 * std::max({1.0, lhs, std::abs(rhs)})));
    }
    if (prev) {
      const double lhs = d.dz_sq / (config.alpha * config.beta);
      const double rhs = constants.c4 * d.dy_sq + constants.c3 * prev->dy_sq +
                         constants.c5 * prev->Bt_dz_sq -
                         constants.c5 * d.Bt_dz_sq;
      out.reports.push_back(detail::make_check(
          "dual_step_bound", d.k, lhs, rhs,
          1e-8 * std::max({1.0, lhs, std::abs(rhs)})));
    }
    prev = &d;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Finite-length monitor
// ---------------------------------------------------------------------------

struct FiniteLengthReport {
  std::vector<double> cumulative;  // running sum of total step norms
  double total = 0.0;
  double tail_ratio = 0.0;          // geometric ratio fitted on the last quartile
  double last_decile_fraction = 0.0;  // share contributed by the final 10%
};

namespace detail {

// least-squares line y = a + b x; r2 is the coefficient of determination
struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
  double r2 = 0.0;
  std::size_t n = 0;
};

inline LineFit fit_line(const std::vector<double>& xs,
                        const std::vector<double>& ys) {
  LineFit f;
  f.n = xs.size();
  if (f.n < 2) return f;
  const double n = static_cast<double>(f.n);
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < f.n; ++i) {
    sx += xs[i];
    sy += ys[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < f.n; ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) return f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (syy > 0.0) {
    double ss_res = 0.0;
    for (std::size_t i = 0; i < f.n; ++i) {
      const double e = ys[i] - (f.intercept + f.slope * xs[i]);
      ss_res += e * e;
    }
    f.r2 = 1.0 - ss_res / syy;
  }
  return f;
}

}  // namespace detail

// Summability evidence for the step sequence.  tail_ratio < 1 means the
// last-quartile steps still shrink geometrically; a tiny
// last_decile_fraction means the trajectory has essentially stopped moving.
inline FiniteLengthReport finite_length_monitor(
    std::span<const TraceRecord> trace) {
  if (trace.size() < 10)
    throw std::invalid_argument(
        "finite_length_monitor needs at least 10 iterations");
  FiniteLengthReport rep;
  rep.cumulative.reserve(trace.size());
  double running = 0.0;
  for (const TraceRecord& rec : trace) {
    running += rec.step_total();
    rep.cumulative.push_back(running);
  }
  rep.total = running;

  const std::size_t n = trace.size();
  const std::size_t q_start = n - n / 4;
  std::vector<double> xs, ys;
  for (std::size_t j = q_start; j < n; ++j) {
    const double s = trace[j].step_total();
    if (s > 0.0) {
      xs.push_back(static_cast<double>(trace[j].k));
      ys.push_back(std::log(s));
    }
  }
  const detail::LineFit f = detail::fit_line(xs, ys);
  // fewer than two moving iterations in the tail: the steps have collapsed
  rep.tail_ratio = f.n >= 2 ? std::exp(f.slope) : 0.0;

  const std::size_t d_start = (9 * n) / 10;
  const double before = d_start == 0 ? 0.0 : rep.cumulative[d_start - 1];
  rep.last_decile_fraction =
      rep.total > 0.0 ? (rep.total - before) / rep.total : 0.0;
  return rep;
}

// ---------------------------------------------------------------------------
// Rate-regime fitting
// ---------------------------------------------------------------------------

enum class RateRegime { finite, linear, sublinear, inconclusive };

inline const char* to_string(RateRegime r) {
  switch (r) {
    case RateRegime::finite: return "finite";
    case RateRegime::linear: return "linear";
    case RateRegime::sublinear: return "sublinear";
    case RateRegime::inconclusive: return "inconclusive";
  }
  return "unknown";
}

// Only the parameters of the detected regime are meaningful; the rest are
// NaN.  theta_hat is the desingularization exponent implied by the regime:
// 0 when the error hits the floor in finitely many steps, 0.5 (class
// representative of (0, 1/2]) for geometric decay, and (1 + r) / (1 + 2r)
// for power-law decay at rate k^{-r}.
struct RateEstimate {
  RateRegime regime = RateRegime::inconclusive;
  double theta_hat = std::numeric_limits<double>::quiet_NaN();
  double Q_hat = std::numeric_limits<double>::quiet_NaN();   // linear factor
  double r_hat = std::numeric_limits<double>::quiet_NaN();   // power-law rate
  double mu_hat = std::numeric_limits<double>::quiet_NaN();  // power-law scale
  double fit_r2 = std::numeric_limits<double>::quiet_NaN();
  std::size_t k0 = 0;  // 1-based index where the fit window starts
};

struct KlFitOptions {
  std::optional<std::size_t> k0;  // 1-based; default: first e_k <= 0.1 e_1
  double k0_fraction = 0.1;
  double trim_fraction = 0.1;   // drop this share of the tail before fitting
  double finite_tol = 1e-14;    // relative floor for the finite regime
  double r2_threshold = 0.95;
  std::size_t min_points = 20;
};

// Classify the decay of an error sequence e_k (k = 1, 2, ...).  The regimes
// are tried in the order finite, linear (log e vs k), sublinear (log e vs
// log k); the first whose criterion holds wins, so a sequence matching
// several is classified deterministically.
inline RateEstimate kl_rate_fit(const std::vector<double>& e,
                                const KlFitOptions& opt = {}) {
  RateEstimate est;
  if (e.empty()) return est;

  // the last few values sit at the resolution of the error proxy; drop them
  const std::size_t keep =
      e.size() - static_cast<std::size_t>(opt.trim_fraction *
                                          static_cast<double>(e.size()));
  if (keep < 2) return est;
  std::span<const double> ek(e.data(), keep);

  const double e1 = ek[0];
  const double floor_tol = opt.finite_tol * std::max(1.0, e1);
  if (ek[keep - 1] <= floor_tol) {
    // error pinned at the floor from some index onward
    std::size_t j = keep;
    while (j > 0 && ek[j - 1] <= floor_tol) --j;
    est.regime = RateRegime::finite;
    est.theta_hat = 0.0;
    est.k0 = j + 1;
    return est;
  }

  std::size_t start = 0;
  if (opt.k0) {
    start = *opt.k0 >= 1 ? *opt.k0 - 1 : 0;
  } else {
    while (start < keep && ek[start] > opt.k0_fraction * e1) ++start;
    if (start >= keep) start = 0;  // never reached the cut: fit everything
  }
  est.k0 = start + 1;

  std::vector<double> ks, logs;
  for (std::size_t j = start; j < keep; ++j) {
    if (ek[j] > 0.0) {
      ks.push_back(static_cast<double>(j + 1));
      logs.push_back(std::log(ek[j]));
    }
  }
  if (ks.size() < opt.min_points) return est;

  const detail::LineFit lin = detail::fit_line(ks, logs);
  if (lin.r2 >= opt.r2_threshold && lin.slope < 0.0) {
    est.regime = RateRegime::linear;
    est.Q_hat = std::exp(lin.slope);
    est.theta_hat = 0.5;
    est.fit_r2 = lin.r2;
    return est;
  }

  std::vector<double> log_ks(ks.size());
  for (std::size_t j = 0; j < ks.size(); ++j) log_ks[j] = std::log(ks[j]);
  const detail::LineFit sub = detail::fit_line(log_ks, logs);
  if (sub.r2 >= opt.r2_threshold && sub.slope < 0.0) {
    est.regime = RateRegime::sublinear;
    est.r_hat = -sub.slope;
    est.theta_hat = (1.0 + est.r_hat) / (1.0 + 2.0 * est.r_hat);
    // e_k ~ (mu k)^{slope}  =>  intercept = slope log mu
    est.mu_hat = std::exp(sub.intercept / sub.slope);
    est.fit_r2 = sub.r2;
    return est;
  }

  est.fit_r2 = std::max(lin.r2, sub.r2);
  return est;
}

// Error sequence for the rate fitter: Lyapunov values against their final
// value as a stand-in for the unknown limit, clipped at zero.
inline std::vector<double> error_sequence_from_trace(
    std::span<const TraceRecord> trace) {
  std::vector<double> e;
  if (trace.empty()) return e;
  const double fin = trace.back().L_bar;
  e.reserve(trace.size());
  for (const TraceRecord& rec : trace)
    e.push_back(std::max(rec.L_bar - fin, 0.0));
  return e;
}

}  // namespace padmm
