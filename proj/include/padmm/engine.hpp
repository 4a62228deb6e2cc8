#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "padmm/constants.hpp"
#include "padmm/lagrangian.hpp"
#include "padmm/problem.hpp"
#include "padmm/types.hpp"

namespace padmm {

enum class TerminationReason { converged, max_iter, oracle_failure };

inline const char* to_string(TerminationReason r) {
  switch (r) {
    case TerminationReason::converged: return "converged";
    case TerminationReason::max_iter: return "max_iter";
    case TerminationReason::oracle_failure: return "oracle_failure";
  }
  return "unknown";
}

enum class CheckOutcome : std::uint8_t { not_run, pass, fail };

// Per-iteration outcome of the inline certificate checks.  Which fields are
// populated depends on SolverConfig::check_level.
struct CheckFlags {
  CheckOutcome sufficient_decrease = CheckOutcome::not_run;
  CheckOutcome subgradient_bound = CheckOutcome::not_run;
  CheckOutcome z_identity = CheckOutcome::not_run;
  CheckOutcome per_update_decrease = CheckOutcome::not_run;
  CheckOutcome dual_bounds = CheckOutcome::not_run;
};

struct TraceRecord {
  int k = 0;                  // iteration index, 1-based
  double L_alpha = 0.0;       // augmented Lagrangian at the new iterate
  double L_bar = 0.0;         // Lyapunov value at the new iterate
  double residual_norm = 0.0; // ||A x + B y + b||
  std::vector<double> step_x; // ||x_i^{k+1} - x_i^k|| per block
  double step_y = 0.0;
  double step_z = 0.0;
  double d_norm = 0.0;        // subgradient surrogate norm
  double objective = 0.0;     // sum f_i + h (may be +inf off the domain)
  CheckFlags checks;

  double step_x_total() const {
    return std::accumulate(step_x.begin(), step_x.end(), 0.0);
  }
  double step_total() const { return step_x_total() + step_y + step_z; }
  double step_sq_total() const {
    double s = step_y * step_y + step_z * step_z;
    for (double v : step_x) s += v * v;
    return s;
  }
};

// Intermediate quantities recorded at check_level = full.  The Lagrangian is
// evaluated after every sub-update so the per-update decrease and the dual
// bounds can be verified exactly as stated.
struct IterationDetail {
  int k = 0;
  double L_start = 0.0;               // L_alpha(x^k, y^k, z^k)
  std::vector<double> L_after_x;      // after each block update, z still z^k
  std::vector<double> x_quad_T;       // (1/2) ||dx_i||^2_{Q_i}
  double L_after_y = 0.0;             // after the y update, z still z^k
  double y_quad_D = 0.0;              // (1/2) ||dy||^2_D
  double L_end = 0.0;                 // after the dual update
  double dz_sq = 0.0;                 // ||z^{k+1} - z^k||^2
  double dy_sq = 0.0;
  double Bt_dz_sq = 0.0;              // ||B'(z^{k+1} - z^k)||^2
  double z_next_sq = 0.0;             // ||z^{k+1}||^2
  double grad_h_next_sq = 0.0;        // ||grad h(y^{k+1})||^2
  double dual_identity_err = 0.0;     // ||B'z^{k+1} - beta w - (1-beta) B'z^k||
  double dual_identity_scale = 0.0;   // max(1, ||B'z^{k+1}||)
};

// One Gauss-Seidel sweep: blocks in order, then y, then the damped dual
// ascent z <- z + alpha beta (A x + B y + b).  Pass a detail pointer to
// capture the intermediate Lagrangian values.
inline Iterate padmm_iterate(const ProblemSpec& problem,
                             const SolverConfig& config, const Iterate& it,
                             IterationDetail* detail = nullptr) {
  const double alpha = config.alpha;
  const std::size_t p = problem.num_blocks();
  const ProximalMatrix P = resolved_P(config, problem.q());

  BlockVector x = it.x;
  VectorXd Ax = VectorXd::Zero(problem.m());
  for (std::size_t i = 0; i < p; ++i) Ax += problem.blocks[i].A * x[i];
  const VectorXd By_b = problem.B * it.y + problem.b;
  const VectorXd z_scaled = it.z / alpha;

  if (detail) {
    detail->k = it.k + 1;
    detail->L_start = augmented_lagrangian(problem, alpha, x, it.y, it.z);
    detail->L_after_x.resize(p);
    detail->x_quad_T.resize(p);
  }

  for (std::size_t i = 0; i < p; ++i) {
    const BlockSpec& blk = problem.blocks[i];
    const VectorXd offset = (Ax - blk.A * x[i]) + By_b + z_scaled;
    VectorXd x_new;
    try {
      x_new = blk.update(BlockUpdateContext{offset, alpha, x[i], blk});
    } catch (const std::exception& e) {
      throw std::runtime_error("block " + std::to_string(i) +
                               " update oracle failed: " + e.what());
    }
    if (x_new.size() != blk.A.cols())
      throw std::runtime_error("block " + std::to_string(i) +
                               " update oracle returned wrong dimension");
    Ax += blk.A * (x_new - x[i]);
    if (detail) {
      detail->x_quad_T[i] = 0.5 * blk.Q.quad(x_new - x[i]);
      x[i] = x_new;
      detail->L_after_x[i] =
          augmented_lagrangian(problem, alpha, x, it.y, it.z);
    } else {
      x[i] = std::move(x_new);
    }
  }

  const VectorXd w = Ax + problem.b + z_scaled;
  VectorXd y_new;
  try {
    y_new = problem.y_update(YUpdateContext{w, alpha, it.y, P, problem});
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("y update oracle failed: ") +
                             e.what());
  }
  if (y_new.size() != problem.q())
    throw std::runtime_error("y update oracle returned wrong dimension");

  const VectorXd r = Ax + problem.B * y_new + problem.b;
  VectorXd z_new = it.z + alpha * config.beta * r;

  if (detail) {
    const VectorXd dy = y_new - it.y;
    detail->L_after_y = augmented_lagrangian(problem, alpha, x, y_new, it.z);
    detail->y_quad_D =
        0.5 * (2.0 * P.quad(dy) + alpha * (problem.B * dy).squaredNorm() -
               problem.smooth.lipschitz * dy.squaredNorm());
    detail->L_end = augmented_lagrangian(problem, alpha, x, y_new, z_new);
    const VectorXd dz = z_new - it.z;
    detail->dz_sq = dz.squaredNorm();
    detail->dy_sq = dy.squaredNorm();
    detail->Bt_dz_sq = (problem.B.transpose() * dz).squaredNorm();
    detail->z_next_sq = z_new.squaredNorm();
    const VectorXd grad_h = problem.smooth.gradient(y_new);
    detail->grad_h_next_sq = grad_h.squaredNorm();
    // The y optimality condition makes B'z^{k+1} a convex-type combination
    // of the new multiplier surrogate w = -P dy - grad h(y^{k+1}) and the
    // previous B'z; the residual of that identity is a direct probe of the
    // y oracle's exactness.
    const VectorXd w_mult = -P.apply(dy) - grad_h;
    const VectorXd Bt_z_new = problem.B.transpose() * z_new;
    const VectorXd Bt_z_old = problem.B.transpose() * it.z;
    detail->dual_identity_err =
        (Bt_z_new - config.beta * w_mult - (1.0 - config.beta) * Bt_z_old)
            .norm();
    detail->dual_identity_scale = std::max(1.0, Bt_z_new.norm());
  }

  Iterate next;
  next.x = std::move(x);
  next.y = std::move(y_new);
  next.z = std::move(z_new);
  next.y_prev = it.y;
  next.z_prev = it.z;
  next.k = it.k + 1;
  return next;
}

struct SubgradientSurrogate {
  BlockVector d_x;
  VectorXd d_y;
  VectorXd d_z;
  double norm = 0.0;  // sum of block norms + ||d_y|| + ||d_z||
};

// Element of the limiting subdifferential of L_alpha at the new iterate,
// assembled from iterate differences.  Its norm is bounded by rho_bound()
// times the total step norm.
inline SubgradientSurrogate subgradient_surrogate(const ProblemSpec& problem,
                                                  const SolverConfig& config,
                                                  const Iterate& current,
                                                  const Iterate& previous) {
  const std::size_t p = problem.num_blocks();
  const ProximalMatrix P = resolved_P(config, problem.q());
  const VectorXd dy = current.y - previous.y;
  const VectorXd dz = current.z - previous.z;

  SubgradientSurrogate s;
  s.d_x.resize(p);
  // tail accumulates B dy + sum_{j>i} A_j dx_j while sweeping i downward
  VectorXd tail = problem.B * dy;
  for (std::size_t i = p; i-- > 0;) {
    const BlockSpec& blk = problem.blocks[i];
    const VectorXd dx = current.x[i] - previous.x[i];
    s.d_x[i] = blk.A.transpose() * (dz + config.alpha * tail) - blk.Q.apply(dx);
    s.norm += s.d_x[i].norm();
    if (i > 0) tail += blk.A * dx;
  }
  s.d_y = problem.B.transpose() * dz - P.apply(dy);
  s.d_z = dz / (config.alpha * config.beta);
  s.norm += s.d_y.norm() + s.d_z.norm();
  return s;
}

// Variant using only the differences stored inside the iterate (x steps are
// not retained there and enter as zero).  Coincides with the two-iterate
// form at any fixed point.
inline SubgradientSurrogate subgradient_surrogate(const ProblemSpec& problem,
                                                  const SolverConfig& config,
                                                  const Iterate& it) {
  Iterate prev;
  prev.x = it.x;
  prev.y = it.y_prev;
  prev.z = it.z_prev;
  return subgradient_surrogate(problem, config, it, prev);
}

// Scalar stationarity score:
//   ||grad h(y) + B'z|| + ||A x + B y + b|| + d_norm.
// Zero exactly at the stationary points of the constrained problem.
inline double stationarity_measure(const ProblemSpec& problem,
                                   const SolverConfig& config,
                                   const Iterate& it,
                                   const Iterate* previous = nullptr) {
  const double grad_term =
      (problem.smooth.gradient(it.y) + problem.B.transpose() * it.z).norm();
  const double feas = constraint_residual(problem, it.x, it.y).norm();
  const SubgradientSurrogate s =
      previous ? subgradient_surrogate(problem, config, it, *previous)
               : subgradient_surrogate(problem, config, it);
  return grad_term + feas + s.norm;
}

struct SolveResult {
  Iterate final;
  std::vector<TraceRecord> trace;
  std::vector<IterationDetail> details;  // nonempty iff check_level = full
  TerminationReason reason = TerminationReason::max_iter;
  ConstantsBundle constants;
  std::vector<std::string> warnings;
  std::string failure_message;  // set on oracle_failure
};

namespace detail {

// Inline checks attached to each trace record.  Inequalities carry a
// relative slack of 1e-8, identities 1e-10, both against the natural scale
// of the quantities involved.
inline void run_cheap_checks(const ProblemSpec& problem,
                             const SolverConfig& config,
                             const ConstantsBundle& constants,
                             const VectorXd& residual, const Iterate& next,
                             TraceRecord& rec, const double* prev_L_bar) {
  const VectorXd dz = next.z - next.z_prev;
  const double err_z =
      (residual - dz / (config.alpha * config.beta)).norm();
  rec.checks.z_identity = err_z <= 1e-10 * std::max(1.0, residual.norm())
                              ? CheckOutcome::pass
                              : CheckOutcome::fail;

  rec.checks.subgradient_bound =
      rec.d_norm <= constants.rho_sub * rec.step_total() * (1.0 + 1e-8)
          ? CheckOutcome::pass
          : CheckOutcome::fail;

  if (prev_L_bar) {
    const double lhs = rec.L_bar + constants.sigma * rec.step_sq_total();
    const double slack = 1e-8 * std::max(1.0, std::abs(*prev_L_bar));
    rec.checks.sufficient_decrease =
        lhs <= *prev_L_bar + slack ? CheckOutcome::pass : CheckOutcome::fail;
  }
}

inline void run_full_checks(const ConstantsBundle& constants,
                            const SolverConfig& config,
                            const IterationDetail& d,
                            const IterationDetail* d_prev, TraceRecord& rec) {
  bool ok = true;
  double scale = std::max(1.0, std::abs(d.L_start));
  for (std::size_t i = 0; i < d.L_after_x.size(); ++i) {
    const double before = i == 0 ? d.L_start : d.L_after_x[i - 1];
    const double after = d.L_after_x[i];
    scale = std::max({scale, std::abs(after), 1.0});
    if (d.x_quad_T[i] > before - after + 1e-8 * scale) ok = false;
  }
  scale = std::max({1.0, std::abs(d.L_after_x.back()), std::abs(d.L_after_y)});
  if (d.y_quad_D > d.L_after_x.back() - d.L_after_y + 1e-8 * scale)
    ok = false;
  // The dual step changes L by an exact amount: the drop from z^k to
  // z^{k+1} equals -(1/(alpha beta)) ||dz||^2 (negative, L rises).
  const double drop_z = d.L_after_y - d.L_end;
  const double expect_z = -d.dz_sq / (config.alpha * config.beta);
  scale = std::max({1.0, std::abs(d.L_after_y), std::abs(d.L_end)});
  if (std::abs(drop_z - expect_z) > 1e-10 * scale) ok = false;
  rec.checks.per_update_decrease = ok ? CheckOutcome::pass : CheckOutcome::fail;

  bool dual_ok =
      d.dual_identity_err <= 1e-10 * d.dual_identity_scale;
  {
    const double lhs = d.z_next_sq / (2.0 * config.alpha);
    const double rhs = constants.c1 * constants.norm_P * constants.norm_P *
                           d.dy_sq +
                       constants.c1 * d.grad_h_next_sq +
                       constants.c6 * d.Bt_dz_sq;
    if (lhs > rhs + 1e-8 * std::max(1.0, std::max(lhs, rhs))) dual_ok = false;
  }
  if (d_prev) {
    const double lhs = d.dz_sq / (config.alpha * config.beta);
    const double rhs = constants.c4 * d.dy_sq + constants.c3 * d_prev->dy_sq +
                       constants.c5 * d_prev->Bt_dz_sq -
                       constants.c5 * d.Bt_dz_sq;
    if (lhs > rhs + 1e-8 * std::max(1.0, std::abs(rhs) + std::abs(lhs)))
      dual_ok = false;
  }
  rec.checks.dual_bounds = dual_ok ? CheckOutcome::pass : CheckOutcome::fail;
}

}  // namespace detail

// Run the iteration to convergence or the iteration cap.  Convergence means
// both the constraint residual and the total step norm fall below their
// tolerances.  A sigma <= 0 certificate produces a warning, not an error:
// the iteration is still well defined, only the descent guarantee is absent.
inline SolveResult solve(const ProblemSpec& problem, const SolverConfig& config,
                         const Iterate* init = nullptr) {
  problem.validate();
  config.validate();

  SolveResult res;
  res.constants = compute_constants(problem, config);
  if (!res.constants.sigma_positive)
    res.warnings.push_back(
        "sigma = " + std::to_string(res.constants.sigma) +
        " is not positive: the descent certificate does not apply at these "
        "parameters; the iteration proceeds without it");

  Iterate it = init ? *init : make_initial_iterate(problem);
  const double eps0 = config.epsilon0;
  const bool full = config.check_level == CheckLevel::full;
  res.trace.reserve(static_cast<std::size_t>(config.max_iter));

  double prev_L_bar = 0.0;
  bool have_prev_L_bar = false;

  for (int iter = 0; iter < config.max_iter; ++iter) {
    IterationDetail* det = nullptr;
    if (full) det = &res.details.emplace_back();

    Iterate next;
    try {
      next = padmm_iterate(problem, config, it, det);
    } catch (const std::exception& e) {
      res.reason = TerminationReason::oracle_failure;
      res.failure_message = e.what();
      res.final = std::move(it);
      if (full) res.details.pop_back();
      return res;
    }

    TraceRecord rec;
    rec.k = next.k;
    const VectorXd residual = constraint_residual(problem, next.x, next.y);
    rec.residual_norm = residual.norm();
    rec.objective = objective_value(problem, next.x, next.y);
    rec.L_alpha = det ? det->L_end
                      : (std::isfinite(rec.objective)
                             ? rec.objective + next.z.dot(residual) +
                                   0.5 * config.alpha * residual.squaredNorm()
                             : kInf);
    const VectorXd dz = next.z - next.z_prev;
    const VectorXd dy = next.y - next.y_prev;
    rec.L_bar = rec.L_alpha +
                eps0 * res.constants.c5 *
                    (problem.B.transpose() * dz).squaredNorm() +
                eps0 * res.constants.c3 * dy.squaredNorm();
    rec.step_x.resize(problem.num_blocks());
    for (std::size_t i = 0; i < problem.num_blocks(); ++i)
      rec.step_x[i] = (next.x[i] - it.x[i]).norm();
    rec.step_y = dy.norm();
    rec.step_z = dz.norm();
    rec.d_norm = subgradient_surrogate(problem, config, next, it).norm;

    if (config.check_level != CheckLevel::off) {
      detail::run_cheap_checks(problem, config, res.constants, residual, next,
                               rec, have_prev_L_bar ? &prev_L_bar : nullptr);
      if (full)
        detail::run_full_checks(
            res.constants, config, *det,
            res.details.size() >= 2 ? &res.details[res.details.size() - 2]
                                    : nullptr,
            rec);
    }

    prev_L_bar = rec.L_bar;
    have_prev_L_bar = true;
    const bool converged = rec.residual_norm <= config.tol_residual &&
                           rec.step_total() <= config.tol_step;
    res.trace.push_back(std::move(rec));
    it = std::move(next);
    if (converged) {
      res.reason = TerminationReason::converged;
      res.final = std::move(it);
      return res;
    }
  }

  res.reason = TerminationReason::max_iter;
  res.final = std::move(it);
  return res;
}

}  // namespace padmm
