#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "padmm/rng.hpp"
#include "padmm/types.hpp"

namespace padmm {

// ---------------------------------------------------------------------------
// Problem data
//
// The solver addresses
//
//   min  sum_i f_i(x_i) + h(y)
//   s.t. sum_i A_i x_i + B y + b = 0
//
// with f_i proper lower semicontinuous (possibly nonconvex, +inf allowed)
// and h smooth with L_h-Lipschitz gradient.
// ---------------------------------------------------------------------------

struct BlockSpec;
struct ProblemSpec;

// Inputs handed to a block-update oracle.  The oracle must return the exact
// minimizer of
//
//   f_i(x) + (alpha/2) ||A_i x + offset||^2 + (1/2) ||x - x_prev||^2_{Q_i}
//
// where offset collects every term of the residual that does not involve
// block i, plus the scaled dual: offset = sum_{j<i} A_j x_j^{new}
// + sum_{j>i} A_j x_j^{old} + B y + b + z / alpha.
struct BlockUpdateContext {
  const VectorXd& offset;
  double alpha;
  const VectorXd& x_prev;
  const BlockSpec& block;
};

using BlockUpdateOracle = std::function<VectorXd(const BlockUpdateContext&)>;

struct BlockSpec {
  MatrixXd A;                                   // m x n_i coupling matrix
  std::function<double(const VectorXd&)> f_value;  // may return +inf
  BlockUpdateOracle update;
  ProximalMatrix Q;                             // n_i x n_i, PSD
  // Weak-convexity modulus of f_i, if known.  Metadata only: when present
  // it widens the step-size certificate, it never changes the iteration.
  std::optional<double> epsilon_weak;
};

struct SmoothTerm {
  std::function<double(const VectorXd&)> value;
  std::function<VectorXd(const VectorXd&)> gradient;
  double lipschitz;  // L_h, must be positive and finite
};

// Inputs handed to the y-update oracle.  The oracle must return the exact
// minimizer of
//
//   h(y) + (alpha/2) ||B y + offset||^2 + (1/2) ||y - y_prev||^2_P
//
// with offset = A x^{new} + b + z / alpha.
struct YUpdateContext {
  const VectorXd& offset;
  double alpha;
  const VectorXd& y_prev;
  const ProximalMatrix& P;
  const ProblemSpec& problem;
};

using YUpdateOracle = std::function<VectorXd(const YUpdateContext&)>;

struct ProblemSpec {
  std::vector<BlockSpec> blocks;
  SmoothTerm smooth;
  YUpdateOracle y_update;
  MatrixXd B;   // m x q
  VectorXd b;   // m

  Index m() const { return B.rows(); }
  Index q() const { return B.cols(); }
  std::size_t num_blocks() const { return blocks.size(); }
  Index block_dim(std::size_t i) const { return blocks[i].A.cols(); }

  void validate(bool probe_gradient = true) const;
};

enum class CheckLevel { off, cheap, full };

struct SolverConfig {
  double alpha = 1.0;        // penalty, > 0
  double beta = 1.0;         // dual step, in (0, 2)
  ProximalMatrix P;          // y proximal weighting; default-constructed = 0
  double epsilon0 = 1.5;     // descent-certificate margin, > 1
  int max_iter = 1000;
  double tol_residual = 1e-6;
  double tol_step = 1e-6;
  CheckLevel check_level = CheckLevel::cheap;

  void validate() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha))
      throw std::invalid_argument("alpha must be positive and finite");
    if (!(beta > 0.0) || !(beta < 2.0))
      throw std::invalid_argument("beta must lie in (0, 2)");
    if (!(epsilon0 > 1.0))
      throw std::invalid_argument("epsilon0 must be > 1");
    if (max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
    if (!(tol_residual >= 0.0) || !(tol_step >= 0.0))
      throw std::invalid_argument("tolerances must be nonnegative");
  }
};

// P with an unset (zero-dimensional) value means "no proximal term";
// resolve it against the actual y dimension.
inline ProximalMatrix resolved_P(const SolverConfig& config, Index q) {
  if (config.P.dim() == 0) return ProximalMatrix::Zero(q);
  if (config.P.dim() != q)
    throw std::invalid_argument("P dimension does not match y");
  return config.P;
}

struct Iterate {
  BlockVector x;
  VectorXd y;
  VectorXd z;
  VectorXd y_prev;   // y at the previous iteration
  VectorXd z_prev;   // z at the previous iteration
  int k = 0;
};

// All-zeros start; previous values coincide with the current ones so that
// first-iteration differences are well defined.
inline Iterate make_initial_iterate(const ProblemSpec& problem) {
  Iterate it;
  it.x.reserve(problem.num_blocks());
  for (std::size_t i = 0; i < problem.num_blocks(); ++i)
    it.x.push_back(VectorXd::Zero(problem.block_dim(i)));
  it.y = VectorXd::Zero(problem.q());
  it.z = VectorXd::Zero(problem.m());
  it.y_prev = it.y;
  it.z_prev = it.z;
  it.k = 0;
  return it;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

// Spot-check that the gradient of h is L_h-Lipschitz: finite differences
// along a fixed probe set must not exceed L_h by more than a 1e-6 margin.
inline std::optional<std::string> probe_gradient_lipschitz(
    const SmoothTerm& smooth, Index q, int n_points = 4, double delta = 1e-3) {
  Rng rng(0x9E3779B97F4A7C15ull);  // fixed: validation must be deterministic
  for (int p = 0; p < n_points; ++p) {
    VectorXd y(q);
    if (p == 0) {
      y.setZero();
    } else {
      for (Index i = 0; i < q; ++i) y[i] = rng.normal();
    }
    const VectorXd g0 = smooth.gradient(y);
    for (int d = 0; d < 2; ++d) {
      VectorXd e(q);
      if (d == 0) {
        e.setZero();
        e[p % q] = 1.0;
      } else {
        for (Index i = 0; i < q; ++i) e[i] = rng.normal();
        const double nrm = e.norm();
        if (nrm == 0.0) continue;
        e /= nrm;
      }
      const double diff = (smooth.gradient(y + delta * e) - g0).norm();
      if (diff > smooth.lipschitz * delta * (1.0 + 1e-6))
        return "gradient of h violates the declared Lipschitz constant " +
               std::to_string(smooth.lipschitz) + ": finite difference " +
               std::to_string(diff / delta) + " at probe point " +
               std::to_string(p);
    }
  }
  return std::nullopt;
}

inline void ProblemSpec::validate(bool probe_gradient) const {
  if (blocks.empty()) throw std::invalid_argument("at least one block required");
  if (B.rows() != b.size())
    throw std::invalid_argument("B and b row dimensions differ");
  if (B.cols() < 1) throw std::invalid_argument("y dimension must be >= 1");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const BlockSpec& blk = blocks[i];
    if (blk.A.rows() != B.rows())
      throw std::invalid_argument("block " + std::to_string(i) +
                                  ": A_i row dimension does not match B");
    if (blk.A.cols() < 1)
      throw std::invalid_argument("block " + std::to_string(i) +
                                  ": empty block");
    if (blk.Q.dim() != blk.A.cols())
      throw std::invalid_argument("block " + std::to_string(i) +
                                  ": Q_i dimension does not match A_i");
    if (!blk.f_value || !blk.update)
      throw std::invalid_argument("block " + std::to_string(i) +
                                  ": f_value and update oracles are required");
    if (blk.epsilon_weak && !(*blk.epsilon_weak > 0.0))
      throw std::invalid_argument("block " + std::to_string(i) +
                                  ": weak-convexity modulus must be positive");
  }
  if (!smooth.value || !smooth.gradient)
    throw std::invalid_argument("smooth term oracles are required");
  if (!(smooth.lipschitz > 0.0) || !std::isfinite(smooth.lipschitz))
    throw std::invalid_argument("L_h must be positive and finite");
  if (!y_update) throw std::invalid_argument("y update oracle is required");
  if (probe_gradient) {
    if (auto err = probe_gradient_lipschitz(smooth, q()))
      throw std::invalid_argument(*err);
  }
}

// ---------------------------------------------------------------------------
// Stock oracles
// ---------------------------------------------------------------------------

// Exact block oracle for quadratic f_i(x) = (1/2) x' H x + g' x.  The
// subproblem is the SPD system (H + alpha A'A + Q) x = -g - alpha A' u
// + Q x_prev; the factorization is cached while alpha stays fixed.
inline BlockUpdateOracle make_exact_quadratic_block_oracle(MatrixXd H,
                                                           VectorXd g) {
  struct Cache {
    double alpha = -1.0;
    Eigen::LDLT<MatrixXd> ldlt;
  };
  auto cache = std::make_shared<Cache>();
  return [H = std::move(H), g = std::move(g),
          cache](const BlockUpdateContext& ctx) -> VectorXd {
    const MatrixXd& A = ctx.block.A;
    if (cache->alpha != ctx.alpha) {
      MatrixXd K = H + ctx.alpha * (A.transpose() * A);
      K += ctx.block.Q.dense();
      cache->ldlt.compute(K);
      if (cache->ldlt.info() != Eigen::Success)
        throw std::runtime_error("quadratic block subproblem is singular");
      cache->alpha = ctx.alpha;
    }
    VectorXd rhs = -g - ctx.alpha * (A.transpose() * ctx.offset);
    if (!ctx.block.Q.is_zero()) rhs += ctx.block.Q.apply(ctx.x_prev);
    return cache->ldlt.solve(rhs);
  };
}

// Prox-linear block oracle.  Valid when Q_i = alpha (tau I - A_i' A_i) with
// tau >= lambda_max(A_i' A_i): the quadratic part of the subproblem then
// collapses to (alpha tau / 2) ||x - v||^2 around
//
//   v = x_prev - (1/tau) A_i' (A_i x_prev + offset)
//
// and the minimizer is the separable proximal map of f_i at curvature
// alpha tau, applied componentwise.
inline BlockUpdateOracle make_prox_linear_block_oracle(
    std::function<double(double v, double rho)> scalar_prox, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  return [scalar_prox = std::move(scalar_prox),
          tau](const BlockUpdateContext& ctx) -> VectorXd {
    const MatrixXd& A = ctx.block.A;
    const VectorXd v =
        ctx.x_prev - (A.transpose() * (A * ctx.x_prev + ctx.offset)) / tau;
    const double rho = ctx.alpha * tau;
    VectorXd x(v.size());
    for (Index j = 0; j < v.size(); ++j) x[j] = scalar_prox(v[j], rho);
    return x;
  };
}

// Exact y oracle for quadratic h(y) = (1/2) y' H y + g' y.  Solves
// (H + alpha B'B + P) y = -g - alpha B' w + P y_prev.  The factorization is
// cached while alpha stays fixed; build a fresh oracle if P changes between
// solves at the same alpha.
inline YUpdateOracle make_exact_quadratic_y_oracle(MatrixXd H, VectorXd g) {
  struct Cache {
    double alpha = -1.0;
    Eigen::LDLT<MatrixXd> ldlt;
  };
  auto cache = std::make_shared<Cache>();
  return [H = std::move(H), g = std::move(g),
          cache](const YUpdateContext& ctx) -> VectorXd {
    const MatrixXd& B = ctx.problem.B;
    if (cache->alpha != ctx.alpha) {
      MatrixXd K = H + ctx.alpha * (B.transpose() * B);
      K += ctx.P.dense();
      cache->ldlt.compute(K);
      if (cache->ldlt.info() != Eigen::Success)
        throw std::runtime_error("y subproblem is singular");
      cache->alpha = ctx.alpha;
    }
    VectorXd rhs = -g - ctx.alpha * (B.transpose() * ctx.offset);
    if (!ctx.P.is_zero()) rhs += ctx.P.apply(ctx.y_prev);
    return cache->ldlt.solve(rhs);
  };
}

}  // namespace padmm
