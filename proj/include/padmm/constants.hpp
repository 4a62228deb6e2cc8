#pragma once

#include <algorithm>
#include <cmath>

#include "padmm/lagrangian.hpp"
#include "padmm/problem.hpp"
#include "padmm/types.hpp"

namespace padmm {

// Scalars and matrices appearing in the descent and subgradient
// certificates.  Everything here is a function of the problem data and the
// solver parameters only; nothing depends on the iterates.
struct ConstantsBundle {
  double rho_beta = 0.0;       // 1 - |1 - beta|, positive on (0, 2)
  double c1 = 0.0, c2 = 0.0, c3 = 0.0, c4 = 0.0, c5 = 0.0, c6 = 0.0;
  MatrixXd D;                  // 2P + alpha B'B - L_h I
  MatrixXd D_bar;              // D - 2 eps0 (c3 + c4) I
  double lambda_min_D_bar = 0.0;
  double tau_bar = 0.0;        // weakest per-block curvature certificate
  double sigma = 0.0;          // min(lambda_min(D_bar), tau_bar, (eps0-1)/(alpha beta))
  double lambda_pp_BtB = 0.0;  // smallest strictly positive eigenvalue of B'B
  double rho_sub = 0.0;        // Lipschitz factor of the subgradient surrogate
  double rho_tilde = 0.0;      // same factor for the shifted-descent variant
  double norm_A = 0.0;         // sum of per-block spectral norms
  double norm_B = 0.0;
  double norm_Q = 0.0;         // sum of per-block spectral norms
  double norm_P = 0.0;
  double r1 = 0.0;             // eps0 c3 + sigma - ||P||^2 c1
  double r2 = 0.0;             // eps0 c5 - c6 (zero at beta = 1)
  bool sigma_positive = false;
  bool r1_positive = false;
  bool r2_positive = false;
};

inline ConstantsBundle compute_constants(const ProblemSpec& problem,
                                         const SolverConfig& config) {
  const double alpha = config.alpha;
  const double beta = config.beta;
  if (!(alpha > 0.0) || !std::isfinite(alpha))
    throw std::domain_error("constants undefined: alpha must be positive");
  if (!(beta > 0.0) || !(beta < 2.0))
    throw std::domain_error("constants undefined: beta must lie in (0, 2)");

  ConstantsBundle c;
  c.rho_beta = 1.0 - std::abs(1.0 - beta);

  const Index q = problem.q();
  const MatrixXd BtB = problem.B.transpose() * problem.B;
  c.lambda_pp_BtB = smallest_positive_eigenvalue(BtB);

  const ProximalMatrix P = resolved_P(config, q);
  c.norm_P = P.spectral_norm();
  c.norm_B = spectral_norm(problem.B);
  c.norm_A = 0.0;
  c.norm_Q = 0.0;
  for (const BlockSpec& blk : problem.blocks) {
    c.norm_A += spectral_norm(blk.A);
    c.norm_Q += blk.Q.spectral_norm();
  }

  const double L_h = problem.smooth.lipschitz;
  const double lam = c.lambda_pp_BtB;
  const double rho = c.rho_beta;
  c.c1 = 1.0 / (alpha * rho * lam);
  c.c2 = 2.0 * beta / (alpha * rho * rho * lam);
  c.c3 = c.c2 * c.norm_P * c.norm_P;
  c.c4 = c.c2 * (c.norm_P + L_h) * (c.norm_P + L_h);
  c.c5 = std::abs(1.0 - beta) / beta * c.c1;
  c.c6 = std::abs(1.0 - beta) / (2.0 * alpha * beta * beta * lam);

  c.D = 2.0 * P.dense() + alpha * BtB;
  c.D.diagonal().array() -= L_h;
  c.D_bar = c.D;
  c.D_bar.diagonal().array() -= 2.0 * config.epsilon0 * (c.c3 + c.c4);
  {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(c.D_bar,
                                               Eigen::EigenvaluesOnly);
    c.lambda_min_D_bar = es.eigenvalues().minCoeff();
  }

  // Per-block curvature: either the proximal weighting bounds the update
  // (lambda_min(Q_i)) or, for a declared weakly convex f_i, the penalty
  // curvature net of the modulus does.  The certificate takes the better of
  // the two routes per block and the worst block overall.
  c.tau_bar = kInf;
  for (const BlockSpec& blk : problem.blocks) {
    double cand = blk.Q.min_eigenvalue();
    if (blk.epsilon_weak) {
      MatrixXd S = alpha * (blk.A.transpose() * blk.A);
      S.diagonal().array() -= *blk.epsilon_weak;
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(S, Eigen::EigenvaluesOnly);
      const double lmin = es.eigenvalues().minCoeff();
      const double lmax = es.eigenvalues().maxCoeff();
      // The weak-convexity route certifies the block update only when the
      // penalty curvature clears the modulus everywhere, i.e. S is PSD;
      // otherwise the Q route stands alone.
      if (lmin >= -1e-10 * std::max(1.0, std::abs(lmax)) && lmax > 0.0) {
        const double cut = 1e-10 * lmax;
        double lpp = kInf;
        for (Index i = 0; i < es.eigenvalues().size(); ++i) {
          const double ev = es.eigenvalues()[i];
          if (ev > cut && ev < lpp) lpp = ev;
        }
        if (std::isfinite(lpp)) cand = std::max(cand, lpp);
      }
    }
    c.tau_bar = std::min(c.tau_bar, cand);
  }

  c.sigma = std::min({c.lambda_min_D_bar, c.tau_bar,
                      (config.epsilon0 - 1.0) / (alpha * beta)});

  const double inv_ab = 1.0 / (alpha * beta);
  c.rho_sub = std::max({c.norm_Q + c.norm_A * c.norm_A,
                        c.norm_P + alpha * c.norm_A * c.norm_B,
                        c.norm_A + c.norm_B + inv_ab});
  c.rho_tilde =
      std::max({c.norm_Q + c.norm_A * c.norm_A,
                c.norm_P + alpha * c.norm_A * c.norm_B +
                    4.0 * config.epsilon0 * c.c3,
                c.norm_A + c.norm_B +
                    4.0 * config.epsilon0 * c.c5 * c.norm_B * c.norm_B +
                    inv_ab});

  c.r1 = config.epsilon0 * c.c3 + c.sigma - c.norm_P * c.norm_P * c.c1;
  c.r2 = config.epsilon0 * c.c5 - c.c6;
  c.sigma_positive = c.sigma > 0.0;
  c.r1_positive = c.r1 > 0.0;
  c.r2_positive = c.r2 > 0.0;
  return c;
}

// Subgradient-surrogate factor alone; identical to the rho_sub member of
// the bundle but computable without eigen-decomposing D.
inline double rho_bound(const ProblemSpec& problem,
                        const SolverConfig& config) {
  double norm_A = 0.0, norm_Q = 0.0;
  for (const BlockSpec& blk : problem.blocks) {
    norm_A += spectral_norm(blk.A);
    norm_Q += blk.Q.spectral_norm();
  }
  const double norm_B = spectral_norm(problem.B);
  const double norm_P = resolved_P(config, problem.q()).spectral_norm();
  return std::max({norm_Q + norm_A * norm_A,
                   norm_P + config.alpha * norm_A * norm_B,
                   norm_A + norm_B + 1.0 / (config.alpha * config.beta)});
}

// Lyapunov function for the damped dual step: the augmented Lagrangian plus
// quadratic penalties on the last dual and y movements,
//
//   Lbar_k = L_alpha(x^k, y^k, z^k) + eps0 c5 ||B'(z^k - z^{k-1})||^2
//            + eps0 c3 ||y^k - y^{k-1}||^2.
//
// At beta = 1 both correction terms vanish and Lbar reduces to L_alpha.
inline double modified_lagrangian(const ProblemSpec& problem,
                                  const SolverConfig& config,
                                  const ConstantsBundle& constants,
                                  const Iterate& it) {
  const double L =
      augmented_lagrangian(problem, config.alpha, it.x, it.y, it.z);
  if (!std::isfinite(L)) return L;
  const double dz_B = (problem.B.transpose() * (it.z - it.z_prev)).squaredNorm();
  const double dy = (it.y - it.y_prev).squaredNorm();
  return L + config.epsilon0 * constants.c5 * dz_B +
         config.epsilon0 * constants.c3 * dy;
}

}  // namespace padmm
