#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <variant>
#include <vector>

#include "padmm/problem.hpp"
#include "padmm/prox.hpp"
#include "padmm/rng.hpp"
#include "padmm/types.hpp"

namespace padmm {

// ---------------------------------------------------------------------------
// Penalized regression:
//
//   min_x sum_j pen(x_j) + (mu/2) ||y - y0||^2   s.t.  A x - y = 0
//
// The x block runs a prox-linear update: the data-fit curvature A'A is
// majorized by tau I, which turns the block subproblem into n independent
// scalar prox evaluations of the penalty.
// ---------------------------------------------------------------------------

using PenaltyParams = std::variant<ScadParams, McpParams>;

struct ScadMcpRegressionConfig {
  MatrixXd A_meas;  // m x n design matrix
  VectorXd y0;      // m observations
  double mu = 1.0;  // > 0, weight of the data-proximity term
  PenaltyParams penalty = ScadParams(0.5, 3.7);
  double tau = 0.0;  // majorization level; <= 0 picks 1.5 lambda_max(A'A)
};

inline double penalty_value(double t, const PenaltyParams& p) {
  if (std::holds_alternative<ScadParams>(p))
    return scad_value(t, std::get<ScadParams>(p));
  return mcp_value(t, std::get<McpParams>(p));
}

inline double penalty_prox(double v, const PenaltyParams& p, double rho) {
  if (std::holds_alternative<ScadParams>(p))
    return scad_prox(v, std::get<ScadParams>(p), rho);
  return mcp_prox(v, std::get<McpParams>(p), rho);
}

// Weak-convexity modulus: the concave part of either penalty has bounded
// curvature, 1/(theta-1) for the smoothly clipped form and 1/theta for the
// minimax-concave one.
inline double penalty_weak_modulus(const PenaltyParams& p) {
  if (std::holds_alternative<ScadParams>(p))
    return 1.0 / (std::get<ScadParams>(p).theta - 1.0);
  return 1.0 / std::get<McpParams>(p).theta;
}

inline double largest_eigenvalue_AtA(const MatrixXd& A) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(A.transpose() * A,
                                             Eigen::EigenvaluesOnly);
  return std::max(es.eigenvalues().maxCoeff(), 0.0);
}

inline double default_tau(const MatrixXd& A_meas) {
  return 1.5 * std::max(largest_eigenvalue_AtA(A_meas), 1e-12);
}

inline ProblemSpec build_scad_mcp_regression(
    const ScadMcpRegressionConfig& cfg, const SolverConfig& solver) {
  const Index m = cfg.A_meas.rows();
  const Index n = cfg.A_meas.cols();
  if (m < 1 || n < 1)
    throw std::invalid_argument("regression: empty design matrix");
  if (cfg.y0.size() != m)
    throw std::invalid_argument("regression: y0 length does not match A");
  if (!(cfg.mu > 0.0))
    throw std::invalid_argument("regression: mu must be positive");

  const double lmax = largest_eigenvalue_AtA(cfg.A_meas);
  const double tau = cfg.tau > 0.0 ? cfg.tau : default_tau(cfg.A_meas);
  if (tau < lmax * (1.0 + 1e-6))
    throw std::invalid_argument(
        "regression: tau must exceed lambda_max(A'A) by a relative margin "
        "of 1e-6");

  ProblemSpec prob;
  BlockSpec blk;
  blk.A = cfg.A_meas;
  const PenaltyParams penalty = cfg.penalty;
  blk.f_value = [penalty](const VectorXd& x) {
    double s = 0.0;
    for (Index j = 0; j < x.size(); ++j) s += penalty_value(x[j], penalty);
    return s;
  };
  blk.update = make_prox_linear_block_oracle(
      [penalty](double v, double rho) { return penalty_prox(v, penalty, rho); },
      tau);
  {
    MatrixXd Qm = -(cfg.A_meas.transpose() * cfg.A_meas);
    Qm.diagonal().array() += tau;
    blk.Q = ProximalMatrix::Dense(solver.alpha * Qm);
  }
  blk.epsilon_weak = penalty_weak_modulus(penalty);
  prob.blocks.push_back(std::move(blk));

  const double mu = cfg.mu;
  const VectorXd y0 = cfg.y0;
  prob.smooth.value = [mu, y0](const VectorXd& y) {
    return 0.5 * mu * (y - y0).squaredNorm();
  };
  prob.smooth.gradient = [mu, y0](const VectorXd& y) {
    return VectorXd(mu * (y - y0));
  };
  prob.smooth.lipschitz = mu;
  prob.y_update = make_exact_quadratic_y_oracle(
      mu * MatrixXd::Identity(m, m), -mu * y0);
  prob.B = -MatrixXd::Identity(m, m);
  prob.b = VectorXd::Zero(m);
  return prob;
}

// ---------------------------------------------------------------------------
// Sparse + low-rank + smooth decomposition:
//
//   min  I[rank(X1) <= r] + I[card(X2) <= s] + a3 sum_j ||Y_{j+1} - Y_j||^2
//   s.t. X1 + X2 + Y = M
//
// over m x n matrices, flattened column-major into vectors of length m n.
// The matrix blocks run one projected-gradient step on their subproblems
// (the classical iteration for these constraint sets); pass exact_prox to
// replace that with the exact proximal map, which projects the weighted
// average of the anchor points instead.
// ---------------------------------------------------------------------------

struct SlrConfig {
  MatrixXd A_data;   // observed m x n matrix
  Index r = 0;       // rank budget, 0 <= r <= min(m, n)
  Index s = 0;       // cardinality budget, 0 <= s <= m n
  double alpha1 = 1.0, alpha2 = 1.0;  // indicator weights (bookkeeping only)
  double alpha3 = 1.0;                // smoothness weight, > 0
  double q1 = 1.0, q2 = 1.0;          // proximal scales, > 0
  double lambda_step = 0.0;  // <= 0 picks 0.99 / (alpha + q1)
  double gamma_step = 0.0;   // <= 0 picks 0.99 / (alpha + q2)
  bool exact_prox = false;
};

namespace detail {

// Solve T v = rhs for every row of RHS, where T is the symmetric
// tridiagonal matrix with constant off-diagonal `off` and diagonal `diag`
// (Thomas algorithm; T must be diagonally dominant enough to be SPD, which
// 2 a3 L + (alpha + p) I always is).
inline MatrixXd solve_tridiagonal_rows(const VectorXd& diag, double off,
                                       const MatrixXd& rhs) {
  const Index n = diag.size();
  VectorXd cp(n - 1);
  VectorXd denom(n);
  denom[0] = diag[0];
  for (Index j = 0; j + 1 < n; ++j) {
    cp[j] = off / denom[j];
    denom[j + 1] = diag[j + 1] - off * cp[j];
  }
  MatrixXd out(rhs.rows(), n);
  for (Index i = 0; i < rhs.rows(); ++i) {
    VectorXd d(n);
    d[0] = rhs(i, 0) / denom[0];
    for (Index j = 1; j < n; ++j)
      d[j] = (rhs(i, j) - off * d[j - 1]) / denom[j];
    out(i, n - 1) = d[n - 1];
    for (Index j = n - 1; j-- > 0;)
      out(i, j) = d[j] - cp[j] * out(i, j + 1);
  }
  return out;
}

inline Eigen::Map<const MatrixXd> as_matrix(const VectorXd& v, Index m,
                                            Index n) {
  return Eigen::Map<const MatrixXd>(v.data(), m, n);
}

inline VectorXd as_vector(const MatrixXd& M) {
  return Eigen::Map<const VectorXd>(M.data(), M.size());
}

// Numerical rank with a relative cutoff; the projection outputs land well
// inside it.
inline Index numerical_rank(const MatrixXd& X) {
  Eigen::BDCSVD<MatrixXd> svd(X);
  const VectorXd& s = svd.singularValues();
  if (s.size() == 0 || s[0] <= 0.0) return 0;
  Index rank = 0;
  for (Index i = 0; i < s.size(); ++i)
    if (s[i] > 1e-10 * s[0]) ++rank;
  return rank;
}

}  // namespace detail

inline ProblemSpec build_slr_decomposition(const SlrConfig& cfg,
                                           const SolverConfig& solver) {
  const Index m = cfg.A_data.rows();
  const Index n = cfg.A_data.cols();
  if (m < 1 || n < 2)
    throw std::invalid_argument("decomposition: need at least 2 columns");
  if (cfg.r < 0 || cfg.r > std::min(m, n))
    throw std::invalid_argument("decomposition: rank budget out of range");
  if (cfg.s < 0 || cfg.s > m * n)
    throw std::invalid_argument(
        "decomposition: cardinality budget out of range");
  if (!(cfg.alpha1 > 0.0) || !(cfg.alpha2 > 0.0) || !(cfg.alpha3 > 0.0))
    throw std::invalid_argument("decomposition: weights must be positive");
  if (!(cfg.q1 > 0.0) || !(cfg.q2 > 0.0))
    throw std::invalid_argument(
        "decomposition: proximal scales must be positive");

  const double alpha = solver.alpha;
  const double lam =
      cfg.lambda_step > 0.0 ? cfg.lambda_step : 0.99 / (alpha + cfg.q1);
  const double gam =
      cfg.gamma_step > 0.0 ? cfg.gamma_step : 0.99 / (alpha + cfg.q2);
  if (!(lam > 0.0) || !(lam < 1.0 / (alpha + cfg.q1)))
    throw std::invalid_argument(
        "decomposition: lambda_step must lie in (0, 1/(alpha + q1))");
  if (!(gam > 0.0) || !(gam < 1.0 / (alpha + cfg.q2)))
    throw std::invalid_argument(
        "decomposition: gamma_step must lie in (0, 1/(alpha + q2))");

  const Index N = m * n;
  ProblemSpec prob;

  // One projected-gradient step at step size t is the exact minimizer of
  // the block subproblem with proximal weight (1/t - alpha) I, so that is
  // the weight the certificates and the subgradient surrogate must see.
  // The bound t < 1/(alpha + q) keeps it strictly above q I.  The exact
  // proximal variant minimizes the subproblem with weight q I itself.
  const double q1_eff = cfg.exact_prox ? cfg.q1 : 1.0 / lam - alpha;
  const double q2_eff = cfg.exact_prox ? cfg.q2 : 1.0 / gam - alpha;

  {
    BlockSpec blk;
    blk.A = MatrixXd::Identity(N, N);
    blk.Q = ProximalMatrix::ScaledIdentity(N, q1_eff);
    const Index r = cfg.r;
    blk.f_value = [m, n, r](const VectorXd& x) {
      return detail::numerical_rank(detail::as_matrix(x, m, n)) <= r ? 0.0
                                                                     : kInf;
    };
    const double q1 = cfg.q1;
    const bool exact = cfg.exact_prox;
    blk.update = [m, n, r, q1, lam, exact](const BlockUpdateContext& ctx) {
      VectorXd v;
      if (exact) {
        v = (q1 * ctx.x_prev - ctx.alpha * ctx.offset) / (ctx.alpha + q1);
      } else {
        v = ctx.x_prev - ctx.alpha * lam * (ctx.x_prev + ctx.offset);
      }
      return detail::as_vector(project_rank(detail::as_matrix(v, m, n), r));
    };
    prob.blocks.push_back(std::move(blk));
  }
  {
    BlockSpec blk;
    blk.A = MatrixXd::Identity(N, N);
    blk.Q = ProximalMatrix::ScaledIdentity(N, q2_eff);
    const Index s = cfg.s;
    blk.f_value = [s](const VectorXd& x) {
      Index nnz = 0;
      for (Index i = 0; i < x.size(); ++i)
        if (x[i] != 0.0) ++nnz;
      return nnz <= s ? 0.0 : kInf;
    };
    const double q2 = cfg.q2;
    const bool exact = cfg.exact_prox;
    blk.update = [m, n, s, q2, gam, exact](const BlockUpdateContext& ctx) {
      VectorXd v;
      if (exact) {
        v = (q2 * ctx.x_prev - ctx.alpha * ctx.offset) / (ctx.alpha + q2);
      } else {
        v = ctx.x_prev - ctx.alpha * gam * (ctx.x_prev + ctx.offset);
      }
      return detail::as_vector(
          project_cardinality(MatrixXd(detail::as_matrix(v, m, n)), s));
    };
    prob.blocks.push_back(std::move(blk));
  }

  const double a3 = cfg.alpha3;
  prob.smooth.value = [m, n, a3](const VectorXd& y) {
    const auto Y = detail::as_matrix(y, m, n);
    double s = 0.0;
    for (Index j = 0; j + 1 < n; ++j)
      s += (Y.col(j + 1) - Y.col(j)).squaredNorm();
    return a3 * s;
  };
  // gradient of a3 y'(L (x) I) y is 2 a3 vec(Y L), L the path Laplacian
  MatrixXd L = MatrixXd::Zero(n, n);
  for (Index j = 0; j + 1 < n; ++j) {
    L(j, j) += 1.0;
    L(j + 1, j + 1) += 1.0;
    L(j, j + 1) -= 1.0;
    L(j + 1, j) -= 1.0;
  }
  prob.smooth.gradient = [m, n, a3, L](const VectorXd& y) {
    const auto Y = detail::as_matrix(y, m, n);
    return detail::as_vector(MatrixXd(2.0 * a3 * (Y * L)));
  };
  prob.smooth.lipschitz = 8.0 * a3;  // 2 a3 lambda_max(L), lambda_max(L) < 4

  // y subproblem: (2 a3 L + (alpha + p) I) acts row-wise on Y and is
  // tridiagonal, so each of the m rows solves in O(n)
  prob.y_update = [m, n, a3, L](const YUpdateContext& ctx) {
    if (!ctx.P.is_scaled_identity())
      throw std::runtime_error(
          "decomposition y oracle supports only scaled-identity P");
    const double p = ctx.P.scale();
    VectorXd diag = 2.0 * a3 * L.diagonal();
    diag.array() += ctx.alpha + p;
    const double off = -2.0 * a3;
    MatrixXd rhs = -ctx.alpha * detail::as_matrix(ctx.offset, m, n);
    if (p != 0.0) rhs += p * detail::as_matrix(ctx.y_prev, m, n);
    return detail::as_vector(detail::solve_tridiagonal_rows(diag, off, rhs));
  };

  prob.B = MatrixXd::Identity(N, N);
  prob.b = -detail::as_vector(cfg.A_data);
  return prob;
}

// ---------------------------------------------------------------------------
// Instance generators.  All randomness flows through the stable Rng, so a
// seed pins the instance bitwise on every platform.  Draw order is part of
// the contract: design matrix first (column-major), then supports, then
// values, then noise.
// ---------------------------------------------------------------------------

struct SparseRegressionInstance {
  MatrixXd A;                  // m x n, entries N(0, 1)/sqrt(m)
  VectorXd y0;                 // A x_true + noise
  VectorXd x_true;             // k_nnz spikes with magnitudes in [0.5, 1.5]
  std::vector<Index> support;  // sorted spike positions
};

inline SparseRegressionInstance gen_sparse_regression(Index m, Index n,
                                                      Index k_nnz,
                                                      double noise_sd,
                                                      std::uint64_t seed) {
  if (m < 1 || n < 1)
    throw std::invalid_argument("gen_sparse_regression: empty instance");
  if (k_nnz < 0 || k_nnz > n)
    throw std::invalid_argument("gen_sparse_regression: k_nnz out of range");
  if (noise_sd < 0.0)
    throw std::invalid_argument("gen_sparse_regression: negative noise");
  Rng rng(seed);
  SparseRegressionInstance inst;
  inst.A.resize(m, n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(m));
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < m; ++i) inst.A(i, j) = rng.normal() * scale;

  std::vector<Index> idx(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  for (Index t = 0; t < k_nnz; ++t) {
    const std::size_t j =
        static_cast<std::size_t>(t) +
        rng.uniform_index(static_cast<std::size_t>(n - t));
    std::swap(idx[static_cast<std::size_t>(t)], idx[j]);
  }
  inst.support.assign(idx.begin(), idx.begin() + k_nnz);
  std::sort(inst.support.begin(), inst.support.end());

  inst.x_true = VectorXd::Zero(n);
  for (Index pos : inst.support)
    inst.x_true[pos] = rng.sign() * rng.uniform(0.5, 1.5);

  inst.y0 = inst.A * inst.x_true;
  if (noise_sd > 0.0)
    for (Index i = 0; i < m; ++i) inst.y0[i] += noise_sd * rng.normal();
  return inst;
}

struct SlrInstance {
  MatrixXd A;        // observed: X1 + X2 + Y
  MatrixXd X1_true;  // rank <= r
  MatrixXd X2_true;  // at most s nonzeros, magnitudes in [1, 2]
  MatrixXd Y_true;   // slowly varying across columns
};

inline SlrInstance gen_slr_instance(Index m, Index n, Index r, Index s,
                                    std::uint64_t seed) {
  if (m < 1 || n < 1)
    throw std::invalid_argument("gen_slr_instance: empty instance");
  if (r < 0 || r > std::min(m, n))
    throw std::invalid_argument("gen_slr_instance: r out of range");
  if (s < 0 || s > m * n)
    throw std::invalid_argument("gen_slr_instance: s out of range");
  Rng rng(seed);
  SlrInstance inst;

  MatrixXd U(m, r), V(n, r);
  for (Index j = 0; j < r; ++j)
    for (Index i = 0; i < m; ++i) U(i, j) = rng.normal();
  for (Index j = 0; j < r; ++j)
    for (Index i = 0; i < n; ++i) V(i, j) = rng.normal();
  inst.X1_true = r > 0 ? MatrixXd(U * V.transpose()) : MatrixXd::Zero(m, n);

  std::vector<Index> keys(static_cast<std::size_t>(m * n));
  std::iota(keys.begin(), keys.end(), Index{0});
  for (Index t = 0; t < s; ++t) {
    const std::size_t j =
        static_cast<std::size_t>(t) +
        rng.uniform_index(static_cast<std::size_t>(m * n - t));
    std::swap(keys[static_cast<std::size_t>(t)], keys[j]);
  }
  std::sort(keys.begin(), keys.begin() + s);
  inst.X2_true = MatrixXd::Zero(m, n);
  for (Index t = 0; t < s; ++t) {
    const Index key = keys[static_cast<std::size_t>(t)];
    inst.X2_true(key / n, key % n) = rng.sign() * rng.uniform(1.0, 2.0);
  }

  inst.Y_true.resize(m, n);
  for (Index i = 0; i < m; ++i) {
    const double level = rng.normal();
    const double amp = 0.1 * rng.uniform(0.5, 1.0);
    const double phase = rng.uniform(0.0, 2.0 * M_PI);
    for (Index j = 0; j < n; ++j)
      inst.Y_true(i, j) =
          level + amp * std::sin(2.0 * M_PI * static_cast<double>(j) /
                                     static_cast<double>(n) +
                                 phase);
  }

  inst.A = inst.X1_true + inst.X2_true + inst.Y_true;
  return inst;
}

}  // namespace padmm
