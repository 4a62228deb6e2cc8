#pragma once

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "padmm/types.hpp"

namespace padmm {

// ---------------------------------------------------------------------------
// Folded concave penalties.
//
// Both penalties are even, nondecreasing in |t|, and flat beyond theta
// lambda, which is what makes their proximal maps exactly computable by
// enumerating the stationary point of each polynomial piece.
// ---------------------------------------------------------------------------

struct ScadParams {
  double lambda;
  double theta;

  ScadParams(double lambda_, double theta_) : lambda(lambda_), theta(theta_) {
    if (!(lambda > 0.0)) throw std::invalid_argument("scad: lambda must be > 0");
    if (!(theta > 2.0)) throw std::invalid_argument("scad: theta must be > 2");
  }
};

struct McpParams {
  double lambda;
  double theta;

  McpParams(double lambda_, double theta_) : lambda(lambda_), theta(theta_) {
    if (!(lambda > 0.0)) throw std::invalid_argument("mcp: lambda must be > 0");
    if (!(theta > 0.0)) throw std::invalid_argument("mcp: theta must be > 0");
  }
};

inline double scad_value(double t, const ScadParams& p) {
  const double a = std::abs(t);
  if (a <= p.lambda) return p.lambda * a;
  if (a <= p.theta * p.lambda)
    return (-t * t + 2.0 * p.theta * p.lambda * a - p.lambda * p.lambda) /
           (2.0 * (p.theta - 1.0));
  return (p.theta + 1.0) * p.lambda * p.lambda / 2.0;
}

inline double mcp_value(double t, const McpParams& p) {
  const double a = std::abs(t);
  if (a <= p.theta * p.lambda) return p.lambda * a - t * t / (2.0 * p.theta);
  return p.theta * p.lambda * p.lambda / 2.0;
}

inline double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

inline VectorXd soft_threshold(const VectorXd& v, double t) {
  VectorXd out(v.size());
  for (Index i = 0; i < v.size(); ++i) out[i] = soft_threshold(v[i], t);
  return out;
}

namespace detail {

// Pick the candidate minimizing value(t) + (rho/2)(t - v)^2.  Strict
// comparison keeps the earliest candidate on exact ties, which makes the
// result deterministic; callers list candidates with smaller magnitudes
// first.
template <typename ValueFn>
double best_candidate(const std::vector<double>& cands, double v, double rho,
                      ValueFn&& value) {
  double best_t = 0.0;
  double best_obj = kInf;
  for (double t : cands) {
    if (!std::isfinite(t)) continue;
    const double obj = value(t) + 0.5 * rho * (t - v) * (t - v);
    if (obj < best_obj) {
      best_obj = obj;
      best_t = t;
    }
  }
  return best_t;
}

}  // namespace detail

// Exact proximal map of the SCAD penalty at curvature rho:
//   argmin_t scad(t) + (rho/2)(t - v)^2.
// The penalty is piecewise polynomial with breakpoints at lambda and theta
// lambda; the minimizer is one of the per-piece stationary points or a
// breakpoint, all enumerated explicitly.  Works for every rho > 0,
// including values where the middle piece makes the subproblem nonconvex.
inline double scad_prox(double v, const ScadParams& p, double rho) {
  if (!(rho > 0.0)) throw std::invalid_argument("scad_prox: rho must be > 0");
  if (v < 0.0) return -scad_prox(-v, p, rho);
  const double lam = p.lambda, th = p.theta;
  std::vector<double> cands;
  cands.push_back(0.0);
  cands.push_back(std::clamp(v - lam / rho, 0.0, lam));  // linear piece
  cands.push_back(lam);
  const double denom = rho * (th - 1.0) - 1.0;
  if (denom != 0.0)  // quadratic middle piece
    cands.push_back(
        std::clamp((rho * v * (th - 1.0) - th * lam) / denom, lam, th * lam));
  cands.push_back(th * lam);
  cands.push_back(std::max(v, th * lam));  // flat piece
  return detail::best_candidate(cands, v, rho,
                                [&](double t) { return scad_value(t, p); });
}

// Exact proximal map of the MCP penalty at curvature rho, same scheme.
inline double mcp_prox(double v, const McpParams& p, double rho) {
  if (!(rho > 0.0)) throw std::invalid_argument("mcp_prox: rho must be > 0");
  if (v < 0.0) return -mcp_prox(-v, p, rho);
  const double lam = p.lambda, th = p.theta;
  std::vector<double> cands;
  cands.push_back(0.0);
  const double denom = rho - 1.0 / th;
  if (denom != 0.0)  // quadratic piece
    cands.push_back(std::clamp((rho * v - lam) / denom, 0.0, th * lam));
  cands.push_back(th * lam);
  cands.push_back(std::max(v, th * lam));  // flat piece
  return detail::best_candidate(cands, v, rho,
                                [&](double t) { return mcp_value(t, p); });
}

// ---------------------------------------------------------------------------
// Projections
// ---------------------------------------------------------------------------

// Nearest matrix of rank at most r in Frobenius norm (truncated SVD).  An
// input that is already within numerical rank r is returned unchanged, so
// the projection is exactly idempotent.
inline MatrixXd project_rank(const MatrixXd& X, Index r) {
  if (r < 0) throw std::invalid_argument("project_rank: r must be >= 0");
  if (r >= std::min(X.rows(), X.cols())) return X;
  if (r == 0) return MatrixXd::Zero(X.rows(), X.cols());
  Eigen::BDCSVD<MatrixXd> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd& s = svd.singularValues();
  if (s[r] <= 1e-12 * s[0]) return X;  // already (numerically) rank <= r
  return svd.matrixU().leftCols(r) * s.head(r).asDiagonal() *
         svd.matrixV().leftCols(r).transpose();
}

// Keep the s entries of largest magnitude, zero the rest.  Ties are broken
// by row-major position: the earlier entry wins.  Kept entries are copied
// bitwise, so the projection is exactly idempotent.
inline MatrixXd project_cardinality(const MatrixXd& X, Index s) {
  if (s < 0) throw std::invalid_argument("project_cardinality: s must be >= 0");
  const Index total = X.size();
  if (s >= total) return X;
  Index nonzeros = 0;
  for (Index i = 0; i < total; ++i)
    if (X.data()[i] != 0.0) ++nonzeros;
  if (nonzeros <= s) return X;

  // row-major keys so the tie order is independent of the storage layout
  std::vector<Index> keys(static_cast<std::size_t>(total));
  std::iota(keys.begin(), keys.end(), Index{0});
  auto magnitude = [&](Index key) {
    return std::abs(X(key / X.cols(), key % X.cols()));
  };
  std::sort(keys.begin(), keys.end(), [&](Index a, Index b) {
    const double ma = magnitude(a), mb = magnitude(b);
    if (ma != mb) return ma > mb;
    return a < b;
  });
  MatrixXd out = MatrixXd::Zero(X.rows(), X.cols());
  for (Index i = 0; i < s; ++i) {
    const Index key = keys[static_cast<std::size_t>(i)];
    out(key / X.cols(), key % X.cols()) = X(key / X.cols(), key % X.cols());
  }
  return out;
}

inline VectorXd project_cardinality(const VectorXd& v, Index s) {
  const MatrixXd M = project_cardinality(MatrixXd(v), s);
  return VectorXd(M.col(0));
}

}  // namespace padmm
