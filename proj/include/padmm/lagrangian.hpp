#pragma once

#include "padmm/problem.hpp"
#include "padmm/types.hpp"

namespace padmm {

inline VectorXd constraint_residual(const ProblemSpec& problem,
                                    const BlockVector& x, const VectorXd& y) {
  VectorXd r = problem.B * y + problem.b;
  for (std::size_t i = 0; i < problem.num_blocks(); ++i)
    r += problem.blocks[i].A * x[i];
  return r;
}

// sum_i f_i(x_i) + h(y); +inf as soon as any f_i is +inf.
inline double objective_value(const ProblemSpec& problem, const BlockVector& x,
                              const VectorXd& y) {
  double f = 0.0;
  for (std::size_t i = 0; i < problem.num_blocks(); ++i) {
    f += problem.blocks[i].f_value(x[i]);
    if (!std::isfinite(f)) return kInf;
  }
  return f + problem.smooth.value(y);
}

// Augmented Lagrangian
//   L_alpha(x, y, z) = sum f_i + h + <z, r> + (alpha/2) ||r||^2,
//   r = A x + B y + b.
inline double augmented_lagrangian(const ProblemSpec& problem, double alpha,
                                   const BlockVector& x, const VectorXd& y,
                                   const VectorXd& z) {
  const double obj = objective_value(problem, x, y);
  if (!std::isfinite(obj)) return kInf;
  const VectorXd r = constraint_residual(problem, x, y);
  return obj + z.dot(r) + 0.5 * alpha * r.squaredNorm();
}

}  // namespace padmm
