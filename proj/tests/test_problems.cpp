#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "padmm/engine.hpp"
#include "padmm/problems.hpp"

using namespace padmm;

TEST_CASE("penalty helpers dispatch on the parameter type") {
  const ScadParams ps(0.5, 3.7);
  const McpParams pm(0.8, 2.5);
  CHECK(penalty_value(1.2, PenaltyParams(ps)) == scad_value(1.2, ps));
  CHECK(penalty_value(1.2, PenaltyParams(pm)) == mcp_value(1.2, pm));
  CHECK(penalty_prox(0.9, PenaltyParams(ps), 2.0) == scad_prox(0.9, ps, 2.0));
  CHECK(penalty_prox(0.9, PenaltyParams(pm), 2.0) == mcp_prox(0.9, pm, 2.0));
  CHECK(penalty_weak_modulus(PenaltyParams(ps)) ==
        Catch::Approx(1.0 / 2.7).margin(1e-15));
  CHECK(penalty_weak_modulus(PenaltyParams(pm)) ==
        Catch::Approx(0.4).margin(1e-15));
}

TEST_CASE("default majorization level tracks the design curvature") {
  CHECK(largest_eigenvalue_AtA(MatrixXd::Constant(1, 1, 2.0)) ==
        Catch::Approx(4.0).margin(1e-12));
  CHECK(default_tau(MatrixXd::Constant(1, 1, 2.0)) ==
        Catch::Approx(6.0).margin(1e-12));
  // degenerate all-zero design still yields a positive tau
  CHECK(default_tau(MatrixXd::Zero(2, 2)) > 0.0);
}

TEST_CASE("regression builder wires the problem as specified") {
  const SparseRegressionInstance inst = gen_sparse_regression(8, 12, 3, 0.0, 7);
  ScadMcpRegressionConfig cfg;
  cfg.A_meas = inst.A;
  cfg.y0 = inst.y0;
  cfg.mu = 1.5;
  cfg.penalty = ScadParams(0.4, 3.7);
  SolverConfig solver;
  solver.alpha = 2.0;

  const ProblemSpec p = build_scad_mcp_regression(cfg, solver);
  p.validate();
  REQUIRE(p.num_blocks() == 1);
  CHECK(p.blocks[0].A == inst.A);
  CHECK(p.B == -MatrixXd::Identity(8, 8));
  CHECK(p.b == VectorXd::Zero(8));
  CHECK(p.smooth.lipschitz == 1.5);
  REQUIRE(p.blocks[0].epsilon_weak.has_value());
  CHECK(*p.blocks[0].epsilon_weak == Catch::Approx(1.0 / 2.7).margin(1e-15));

  // Q = alpha (tau I - A'A) with the default tau = 1.5 lambda_max
  const double tau = default_tau(inst.A);
  MatrixXd Qexp = -(inst.A.transpose() * inst.A);
  Qexp.diagonal().array() += tau;
  Qexp *= solver.alpha;
  CHECK((p.blocks[0].Q.dense() - Qexp).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(p.blocks[0].Q.min_eigenvalue() > 0.0);

  // f sums the scalar penalty over the coordinates
  VectorXd x = VectorXd::Zero(12);
  x[2] = 0.3;
  x[5] = -2.0;
  CHECK(p.blocks[0].f_value(x) ==
        Catch::Approx(scad_value(0.3, ScadParams(0.4, 3.7)) +
                      scad_value(2.0, ScadParams(0.4, 3.7)))
            .margin(1e-14));
}

TEST_CASE("regression builder rejects inconsistent inputs") {
  const SparseRegressionInstance inst = gen_sparse_regression(5, 6, 2, 0.0, 1);
  ScadMcpRegressionConfig cfg;
  cfg.A_meas = inst.A;
  cfg.y0 = inst.y0;
  SolverConfig solver;

  {
    ScadMcpRegressionConfig bad = cfg;
    bad.y0 = VectorXd::Zero(4);
    CHECK_THROWS_AS(build_scad_mcp_regression(bad, solver),
                    std::invalid_argument);
  }
  {
    ScadMcpRegressionConfig bad = cfg;
    bad.mu = 0.0;
    CHECK_THROWS_AS(build_scad_mcp_regression(bad, solver),
                    std::invalid_argument);
  }
  {
    ScadMcpRegressionConfig bad = cfg;
    bad.tau = 0.5 * largest_eigenvalue_AtA(inst.A);  // below the curvature
    CHECK_THROWS_AS(build_scad_mcp_regression(bad, solver),
                    std::invalid_argument);
  }
}

TEST_CASE("regression block oracle is the componentwise penalty prox") {
  const SparseRegressionInstance inst = gen_sparse_regression(6, 9, 2, 0.0, 3);
  ScadMcpRegressionConfig cfg;
  cfg.A_meas = inst.A;
  cfg.y0 = inst.y0;
  cfg.penalty = McpParams(0.6, 2.2);
  SolverConfig solver;
  solver.alpha = 1.7;
  const ProblemSpec p = build_scad_mcp_regression(cfg, solver);

  Rng rng(11);
  VectorXd x_prev(9), u(6);
  for (Index i = 0; i < 9; ++i) x_prev[i] = rng.normal();
  for (Index i = 0; i < 6; ++i) u[i] = rng.normal();

  const VectorXd got =
      p.blocks[0].update(BlockUpdateContext{u, solver.alpha, x_prev,
                                            p.blocks[0]});
  const double tau = default_tau(inst.A);
  const VectorXd v =
      x_prev - inst.A.transpose() * (inst.A * x_prev + u) / tau;
  for (Index j = 0; j < 9; ++j)
    CHECK(got[j] == mcp_prox(v[j], McpParams(0.6, 2.2), solver.alpha * tau));
}

TEST_CASE("regression y oracle solves its quadratic exactly") {
  const SparseRegressionInstance inst = gen_sparse_regression(5, 7, 2, 0.0, 9);
  ScadMcpRegressionConfig cfg;
  cfg.A_meas = inst.A;
  cfg.y0 = inst.y0;
  cfg.mu = 1.5;
  SolverConfig solver;
  solver.alpha = 2.0;
  const ProblemSpec p = build_scad_mcp_regression(cfg, solver);

  Rng rng(5);
  VectorXd w(5), y_prev(5);
  for (Index i = 0; i < 5; ++i) w[i] = rng.normal();
  for (Index i = 0; i < 5; ++i) y_prev[i] = rng.normal();
  const ProximalMatrix P = ProximalMatrix::ScaledIdentity(5, 0.7);

  // minimizer of (mu/2)||y - y0||^2 + (alpha/2)||-y + w||^2 + (p/2)||y - y_prev||^2
  const VectorXd expect =
      (cfg.mu * inst.y0 + solver.alpha * w + 0.7 * y_prev) /
      (cfg.mu + solver.alpha + 0.7);
  const VectorXd got =
      p.y_update(YUpdateContext{w, solver.alpha, y_prev, P, p});
  CHECK((got - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("regression solve recovers a sparse signal on an easy instance") {
  const SparseRegressionInstance inst =
      gen_sparse_regression(30, 20, 3, 0.0, 17);
  ScadMcpRegressionConfig cfg;
  cfg.A_meas = inst.A;
  cfg.y0 = inst.y0;
  cfg.mu = 1.0;
  cfg.penalty = ScadParams(0.05, 3.7);
  SolverConfig solver;
  solver.alpha = 4.0;
  solver.max_iter = 5000;
  solver.tol_residual = 1e-8;
  solver.tol_step = 1e-8;

  const ProblemSpec p = build_scad_mcp_regression(cfg, solver);
  const SolveResult res = solve(p, solver);
  REQUIRE(res.reason == TerminationReason::converged);
  CHECK(res.trace.back().residual_norm <= 1e-8);
  // the tall noiseless design identifies x_true up to the penalty bias
  CHECK((res.final.x[0] - inst.x_true).norm() / inst.x_true.norm() < 0.05);
}

TEST_CASE("sparse regression generator is deterministic and well formed") {
  const SparseRegressionInstance a = gen_sparse_regression(10, 25, 4, 0.0, 99);
  const SparseRegressionInstance b = gen_sparse_regression(10, 25, 4, 0.0, 99);
  CHECK(a.A == b.A);
  CHECK(a.y0 == b.y0);
  CHECK(a.x_true == b.x_true);
  CHECK(a.support == b.support);
  const SparseRegressionInstance c = gen_sparse_regression(10, 25, 4, 0.0, 100);
  CHECK(a.A != c.A);

  REQUIRE(a.support.size() == 4);
  CHECK(std::is_sorted(a.support.begin(), a.support.end()));
  Index nnz = 0;
  for (Index j = 0; j < 25; ++j)
    if (a.x_true[j] != 0.0) ++nnz;
  CHECK(nnz == 4);
  for (Index pos : a.support) {
    CHECK(std::abs(a.x_true[pos]) >= 0.5);
    CHECK(std::abs(a.x_true[pos]) <= 1.5);
  }
  // noiseless observations are exactly A x_true
  CHECK(a.y0 == a.A * a.x_true);

  // noise perturbs y0 only
  const SparseRegressionInstance d = gen_sparse_regression(10, 25, 4, 0.1, 99);
  CHECK(d.A == a.A);
  CHECK(d.x_true == a.x_true);
  CHECK(d.y0 != a.y0);

  CHECK_THROWS_AS(gen_sparse_regression(0, 5, 1, 0.0, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(gen_sparse_regression(5, 5, 6, 0.0, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(gen_sparse_regression(5, 5, 1, -0.1, 1),
                  std::invalid_argument);
}

TEST_CASE("generator draw order is part of the contract") {
  // design entries come first, in column-major order
  const SparseRegressionInstance inst = gen_sparse_regression(3, 2, 0, 0.0, 7);
  Rng replay(7);
  const double scale = 1.0 / std::sqrt(3.0);
  CHECK(inst.A(0, 0) == replay.normal() * scale);
  CHECK(inst.A(1, 0) == replay.normal() * scale);
  CHECK(inst.A(2, 0) == replay.normal() * scale);
  CHECK(inst.A(0, 1) == replay.normal() * scale);
}

TEST_CASE("decomposition instance generator is deterministic and well formed") {
  const SlrInstance a = gen_slr_instance(8, 10, 2, 6, 31);
  const SlrInstance b = gen_slr_instance(8, 10, 2, 6, 31);
  CHECK(a.A == b.A);
  CHECK(a.X1_true == b.X1_true);
  CHECK(a.X2_true == b.X2_true);
  CHECK(a.Y_true == b.Y_true);

  CHECK(detail::numerical_rank(a.X1_true) <= 2);
  Index nnz = 0;
  double min_mag = kInf, max_mag = 0.0;
  for (Index i = 0; i < 8; ++i)
    for (Index j = 0; j < 10; ++j)
      if (a.X2_true(i, j) != 0.0) {
        ++nnz;
        min_mag = std::min(min_mag, std::abs(a.X2_true(i, j)));
        max_mag = std::max(max_mag, std::abs(a.X2_true(i, j)));
      }
  CHECK(nnz == 6);
  CHECK(min_mag >= 1.0);
  CHECK(max_mag <= 2.0);
  CHECK(a.A == a.X1_true + a.X2_true + a.Y_true);

  // rows of Y oscillate mildly around their level: column steps stay small
  for (Index i = 0; i < 8; ++i)
    for (Index j = 0; j + 1 < 10; ++j)
      CHECK(std::abs(a.Y_true(i, j + 1) - a.Y_true(i, j)) < 0.2);

  CHECK_THROWS_AS(gen_slr_instance(4, 4, 5, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(gen_slr_instance(4, 4, 1, 17, 1), std::invalid_argument);
}

TEST_CASE("decomposition builder validates its configuration") {
  SlrConfig cfg;
  cfg.A_data = MatrixXd::Zero(4, 5);
  cfg.r = 1;
  cfg.s = 2;
  SolverConfig solver;

  {
    SlrConfig bad = cfg;
    bad.A_data = MatrixXd::Zero(4, 1);  // the column-difference term needs n >= 2
    CHECK_THROWS_AS(build_slr_decomposition(bad, solver),
                    std::invalid_argument);
  }
  {
    SlrConfig bad = cfg;
    bad.r = 5;
    CHECK_THROWS_AS(build_slr_decomposition(bad, solver),
                    std::invalid_argument);
  }
  {
    SlrConfig bad = cfg;
    bad.s = 21;
    CHECK_THROWS_AS(build_slr_decomposition(bad, solver),
                    std::invalid_argument);
  }
  {
    SlrConfig bad = cfg;
    bad.alpha3 = 0.0;
    CHECK_THROWS_AS(build_slr_decomposition(bad, solver),
                    std::invalid_argument);
  }
  {
    SlrConfig bad = cfg;
    bad.lambda_step = 1.0 / (solver.alpha + bad.q1);  // must stay strictly below
    CHECK_THROWS_AS(build_slr_decomposition(bad, solver),
                    std::invalid_argument);
  }
}

TEST_CASE("decomposition problem structure and smooth term") {
  SlrConfig cfg;
  cfg.A_data = MatrixXd::Ones(2, 3);
  cfg.r = 1;
  cfg.s = 2;
  cfg.alpha3 = 0.5;
  SolverConfig solver;

  const ProblemSpec p = build_slr_decomposition(cfg, solver);
  p.validate();
  REQUIRE(p.num_blocks() == 2);
  CHECK(p.blocks[0].A == MatrixXd::Identity(6, 6));
  CHECK(p.B == MatrixXd::Identity(6, 6));
  CHECK(p.b == -VectorXd::Ones(6));
  CHECK(p.smooth.lipschitz == 4.0);  // 8 alpha3

  // the projected-gradient step at t = 0.99/(alpha + q) is the exact
  // minimizer for weight (1/t - alpha) I, which must exceed q I
  const double lam = 0.99 / (solver.alpha + cfg.q1);
  CHECK(p.blocks[0].Q.scale() ==
        Catch::Approx(1.0 / lam - solver.alpha).margin(1e-12));
  CHECK(p.blocks[0].Q.scale() > cfg.q1);

  // h(Y) = a3 sum_j ||Y_{:,j+1} - Y_{:,j}||^2 on a hand example
  MatrixXd Y(2, 3);
  Y << 1.0, 2.0, 4.0, 0.0, 1.0, 1.0;
  // column diffs: (1,1) and (2,0): h = 0.5 (2 + 4) = 3
  const VectorXd y = Eigen::Map<const VectorXd>(Y.data(), 6);
  CHECK(p.smooth.value(y) == Catch::Approx(3.0).margin(1e-14));

  // gradient vs central differences
  const VectorXd g = p.smooth.gradient(y);
  for (Index i = 0; i < 6; ++i) {
    VectorXd e = VectorXd::Zero(6);
    e[i] = 1e-6;
    const double fd =
        (p.smooth.value(y + e) - p.smooth.value(y - e)) / 2e-6;
    CHECK(g[i] == Catch::Approx(fd).margin(1e-6));
  }
}

TEST_CASE("decomposition indicators accept exactly the feasible matrices") {
  SlrConfig cfg;
  cfg.A_data = MatrixXd::Zero(3, 3);
  cfg.r = 1;
  cfg.s = 2;
  SolverConfig solver;
  const ProblemSpec p = build_slr_decomposition(cfg, solver);

  VectorXd u(3), v(3);
  u << 1.0, 2.0, 3.0;
  v << 1.0, 0.0, -1.0;
  const MatrixXd rank1 = u * v.transpose();
  CHECK(p.blocks[0].f_value(detail::as_vector(rank1)) == 0.0);
  CHECK(p.blocks[0].f_value(detail::as_vector(MatrixXd(
            rank1 + VectorXd::Unit(3, 0) * VectorXd::Unit(3, 1).transpose()))) ==
        kInf);

  VectorXd sparse = VectorXd::Zero(9);
  sparse[1] = 2.0;
  sparse[7] = -1.0;
  CHECK(p.blocks[1].f_value(sparse) == 0.0);
  sparse[4] = 0.5;
  CHECK(p.blocks[1].f_value(sparse) == kInf);
}

TEST_CASE("tridiagonal row solver matches a dense solve") {
  Rng rng(21);
  const Index n = 9;
  VectorXd diag(n);
  for (Index i = 0; i < n; ++i) diag[i] = 3.0 + rng.uniform();
  const double off = -0.9;
  MatrixXd rhs(4, n);
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < n; ++j) rhs(i, j) = rng.normal();

  MatrixXd T = MatrixXd::Zero(n, n);
  T.diagonal() = diag;
  for (Index j = 0; j + 1 < n; ++j) {
    T(j, j + 1) = off;
    T(j + 1, j) = off;
  }
  const MatrixXd got = detail::solve_tridiagonal_rows(diag, off, rhs);
  const MatrixXd expect = T.ldlt().solve(rhs.transpose()).transpose();
  CHECK((got - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("decomposition y oracle solves the row-wise tridiagonal system") {
  SlrConfig cfg;
  cfg.A_data = MatrixXd::Zero(3, 5);
  cfg.r = 1;
  cfg.s = 2;
  cfg.alpha3 = 0.7;
  SolverConfig solver;
  solver.alpha = 1.3;
  const ProblemSpec p = build_slr_decomposition(cfg, solver);

  Rng rng(13);
  VectorXd offset(15), y_prev(15);
  for (Index i = 0; i < 15; ++i) offset[i] = rng.normal();
  for (Index i = 0; i < 15; ++i) y_prev[i] = rng.normal();
  const ProximalMatrix P = ProximalMatrix::ScaledIdentity(15, 0.4);

  const VectorXd y =
      p.y_update(YUpdateContext{offset, solver.alpha, y_prev, P, p});

  // verify the stationarity of the subproblem via the gradient
  const VectorXd resid = p.smooth.gradient(y) +
                         solver.alpha * (y + offset) +
                         0.4 * (y - y_prev);
  CHECK(resid.cwiseAbs().maxCoeff() < 1e-10);

  const ProximalMatrix dense = ProximalMatrix::Dense(
      MatrixXd(0.4 * MatrixXd::Identity(15, 15)));
  CHECK_THROWS_AS(
      p.y_update(YUpdateContext{offset, solver.alpha, y_prev, dense, p}),
      std::runtime_error);
}

TEST_CASE("exact proximal variant projects the weighted average") {
  SlrConfig cfg;
  cfg.A_data = MatrixXd::Zero(3, 4);
  cfg.r = 1;
  cfg.s = 3;
  cfg.exact_prox = true;
  cfg.q1 = 2.0;
  SolverConfig solver;
  solver.alpha = 1.5;
  const ProblemSpec p = build_slr_decomposition(cfg, solver);
  CHECK(p.blocks[0].Q.scale() == 2.0);  // exact mode keeps the declared weight

  Rng rng(8);
  VectorXd x_prev(12), offset(12);
  for (Index i = 0; i < 12; ++i) x_prev[i] = rng.normal();
  for (Index i = 0; i < 12; ++i) offset[i] = rng.normal();

  const VectorXd got = p.blocks[0].update(
      BlockUpdateContext{offset, solver.alpha, x_prev, p.blocks[0]});
  const VectorXd v = (2.0 * x_prev - 1.5 * offset) / 3.5;
  const VectorXd expect =
      detail::as_vector(project_rank(MatrixXd(detail::as_matrix(v, 3, 4)), 1));
  CHECK(got == expect);
}

TEST_CASE("decomposition solve separates an easy instance") {
  const SlrInstance inst = gen_slr_instance(8, 8, 1, 4, 5);
  SlrConfig cfg;
  cfg.A_data = inst.A;
  cfg.r = 1;
  cfg.s = 4;
  SolverConfig solver;
  solver.alpha = 2.0;
  solver.max_iter = 3000;
  solver.tol_residual = 1e-7;
  solver.tol_step = 1e-7;

  const ProblemSpec p = build_slr_decomposition(cfg, solver);
  const SolveResult res = solve(p, solver);
  REQUIRE(res.reason == TerminationReason::converged);

  // every iterate is feasible for both constraint sets by construction
  CHECK(std::isfinite(res.trace.back().objective));
  const MatrixXd X1 = MatrixXd(detail::as_matrix(res.final.x[0], 8, 8));
  CHECK(detail::numerical_rank(X1) <= 1);
  Index nnz = 0;
  for (Index i = 0; i < res.final.x[1].size(); ++i)
    if (res.final.x[1][i] != 0.0) ++nnz;
  CHECK(nnz <= 4);
  // the three parts reproduce the observation
  const MatrixXd sum = X1 + MatrixXd(detail::as_matrix(res.final.x[1], 8, 8)) +
                       MatrixXd(detail::as_matrix(res.final.y, 8, 8));
  CHECK((sum - inst.A).norm() / inst.A.norm() < 1e-3);
}
