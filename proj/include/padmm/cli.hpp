#pragma once

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "padmm/diagnostics.hpp"
#include "padmm/engine.hpp"
#include "padmm/io.hpp"
#include "padmm/problems.hpp"

namespace padmm {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Run configuration
//
// {
//   "problem": { "kind": "scad_regression" | "mcp_regression" | "slr"
//                        | "custom", ... },
//   "solver":  { "alpha", "beta", "epsilon0", "max_iter", "tol_residual",
//                "tol_step", "check_level", "P_scale" | "P_file" },
//   "output":  { "trace": "path.csv", "report": "path.json" },
//   "seed": 42
// }
//
// Generator-backed problems draw their data from the seed; file-backed ones
// name matrix files instead (".csv" text, anything else binary).
// ---------------------------------------------------------------------------

struct LoadedRun {
  ProblemSpec problem;
  SolverConfig solver;
  std::uint64_t seed = 42;
  std::optional<std::filesystem::path> trace_path;
  std::optional<std::filesystem::path> report_path;
  std::string kind;
};

namespace cli_detail {

inline double get_or(const json& j, const char* key, double fallback) {
  return j.contains(key) ? j.at(key).get<double>() : fallback;
}

inline CheckLevel parse_check_level(const std::string& s) {
  if (s == "off") return CheckLevel::off;
  if (s == "cheap") return CheckLevel::cheap;
  if (s == "full") return CheckLevel::full;
  throw std::runtime_error("unknown check_level '" + s +
                           "' (expected off, cheap or full)");
}

inline SolverConfig parse_solver(const json& j,
                                 const std::filesystem::path& base) {
  SolverConfig cfg;
  cfg.alpha = get_or(j, "alpha", cfg.alpha);
  cfg.beta = get_or(j, "beta", cfg.beta);
  cfg.epsilon0 = get_or(j, "epsilon0", cfg.epsilon0);
  if (j.contains("max_iter")) cfg.max_iter = j.at("max_iter").get<int>();
  cfg.tol_residual = get_or(j, "tol_residual", cfg.tol_residual);
  cfg.tol_step = get_or(j, "tol_step", cfg.tol_step);
  if (j.contains("check_level"))
    cfg.check_level = parse_check_level(j.at("check_level").get<std::string>());
  if (j.contains("P_file"))
    cfg.P = ProximalMatrix::Dense(
        load_matrix(base / j.at("P_file").get<std::string>()));
  // P_scale needs the y dimension and is resolved by the caller
  cfg.validate();
  return cfg;
}

inline PenaltyParams parse_penalty(const json& j, const std::string& kind) {
  const double lambda = get_or(j, "lambda", 0.5);
  if (kind == "scad_regression")
    return ScadParams(lambda, get_or(j, "theta", 3.7));
  return McpParams(lambda, get_or(j, "theta", 2.0));
}

inline std::filesystem::path resolve(const std::filesystem::path& base,
                                     const std::string& rel) {
  const std::filesystem::path p(rel);
  return p.is_absolute() ? p : base / p;
}

}  // namespace cli_detail

// Build a fully quadratic problem from matrix files: per block A, f-Hessian
// H, f-gradient g and optionally Q; then B, b and the quadratic smooth term.
inline ProblemSpec build_custom_from_files(const json& j,
                                           const std::filesystem::path& base) {
  ProblemSpec prob;
  if (!j.contains("blocks") || !j.at("blocks").is_array() ||
      j.at("blocks").empty())
    throw std::runtime_error("custom problem: nonempty 'blocks' array required");
  for (const json& bj : j.at("blocks")) {
    BlockSpec blk;
    blk.A = load_matrix(
        cli_detail::resolve(base, bj.at("A_file").get<std::string>()));
    MatrixXd H = load_matrix(
        cli_detail::resolve(base, bj.at("H_file").get<std::string>()));
    VectorXd g = load_vector(
        cli_detail::resolve(base, bj.at("g_file").get<std::string>()));
    if (bj.contains("Q_file"))
      blk.Q = ProximalMatrix::Dense(load_matrix(
          cli_detail::resolve(base, bj.at("Q_file").get<std::string>())));
    else
      blk.Q = ProximalMatrix::Zero(blk.A.cols());
    blk.f_value = [H, g](const VectorXd& x) {
      return 0.5 * x.dot(H * x) + g.dot(x);
    };
    blk.update = make_exact_quadratic_block_oracle(H, g);
    prob.blocks.push_back(std::move(blk));
  }
  prob.B = load_matrix(
      cli_detail::resolve(base, j.at("B_file").get<std::string>()));
  prob.b = load_vector(
      cli_detail::resolve(base, j.at("b_file").get<std::string>()));
  MatrixXd Hh = load_matrix(
      cli_detail::resolve(base, j.at("h_H_file").get<std::string>()));
  VectorXd gh = load_vector(
      cli_detail::resolve(base, j.at("h_g_file").get<std::string>()));
  prob.smooth.value = [Hh, gh](const VectorXd& y) {
    return 0.5 * y.dot(Hh * y) + gh.dot(y);
  };
  prob.smooth.gradient = [Hh, gh](const VectorXd& y) {
    return VectorXd(Hh * y + gh);
  };
  prob.smooth.lipschitz = j.contains("L_h") ? j.at("L_h").get<double>()
                                            : spectral_norm(Hh);
  prob.y_update = make_exact_quadratic_y_oracle(Hh, gh);
  return prob;
}

inline LoadedRun load_run_config(const std::filesystem::path& config_path,
                                 std::optional<std::uint64_t> seed_override) {
  std::ifstream in(config_path);
  if (!in)
    throw std::runtime_error("cannot open config " + config_path.string());
  json j = json::parse(in);
  const std::filesystem::path base =
      config_path.has_parent_path() ? config_path.parent_path()
                                    : std::filesystem::path(".");

  LoadedRun run;
  if (j.contains("seed")) run.seed = j.at("seed").get<std::uint64_t>();
  if (seed_override) run.seed = *seed_override;
  run.solver = j.contains("solver")
                   ? cli_detail::parse_solver(j.at("solver"), base)
                   : SolverConfig{};

  const json& pj = j.at("problem");
  run.kind = pj.at("kind").get<std::string>();
  if (run.kind == "scad_regression" || run.kind == "mcp_regression") {
    ScadMcpRegressionConfig cfg;
    if (pj.contains("matrix_file")) {
      cfg.A_meas = load_matrix(
          cli_detail::resolve(base, pj.at("matrix_file").get<std::string>()));
      cfg.y0 = load_vector(
          cli_detail::resolve(base, pj.at("y0_file").get<std::string>()));
    } else {
      const auto m = pj.at("m").get<Index>();
      const auto n = pj.at("n").get<Index>();
      const auto k_nnz = pj.at("k_nnz").get<Index>();
      const double noise = cli_detail::get_or(pj, "noise_sd", 0.0);
      SparseRegressionInstance inst =
          gen_sparse_regression(m, n, k_nnz, noise, run.seed);
      cfg.A_meas = std::move(inst.A);
      cfg.y0 = std::move(inst.y0);
    }
    cfg.mu = cli_detail::get_or(pj, "mu", 1.0);
    cfg.penalty = cli_detail::parse_penalty(pj, run.kind);
    cfg.tau = cli_detail::get_or(pj, "tau", 0.0);
    run.problem = build_scad_mcp_regression(cfg, run.solver);
  } else if (run.kind == "slr") {
    SlrConfig cfg;
    cfg.r = pj.at("r").get<Index>();
    cfg.s = pj.at("s").get<Index>();
    if (pj.contains("matrix_file")) {
      cfg.A_data = load_matrix(
          cli_detail::resolve(base, pj.at("matrix_file").get<std::string>()));
    } else {
      const auto m = pj.at("m").get<Index>();
      const auto n = pj.at("n").get<Index>();
      cfg.A_data = gen_slr_instance(m, n, cfg.r, cfg.s, run.seed).A;
    }
    cfg.alpha1 = cli_detail::get_or(pj, "alpha1", 1.0);
    cfg.alpha2 = cli_detail::get_or(pj, "alpha2", 1.0);
    cfg.alpha3 = cli_detail::get_or(pj, "alpha3", 1.0);
    cfg.q1 = cli_detail::get_or(pj, "q1", 1.0);
    cfg.q2 = cli_detail::get_or(pj, "q2", 1.0);
    cfg.lambda_step = cli_detail::get_or(pj, "lambda_step", 0.0);
    cfg.gamma_step = cli_detail::get_or(pj, "gamma_step", 0.0);
    if (pj.contains("exact_prox"))
      cfg.exact_prox = pj.at("exact_prox").get<bool>();
    run.problem = build_slr_decomposition(cfg, run.solver);
  } else if (run.kind == "custom") {
    run.problem = build_custom_from_files(pj, base);
  } else {
    throw std::runtime_error("unknown problem kind '" + run.kind + "'");
  }

  // P_scale needs the y dimension, resolved only now
  if (j.contains("solver") && j.at("solver").contains("P_scale") &&
      !j.at("solver").contains("P_file")) {
    const double s = j.at("solver").at("P_scale").get<double>();
    run.solver.P = ProximalMatrix::ScaledIdentity(run.problem.q(), s);
  }

  if (j.contains("output")) {
    const json& oj = j.at("output");
    if (oj.contains("trace"))
      run.trace_path =
          cli_detail::resolve(base, oj.at("trace").get<std::string>());
    if (oj.contains("report"))
      run.report_path =
          cli_detail::resolve(base, oj.at("report").get<std::string>());
  }
  return run;
}

inline json constants_to_json(const ConstantsBundle& c) {
  return json{{"rho_beta", c.rho_beta},
              {"c1", c.c1},
              {"c2", c.c2},
              {"c3", c.c3},
              {"c4", c.c4},
              {"c5", c.c5},
              {"c6", c.c6},
              {"lambda_min_D_bar", c.lambda_min_D_bar},
              {"tau_bar", c.tau_bar},
              {"sigma", c.sigma},
              {"lambda_pp_BtB", c.lambda_pp_BtB},
              {"rho_sub", c.rho_sub},
              {"rho_tilde", c.rho_tilde},
              {"r1", c.r1},
              {"r2", c.r2},
              {"sigma_positive", c.sigma_positive},
              {"r1_positive", c.r1_positive},
              {"r2_positive", c.r2_positive}};
}

// Run the solver per config; exit 0 on convergence, 2 on hitting the
// iteration cap, 1 on any error.
inline int cmd_run(const std::filesystem::path& config_path,
                   std::optional<std::uint64_t> seed_override) {
  const LoadedRun run = load_run_config(config_path, seed_override);
  const SolveResult res = solve(run.problem, run.solver);
  for (const std::string& w : res.warnings)
    std::cerr << "warning: " << w << '\n';
  if (res.reason == TerminationReason::oracle_failure) {
    std::cerr << "error: " << res.failure_message << '\n';
    return 1;
  }

  const double stat = stationarity_measure(run.problem, run.solver, res.final);
  if (run.trace_path) write_trace_csv(*run.trace_path, res.trace);
  if (run.report_path) {
    json rep{{"kind", run.kind},
             {"seed", run.seed},
             {"reason", to_string(res.reason)},
             {"iterations", res.trace.size()},
             {"objective",
              res.trace.empty() ? 0.0 : res.trace.back().objective},
             {"residual",
              res.trace.empty() ? 0.0 : res.trace.back().residual_norm},
             {"stationarity", stat},
             {"constants", constants_to_json(res.constants)},
             {"warnings", res.warnings}};
    atomic_write_file(*run.report_path, rep.dump(2) + "\n");
  }

  std::cout << to_string(res.reason) << " after " << res.trace.size()
            << " iterations; residual "
            << (res.trace.empty() ? 0.0 : res.trace.back().residual_norm)
            << ", objective "
            << (res.trace.empty() ? 0.0 : res.trace.back().objective)
            << ", stationarity " << stat << '\n';
  return res.reason == TerminationReason::converged ? 0 : 2;
}

// Re-run with full checking and report every certificate.  Exit 0 only if
// all applicable checks pass; the Lyapunov decrease is informational when
// sigma <= 0 and the dual bounds when the range condition fails.
inline int cmd_verify(const std::filesystem::path& config_path,
                      std::optional<std::uint64_t> seed_override) {
  LoadedRun run = load_run_config(config_path, seed_override);
  run.solver.check_level = CheckLevel::full;
  const SolveResult res = solve(run.problem, run.solver);
  for (const std::string& w : res.warnings)
    std::cerr << "warning: " << w << '\n';
  if (res.reason == TerminationReason::oracle_failure) {
    std::cerr << "error: " << res.failure_message << '\n';
    return 1;
  }

  struct Row {
    std::size_t total = 0, passed = 0;
    double worst = -kInf;  // max of lhs - rhs - slack
    int worst_k = 0;
    bool enforced = true;
  };
  std::map<std::string, Row> rows;
  auto absorb = [&rows](const std::vector<CheckReport>& reports,
                        bool enforced) {
    for (const CheckReport& r : reports) {
      Row& row = rows[r.name];
      row.enforced = enforced;
      ++row.total;
      if (r.passed) ++row.passed;
      const double margin = r.lhs - r.rhs - r.slack;
      if (margin > row.worst) {
        row.worst = margin;
        row.worst_k = r.k;
      }
    }
  };

  absorb(check_sufficient_decrease(res.constants, res.trace),
         res.constants.sigma_positive);
  absorb(check_per_update_decrease(run.problem, run.solver, res.details),
         true);
  const DualBoundsResult dual =
      check_dual_bounds(run.problem, run.solver, res.constants, res.details);
  if (dual.skipped)
    std::cout << "dual bounds skipped: " << dual.skip_reason << '\n';
  else
    absorb(dual.reports, true);

  // cheap per-record flags from the run itself
  std::size_t z_total = 0, z_pass = 0, sg_total = 0, sg_pass = 0;
  for (const TraceRecord& rec : res.trace) {
    if (rec.checks.z_identity != CheckOutcome::not_run) {
      ++z_total;
      if (rec.checks.z_identity == CheckOutcome::pass) ++z_pass;
    }
    if (rec.checks.subgradient_bound != CheckOutcome::not_run) {
      ++sg_total;
      if (rec.checks.subgradient_bound == CheckOutcome::pass) ++sg_pass;
    }
  }

  bool all_ok = z_pass == z_total && sg_pass == sg_total;
  std::cout << "check                          pass/total   worst margin\n";
  auto print_counts = [](const std::string& name, std::size_t pass,
                         std::size_t total, const std::string& extra) {
    std::cout << name;
    for (std::size_t i = name.size(); i < 31; ++i) std::cout << ' ';
    std::cout << pass << '/' << total << extra << '\n';
  };
  print_counts("dual_step_identity", z_pass, z_total, "");
  print_counts("subgradient_bound", sg_pass, sg_total, "");
  for (const auto& [name, row] : rows) {
    std::cout << name;
    for (std::size_t i = name.size(); i < 31; ++i) std::cout << ' ';
    std::cout << row.passed << '/' << row.total << "   " << row.worst
              << " (k=" << row.worst_k << ")"
              << (row.enforced ? "" : "   [informational]") << '\n';
    if (row.enforced && row.passed != row.total) all_ok = false;
  }
  std::cout << "sigma = " << res.constants.sigma
            << (res.constants.sigma_positive ? " (> 0)" : " (<= 0)")
            << ", r1 = " << res.constants.r1 << ", r2 = " << res.constants.r2
            << '\n';
  std::cout << (all_ok ? "VERIFY PASS" : "VERIFY FAIL") << '\n';
  return all_ok ? 0 : 1;
}

// Classify the decay of the Lyapunov column of a trace file.
inline int cmd_rate(const std::filesystem::path& trace_path) {
  const std::vector<TraceRecord> trace = read_trace_csv(trace_path);
  const std::vector<double> e = error_sequence_from_trace(trace);
  const RateEstimate est = kl_rate_fit(e);
  json out{{"regime", to_string(est.regime)},
           {"k0", est.k0},
           {"iterations", trace.size()}};
  auto put = [&out](const char* key, double v) {
    if (std::isfinite(v)) out[key] = v;
  };
  put("theta_hat", est.theta_hat);
  put("Q_hat", est.Q_hat);
  put("r_hat", est.r_hat);
  put("mu_hat", est.mu_hat);
  put("fit_r2", est.fit_r2);
  std::cout << out.dump(2) << '\n';
  return 0;
}

}  // namespace padmm
