// Command-line front end: rip, certify, recover, oracle, experiment, integrate, gen-matrix.
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "sparseobs/certify.hpp"
#include "sparseobs/errors.hpp"
#include "sparseobs/harness.hpp"
#include "sparseobs/ode.hpp"
#include "sparseobs/recover.hpp"
#include "sparseobs/rip.hpp"
#include "sparseobs/serialization.hpp"

namespace so = sparseobs;

namespace {

int run_rip(const std::string& matrix_path, int sparsity, const std::string& mode, int samples,
            std::uint64_t seed, std::uint64_t budget) {
  const so::Matrix a = so::read_matrix_file(matrix_path);
  if (mode == "exact") {
    std::cout << so::rip_report_to_json(so::rip_constant_exact(a, sparsity, budget)).dump(2) << '\n';
  } else {
    const auto bounds = so::rip_constant_bounds(a, sparsity, samples, seed);
    std::cout << so::Json{{"lower", so::rip_report_to_json(bounds.lower)},
                          {"upper", so::rip_report_to_json(bounds.upper)}}
                     .dump(2)
              << '\n';
  }
  return 0;
}

int run_certify(const std::string& system_path, const std::string& matrix_path, int sparsity, double tau,
                double time, std::uint64_t budget) {
  const so::DynamicalSystem system = so::system_from_json(so::read_json_file(system_path));
  const so::Matrix a = so::read_matrix_file(matrix_path);
  so::CertifyOptions options;
  options.rip_budget = budget;
  const so::Certificate cert = so::certify_instance(system, a, sparsity, tau, time, options);
  std::cout << so::certificate_to_json(cert).dump(2) << '\n';
  return 0;
}

so::SolverConfig load_solver_config(const std::string& path) {
  if (path.empty()) return {};
  return so::solver_config_from_json(so::read_json_file(path));
}

int emit_outcome(const so::RecoveryOutcome& outcome, const std::string& csv_path) {
  std::cout << so::outcome_to_json(outcome).dump(2) << '\n';
  if (!csv_path.empty()) {
    std::ofstream out(csv_path);
    if (!out) throw std::runtime_error("cannot open '" + csv_path + "' for writing");
    so::write_vector_csv(out, outcome.estimate, "estimate");
  }
  return outcome.converged ? 0 : 3;
}

int run_integrate(const std::string& system_path, const std::string& x0_path, double time, int steps,
                  double tolerance, const std::string& out_path) {
  const so::DynamicalSystem system = so::system_from_json(so::read_json_file(system_path));
  const so::Json x0_json = so::read_json_file(x0_path);
  const so::Vector x0 = so::vector_from_json(x0_json.is_object() ? x0_json.at("x0") : x0_json, "x0");
  const so::IntegrationConfig cfg =
      tolerance > 0.0 ? so::IntegrationConfig::adaptive(tolerance) : so::IntegrationConfig::fixed(steps);
  const so::Trajectory traj = so::integrate(system, x0, time, cfg);
  if (out_path.empty()) {
    so::write_trajectory_csv(std::cout, traj);
  } else {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot open '" + out_path + "' for writing");
    so::write_trajectory_csv(out, traj);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse initial-state observability certificates and recovery"};
  app.require_subcommand(1);

  // rip
  std::string rip_matrix;
  int rip_s = 1;
  std::string rip_mode = "exact";
  int rip_samples = 1000;
  std::uint64_t rip_seed = 0;
  std::uint64_t rip_budget = so::kDefaultRipBudget;
  auto* rip = app.add_subcommand("rip", "Restricted isometry constant of a matrix");
  rip->add_option("--matrix", rip_matrix, "Matrix file (.json or .csv)")->required()->check(CLI::ExistingFile);
  rip->add_option("--sparsity", rip_s, "Sparsity level s")->required();
  rip->add_option("--mode", rip_mode, "exact | bounds")->check(CLI::IsMember({"exact", "bounds"}));
  rip->add_option("--samples", rip_samples, "Monte-Carlo supports (bounds mode)");
  rip->add_option("--seed", rip_seed, "Monte-Carlo seed (bounds mode)");
  rip->add_option("--budget", rip_budget, "Maximum supports to enumerate (exact mode)");

  // certify
  std::string cert_system, cert_matrix;
  int cert_s = 1;
  double cert_tau = 1.0, cert_time = 0.0;
  std::uint64_t cert_budget = so::kDefaultRipBudget;
  auto* certify = app.add_subcommand("certify", "Observability horizon and recovery constants");
  certify->add_option("--system", cert_system, "System JSON")->required()->check(CLI::ExistingFile);
  certify->add_option("--matrix", cert_matrix, "Matrix file (.json or .csv)")->required()->check(CLI::ExistingFile);
  certify->add_option("--sparsity", cert_s, "Sparsity level s")->required();
  certify->add_option("--tau", cert_tau, "Weight condition number (>= 1)");
  certify->add_option("--time", cert_time, "Observation time T")->required();
  certify->add_option("--budget", cert_budget, "Maximum supports to enumerate for delta_2s");

  // recover / oracle
  std::string problem_path, solver_path, estimate_csv;
  auto* recover = app.add_subcommand("recover", "Weighted l1 recovery of the initial state");
  recover->add_option("--problem", problem_path, "Problem JSON")->required()->check(CLI::ExistingFile);
  recover->add_option("--solver-config", solver_path, "Solver config JSON")->check(CLI::ExistingFile);
  recover->add_option("--estimate-csv", estimate_csv, "Write the estimate as CSV");
  int steps = so::IntegrationConfig::kDefaultSteps;
  recover->add_option("--steps", steps, "RK4 steps over [0, T]");

  std::string oracle_problem, oracle_csv;
  std::uint64_t oracle_budget = so::kDefaultOracleBudget;
  double oracle_tol = 1e-6;
  auto* oracle = app.add_subcommand("oracle", "Brute-force sparsest initial state (small m)");
  oracle->add_option("--problem", oracle_problem, "Problem JSON")->required()->check(CLI::ExistingFile);
  oracle->add_option("--solver-config", solver_path, "Solver config JSON (uses residual_match_tol)")
      ->check(CLI::ExistingFile);
  oracle->add_option("--estimate-csv", oracle_csv, "Write the estimate as CSV");
  oracle->add_option("--budget", oracle_budget, "Maximum supports to enumerate");
  oracle->add_option("--steps", steps, "RK4 steps over [0, T]");

  // experiment
  std::string exp_config, exp_out, exp_format = "csv";
  int workers = 1;
  bool force = false;
  auto* experiment = app.add_subcommand("experiment", "Seeded generate/certify/recover sweep");
  experiment->add_option("--config", exp_config, "Experiment config JSON")->required()->check(CLI::ExistingFile);
  experiment->add_option("--out", exp_out, "Report path")->required();
  experiment->add_option("--format", exp_format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
  experiment->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  experiment->add_flag("--force", force, "Also solve trials whose certificate is infeasible");

  // integrate
  std::string int_system, int_x0, int_out;
  double int_time = 1.0, int_tol = 0.0;
  auto* integrate = app.add_subcommand("integrate", "Integrate a system and export the trajectory CSV");
  integrate->add_option("--system", int_system, "System JSON")->required()->check(CLI::ExistingFile);
  integrate->add_option("--x0", int_x0, "Initial state JSON (array or {\"x0\": [...]})")->required()->check(CLI::ExistingFile);
  integrate->add_option("--time", int_time, "Final time T")->required();
  integrate->add_option("--steps", steps, "RK4 steps");
  integrate->add_option("--tolerance", int_tol, "Use adaptive RK45 with this tolerance");
  integrate->add_option("--out", int_out, "CSV path (default: stdout)");

  // gen-matrix
  int gen_n = 1, gen_m = 1;
  std::uint64_t gen_seed = 0;
  double gen_scale = 1.0;
  bool gen_normalize = false;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen-matrix", "Seeded Gaussian measurement matrix as CSV");
  gen->add_option("--n", gen_n, "Rows")->required();
  gen->add_option("--m", gen_m, "Columns")->required();
  gen->add_option("--seed", gen_seed, "Seed")->required();
  gen->add_option("--scale", gen_scale, "Scale (entry sd = scale / sqrt(n))");
  gen->add_flag("--normalize-columns", gen_normalize, "Rescale columns to unit norm");
  gen->add_option("--out", gen_out, "CSV path (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (rip->parsed()) return run_rip(rip_matrix, rip_s, rip_mode, rip_samples, rip_seed, rip_budget);
    if (certify->parsed()) return run_certify(cert_system, cert_matrix, cert_s, cert_tau, cert_time, cert_budget);
    if (recover->parsed()) {
      const so::SparseProblem problem = so::problem_from_json(so::read_json_file(problem_path));
      const auto outcome = so::recover_initial_state(problem, so::IntegrationConfig::fixed(steps),
                                                     load_solver_config(solver_path));
      return emit_outcome(outcome, estimate_csv);
    }
    if (oracle->parsed()) {
      const so::SparseProblem problem = so::problem_from_json(so::read_json_file(oracle_problem));
      if (!solver_path.empty()) oracle_tol = load_solver_config(solver_path).residual_match_tol;
      const auto outcome = so::l0_oracle(problem, so::IntegrationConfig::fixed(steps), oracle_budget, oracle_tol);
      return emit_outcome(outcome, oracle_csv);
    }
    if (experiment->parsed()) {
      const so::ExperimentConfig cfg = so::experiment_config_from_json(so::read_json_file(exp_config));
      const auto records = so::run_experiment(cfg, workers, force);
      so::emit_report(records, exp_format == "csv" ? so::ReportFormat::csv : so::ReportFormat::json, exp_out,
                      std::cout, cfg.bound_tolerance);
      return so::summarize(records, cfg.bound_tolerance).all_feasible_satisfied ? 0 : 1;
    }
    if (integrate->parsed()) return run_integrate(int_system, int_x0, int_time, steps, int_tol, int_out);
    if (gen->parsed()) {
      so::Matrix a = so::gen_gaussian_matrix(gen_n, gen_m, gen_seed, gen_scale);
      if (gen_normalize) a = so::normalize_columns(std::move(a));
      if (gen_out.empty()) {
        so::write_matrix_csv(std::cout, a);
      } else {
        std::ofstream out(gen_out);
        if (!out) throw std::runtime_error("cannot open '" + gen_out + "' for writing");
        so::write_matrix_csv(out, a);
      }
      return 0;
    }
  } catch (const so::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const so::InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
