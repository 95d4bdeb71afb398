#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sparseobs/certify.hpp"
#include "sparseobs/model.hpp"
#include "sparseobs/ode.hpp"
#include "sparseobs/recover.hpp"
#include "sparseobs/serialization.hpp"

namespace sparseobs {

/// How each trial builds its dynamical system. Non-zero kinds take exactly one of
/// an explicit matrix, c * I, or a Gaussian matrix rescaled to a given operator norm.
struct SystemSpec {
  RhsKind kind = RhsKind::zero;
  std::optional<Matrix> matrix;
  std::optional<double> identity_scale;
  std::optional<double> random_norm;
  std::optional<Vector> bias;
};

struct MatrixSpec {
  int n = 1;
  int m = 1;
  std::string ensemble = "gaussian";
  double scale = 1.0;
  bool normalize_columns = false;
};

enum class Magnitudes { unit, uniform };

struct SignalSpec {
  Magnitudes magnitudes = Magnitudes::unit;  // unit: +/-1; uniform: +/-U[0.5, 1.5]
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  int trials = 1;
  SystemSpec system;
  MatrixSpec matrix;
  int sparsity = 1;
  SignalSpec signal;
  double noise = 0.0;
  std::optional<double> time;       // nullopt: auto
  double auto_time_fraction = 0.9;  // T = fraction * min(horizons) in auto mode
  double fallback_time = 1.0;       // auto mode when every horizon is unbounded
  std::optional<Vector> weights;    // nullopt: all ones
  SolverConfig solver;
  IntegrationConfig integration;
  std::uint64_t rip_budget = kDefaultRipBudget;
  double bound_tolerance = 1e-6;
  bool oracle_check = false;        // also run l0_oracle and compare supports
  bool record_wall_time = true;     // false writes wall_ms = 0 for byte-stable reports
};

[[nodiscard]] ExperimentConfig experiment_config_from_json(const Json& j);
[[nodiscard]] Json experiment_config_to_json(const ExperimentConfig& cfg);

struct TrialRecord {
  int trial = 0;
  std::uint64_t seed = 0;
  int s = 0;
  int n = 0;
  int m = 0;
  double time = 0.0;
  double eps = 0.0;
  std::vector<int> support;
  std::vector<double> values;
  // certificate summary
  bool feasible = false;
  std::vector<std::string> reasons;
  double delta_2s = 0.0;
  double op_norm = 0.0;
  double tau = 1.0;
  double C0 = 0.0;  // NaN when not emitted
  double C1 = 0.0;
  Json horizon_T_max;
  Json thm2_T_max;
  // recovery
  bool solved = false;
  bool converged = false;
  std::string message;
  double error_l2 = 0.0;
  double bound = 0.0;
  bool bound_satisfied = false;
  double residual = 0.0;
  int iterations = 0;
  double wall_ms = 0.0;
  // l0 cross-check, when requested
  std::optional<bool> oracle_support_match;
  std::optional<double> oracle_max_diff;
};

/// i.i.d. N(0, (scale / sqrt(n))^2) entries, filled row-major from the Philox stream of `seed`.
[[nodiscard]] Matrix gen_gaussian_matrix(int n, int m, std::uint64_t seed, double scale);

/// Rescales every nonzero column to unit Euclidean norm.
[[nodiscard]] Matrix normalize_columns(Matrix a);

/// Runs one trial; its randomness depends only on (config.seed, index).
[[nodiscard]] TrialRecord run_trial(const ExperimentConfig& config, int index, bool force = false);

/// All trials, in trial order, executed on `workers` threads.
[[nodiscard]] std::vector<TrialRecord> run_experiment(const ExperimentConfig& config, int workers = 1,
                                                      bool force = false);

enum class ReportFormat { csv, json };

/// CSV columns: trial,feasible,s,n,m,T,eps,error_l2,bound,bound_satisfied,residual,iterations,wall_ms
void write_report_csv(std::ostream& out, const std::vector<TrialRecord>& records);
void write_report_json(std::ostream& out, const std::vector<TrialRecord>& records);
[[nodiscard]] Json trial_record_to_json(const TrialRecord& record);

struct ReportSummary {
  int trials = 0;
  int feasible = 0;
  int solved = 0;
  double mean_error = 0.0;
  double max_error_bound_ratio = 0.0;  // max error / (bound + tolerance) over feasible solved trials
  bool all_feasible_satisfied = true;
};

[[nodiscard]] ReportSummary summarize(const std::vector<TrialRecord>& records, double bound_tolerance = 1e-6);

/// Writes the report file and a one-line summary footer to `summary_out`.
void emit_report(const std::vector<TrialRecord>& records, ReportFormat format, const std::filesystem::path& path,
                 std::ostream& summary_out, double bound_tolerance = 1e-6);

}  // namespace sparseobs
