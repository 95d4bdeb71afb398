#include "sparseobs/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <ostream>
#include <thread>

#include "sparseobs/errors.hpp"
#include "sparseobs/random.hpp"
#include "sparseobs/rip.hpp"

namespace sparseobs {

namespace {

// Per-trial random streams.
enum Stream : std::uint64_t { kMatrixStream = 1, kSystemStream = 2, kSignalStream = 3, kNoiseStream = 4 };

constexpr double kSupportThreshold = 1e-8;

double get_number(const Json& j, const std::string& field) {
  if (!j.is_number()) throw ConfigError("field '" + field + "': expected a number");
  return j.get<double>();
}

long long get_integer(const Json& j, const std::string& field) {
  if (!j.is_number_integer() && !j.is_number_unsigned()) throw ConfigError("field '" + field + "': expected an integer");
  return j.get<long long>();
}

bool get_bool(const Json& j, const std::string& field) {
  if (!j.is_boolean()) throw ConfigError("field '" + field + "': expected true or false");
  return j.get<bool>();
}

SystemSpec system_spec_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("field 'system': expected an object");
  SystemSpec spec;
  for (const auto& [key, value] : j.items()) {
    const std::string field = "system." + key;
    if (key == "rhs") {
      if (!value.is_string()) throw ConfigError("field 'system.rhs': expected a string");
      try {
        spec.kind = rhs_kind_from_string(value.get<std::string>());
      } catch (const DomainError& e) {
        throw ConfigError("field 'system.rhs': " + std::string(e.what()));
      }
    } else if (key == "matrix") {
      spec.matrix = matrix_from_json(value, field);
    } else if (key == "identity_scale") {
      spec.identity_scale = get_number(value, field);
    } else if (key == "random_norm") {
      spec.random_norm = get_number(value, field);
      if (!(*spec.random_norm >= 0.0)) throw ConfigError("field 'system.random_norm': must be >= 0");
    } else if (key == "bias") {
      spec.bias = vector_from_json(value, field);
    } else {
      throw ConfigError("field '" + field + "' is not recognized");
    }
  }
  if (!j.contains("rhs")) throw ConfigError("field 'system.rhs' is required");
  const int sources = int(spec.matrix.has_value()) + int(spec.identity_scale.has_value()) + int(spec.random_norm.has_value());
  if (spec.kind == RhsKind::zero && sources != 0) throw ConfigError("field 'system': the zero system takes no matrix");
  if (spec.kind != RhsKind::zero && sources != 1) {
    throw ConfigError("field 'system': set exactly one of 'matrix', 'identity_scale', 'random_norm'");
  }
  return spec;
}

MatrixSpec matrix_spec_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("field 'matrix': expected an object");
  MatrixSpec spec;
  for (const auto& [key, value] : j.items()) {
    const std::string field = "matrix." + key;
    if (key == "n") spec.n = static_cast<int>(get_integer(value, field));
    else if (key == "m") spec.m = static_cast<int>(get_integer(value, field));
    else if (key == "ensemble") {
      if (!value.is_string() || value.get<std::string>() != "gaussian") {
        throw ConfigError("field 'matrix.ensemble': only \"gaussian\" is supported");
      }
    } else if (key == "scale") spec.scale = get_number(value, field);
    else if (key == "normalize_columns") spec.normalize_columns = get_bool(value, field);
    else throw ConfigError("field '" + field + "' is not recognized");
  }
  if (!j.contains("n") || !j.contains("m")) throw ConfigError("field 'matrix': 'n' and 'm' are required");
  if (spec.n < 1 || spec.m < 1) throw ConfigError("field 'matrix': n and m must be >= 1");
  if (!(spec.scale > 0.0)) throw ConfigError("field 'matrix.scale': must be > 0");
  return spec;
}

SignalSpec signal_spec_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("field 'signal': expected an object");
  SignalSpec spec;
  for (const auto& [key, value] : j.items()) {
    if (key == "support") {
      if (!value.is_string() || value.get<std::string>() != "uniform") {
        throw ConfigError("field 'signal.support': only \"uniform\" is supported");
      }
    } else if (key == "magnitudes") {
      const std::string v = value.is_string() ? value.get<std::string>() : "";
      if (v == "unit") spec.magnitudes = Magnitudes::unit;
      else if (v == "uniform") spec.magnitudes = Magnitudes::uniform;
      else throw ConfigError("field 'signal.magnitudes': expected \"unit\" or \"uniform\"");
    } else {
      throw ConfigError("field 'signal." + key + "' is not recognized");
    }
  }
  return spec;
}

DynamicalSystem build_system(const SystemSpec& spec, int m, std::uint64_t seed) {
  if (spec.kind == RhsKind::zero) return DynamicalSystem::zero(m);
  Matrix mat;
  if (spec.matrix) {
    mat = *spec.matrix;
  } else if (spec.identity_scale) {
    mat = *spec.identity_scale * Matrix::Identity(m, m);
  } else {
    RandomStream rng(seed, 0);
    mat.resize(m, m);
    for (int i = 0; i < m; ++i) {
      for (int k = 0; k < m; ++k) mat(i, k) = rng.normal();
    }
    const double norm = Eigen::JacobiSVD<Matrix>(mat).singularValues()(0);
    mat *= *spec.random_norm / norm;
  }
  if (mat.rows() != m || mat.cols() != m) throw ConfigError("field 'system.matrix': must be m x m");
  Vector bias = spec.bias.value_or(Vector());
  return DynamicalSystem::make(spec.kind, m, std::move(mat), std::move(bias));
}

double horizon_min(const Horizon& a, const Horizon& b) {
  double t = std::numeric_limits<double>::infinity();
  if (a.kind() == Horizon::Kind::finite) t = std::min(t, a.value());
  if (b.kind() == Horizon::Kind::finite) t = std::min(t, b.value());
  return t;
}

}  // namespace

ExperimentConfig experiment_config_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("experiment config: expected a JSON object");
  ExperimentConfig cfg;
  bool has_system = false, has_matrix = false;
  for (const auto& [key, value] : j.items()) {
    if (key == "seed") {
      if (!value.is_number_unsigned() && !value.is_number_integer()) throw ConfigError("field 'seed': expected an integer");
      cfg.seed = value.get<std::uint64_t>();
    } else if (key == "trials") {
      cfg.trials = static_cast<int>(get_integer(value, key));
    } else if (key == "system") {
      cfg.system = system_spec_from_json(value);
      has_system = true;
    } else if (key == "matrix") {
      cfg.matrix = matrix_spec_from_json(value);
      has_matrix = true;
    } else if (key == "sparsity") {
      cfg.sparsity = static_cast<int>(get_integer(value, key));
    } else if (key == "signal") {
      cfg.signal = signal_spec_from_json(value);
    } else if (key == "noise") {
      cfg.noise = get_number(value, key);
    } else if (key == "time") {
      if (value.is_string() && value.get<std::string>() == "auto") cfg.time.reset();
      else cfg.time = get_number(value, key);
    } else if (key == "auto_time_fraction") {
      cfg.auto_time_fraction = get_number(value, key);
    } else if (key == "fallback_time") {
      cfg.fallback_time = get_number(value, key);
    } else if (key == "weights") {
      if (value.is_string() && value.get<std::string>() == "uniform") cfg.weights.reset();
      else cfg.weights = vector_from_json(value, "weights");
    } else if (key == "solver") {
      cfg.solver = solver_config_from_json(value);
    } else if (key == "integration") {
      cfg.integration = integration_config_from_json(value);
    } else if (key == "rip_budget") {
      cfg.rip_budget = static_cast<std::uint64_t>(get_integer(value, key));
    } else if (key == "bound_tolerance") {
      cfg.bound_tolerance = get_number(value, key);
    } else if (key == "oracle_check") {
      cfg.oracle_check = get_bool(value, key);
    } else if (key == "record_wall_time") {
      cfg.record_wall_time = get_bool(value, key);
    } else {
      throw ConfigError("field '" + key + "' is not recognized");
    }
  }
  if (!has_system) throw ConfigError("field 'system' is required");
  if (!has_matrix) throw ConfigError("field 'matrix' is required");
  if (cfg.trials < 1) throw ConfigError("field 'trials': must be >= 1");
  if (cfg.sparsity < 1 || cfg.sparsity > cfg.matrix.m) throw ConfigError("field 'sparsity': must lie in [1, m]");
  if (!(cfg.noise >= 0.0)) throw ConfigError("field 'noise': must be >= 0");
  if (cfg.time && !(*cfg.time > 0.0)) throw ConfigError("field 'time': must be > 0 or \"auto\"");
  if (!(cfg.auto_time_fraction > 0.0 && cfg.auto_time_fraction < 1.0)) {
    throw ConfigError("field 'auto_time_fraction': must lie in (0, 1)");
  }
  if (!(cfg.fallback_time > 0.0)) throw ConfigError("field 'fallback_time': must be > 0");
  if (cfg.weights) {
    if (cfg.weights->size() != cfg.matrix.m) throw ConfigError("field 'weights': length must equal matrix.m");
    for (Eigen::Index i = 0; i < cfg.weights->size(); ++i) {
      if (!((*cfg.weights)(i) > 0.0)) throw ConfigError("field 'weights[" + std::to_string(i) + "]': must be > 0");
    }
  }
  if (cfg.system.matrix && (cfg.system.matrix->rows() != cfg.matrix.m || cfg.system.matrix->cols() != cfg.matrix.m)) {
    throw ConfigError("field 'system.matrix': must be m x m with m = matrix.m");
  }
  if (cfg.system.bias && cfg.system.bias->size() != cfg.matrix.m) throw ConfigError("field 'system.bias': length must equal matrix.m");
  if (!(cfg.bound_tolerance >= 0.0)) throw ConfigError("field 'bound_tolerance': must be >= 0");
  return cfg;
}

Json experiment_config_to_json(const ExperimentConfig& cfg) {
  Json system{{"rhs", std::string(to_string(cfg.system.kind))}};
  if (cfg.system.matrix) system["matrix"] = matrix_to_json(*cfg.system.matrix);
  if (cfg.system.identity_scale) system["identity_scale"] = *cfg.system.identity_scale;
  if (cfg.system.random_norm) system["random_norm"] = *cfg.system.random_norm;
  if (cfg.system.bias) system["bias"] = vector_to_json(*cfg.system.bias);
  return Json{{"seed", cfg.seed},
              {"trials", cfg.trials},
              {"system", system},
              {"matrix",
               {{"n", cfg.matrix.n},
                {"m", cfg.matrix.m},
                {"ensemble", cfg.matrix.ensemble},
                {"scale", cfg.matrix.scale},
                {"normalize_columns", cfg.matrix.normalize_columns}}},
              {"sparsity", cfg.sparsity},
              {"signal",
               {{"support", "uniform"}, {"magnitudes", cfg.signal.magnitudes == Magnitudes::unit ? "unit" : "uniform"}}},
              {"noise", cfg.noise},
              {"time", cfg.time ? Json(*cfg.time) : Json("auto")},
              {"auto_time_fraction", cfg.auto_time_fraction},
              {"fallback_time", cfg.fallback_time},
              {"weights", cfg.weights ? vector_to_json(*cfg.weights) : Json("uniform")},
              {"solver", solver_config_to_json(cfg.solver)},
              {"integration", integration_config_to_json(cfg.integration)},
              {"rip_budget", cfg.rip_budget},
              {"bound_tolerance", cfg.bound_tolerance},
              {"oracle_check", cfg.oracle_check},
              {"record_wall_time", cfg.record_wall_time}};
}

Matrix gen_gaussian_matrix(int n, int m, std::uint64_t seed, double scale) {
  if (n < 1 || m < 1) throw DomainError("gen_gaussian_matrix: n and m must be >= 1");
  if (!(scale > 0.0)) throw DomainError("gen_gaussian_matrix: scale must be > 0");
  RandomStream rng(seed, 0);
  const double sd = scale / std::sqrt(static_cast<double>(n));
  Matrix a(n, m);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) a(i, j) = sd * rng.normal();
  }
  return a;
}

Matrix normalize_columns(Matrix a) {
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    const double norm = a.col(j).norm();
    if (norm > 0.0) a.col(j) /= norm;
  }
  return a;
}

TrialRecord run_trial(const ExperimentConfig& config, int index, bool force) {
  const auto start = std::chrono::steady_clock::now();
  TrialRecord rec;
  rec.trial = index;
  rec.seed = derive_seed(config.seed, static_cast<std::uint64_t>(index));
  rec.s = config.sparsity;
  rec.n = config.matrix.n;
  rec.m = config.matrix.m;
  rec.eps = config.noise;
  const int n = rec.n;
  const int m = rec.m;

  Matrix a = gen_gaussian_matrix(n, m, derive_seed(rec.seed, kMatrixStream), config.matrix.scale);
  if (config.matrix.normalize_columns) a = normalize_columns(std::move(a));
  const DynamicalSystem system = build_system(config.system, m, derive_seed(rec.seed, kSystemStream));
  const Vector weights = config.weights.value_or(Vector::Ones(m));
  const double tau = weight_condition_number(weights);

  RandomStream signal_rng(rec.seed, kSignalStream);
  Vector x0 = Vector::Zero(m);
  rec.support = signal_rng.subset(m, config.sparsity);
  for (const int i : rec.support) {
    const double sign = signal_rng.uniform() < 0.5 ? -1.0 : 1.0;
    const double mag = config.signal.magnitudes == Magnitudes::unit ? 1.0 : 0.5 + signal_rng.uniform();
    x0(i) = sign * mag;
    rec.values.push_back(x0(i));
  }

  // Certificate ingredients.
  const RipReport delta = certificate_delta(a, config.sparsity, config.rip_budget);
  const double op_norm = operator_norm(a);
  rec.delta_2s = delta.delta;
  rec.op_norm = op_norm;
  rec.tau = tau;
  if (config.time) {
    rec.time = *config.time;
  } else {
    const double finite_delta = std::isfinite(delta.delta) ? delta.delta : 1.0;
    const double t = horizon_min(observability_horizon(system.lipschitz(), finite_delta, op_norm),
                                 recovery_horizon(system.lipschitz(), finite_delta, tau, op_norm));
    rec.time = std::isfinite(t) ? config.auto_time_fraction * t : config.fallback_time;
  }

  Certificate cert;
  if (std::isfinite(delta.delta)) {
    cert = recovery_constants(delta.delta, tau, system.lipschitz(), rec.time, op_norm);
  } else {
    cert.reasons.emplace_back(reason::delta_condition);
  }
  cert.delta_method = delta.method;
  rec.feasible = cert.feasible;
  rec.reasons = cert.reasons;
  rec.C0 = cert.C0.value_or(std::numeric_limits<double>::quiet_NaN());
  rec.C1 = cert.C1.value_or(std::numeric_limits<double>::quiet_NaN());
  rec.horizon_T_max = horizon_to_json(cert.horizon_T_max);
  rec.thm2_T_max = horizon_to_json(cert.thm2_T_max);

  // Observation with noise on the sphere of radius eps.
  Vector noise = Vector::Zero(n);
  if (config.noise > 0.0) {
    RandomStream noise_rng(rec.seed, kNoiseStream);
    for (int i = 0; i < n; ++i) noise(i) = noise_rng.normal();
    noise *= config.noise / noise.norm();
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  rec.error_l2 = nan;
  rec.bound = nan;
  rec.residual = nan;

  try {
    const Vector b = a * flow(system, x0, rec.time, config.integration) + noise;
    const SparseProblem problem(system, MeasurementModel(a, rec.time, config.noise, weights), b, config.sparsity);
    if (rec.feasible) rec.bound = recovery_error_bound(cert, x0, config.sparsity, config.noise);
    if (rec.feasible || force) {
      const RecoveryOutcome outcome = recover_initial_state(problem, config.integration, config.solver);
      rec.solved = true;
      rec.converged = outcome.converged;
      rec.message = outcome.message;
      rec.error_l2 = (outcome.estimate - x0).norm();
      rec.residual = outcome.residual;
      rec.iterations = outcome.iterations;
      rec.bound_satisfied = rec.feasible && rec.error_l2 <= rec.bound + config.bound_tolerance;
      if (config.oracle_check) {
        const RecoveryOutcome oracle = l0_oracle(problem, config.integration, kDefaultOracleBudget,
                                                 config.solver.residual_match_tol);
        rec.oracle_support_match = oracle.converged && support_of(oracle.estimate, kSupportThreshold) ==
                                                           support_of(outcome.estimate, kSupportThreshold);
        rec.oracle_max_diff = (oracle.estimate - outcome.estimate).lpNorm<Eigen::Infinity>();
      }
    } else {
      rec.message = "skipped: certificate infeasible";
    }
  } catch (const InfeasibleError& e) {
    rec.message = e.what();
  } catch (const NumericalError& e) {
    rec.message = e.what();
  }

  if (config.record_wall_time) {
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  }
  return rec;
}

std::vector<TrialRecord> run_experiment(const ExperimentConfig& config, int workers, bool force) {
  std::vector<TrialRecord> records(static_cast<std::size_t>(config.trials));
  workers = std::max(1, std::min(workers, config.trials));
  if (workers == 1) {
    for (int i = 0; i < config.trials; ++i) records[static_cast<std::size_t>(i)] = run_trial(config, i, force);
    return records;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = next++; i < config.trials; i = next++) {
          records[static_cast<std::size_t>(i)] = run_trial(config, i, force);
        }
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return records;
}

void write_report_csv(std::ostream& out, const std::vector<TrialRecord>& records) {
  out << "trial,feasible,s,n,m,T,eps,error_l2,bound,bound_satisfied,residual,iterations,wall_ms\n";
  for (const auto& r : records) {
    out << r.trial << ',' << (r.feasible ? "true" : "false") << ',' << r.s << ',' << r.n << ',' << r.m << ','
        << format_double(r.time) << ',' << format_double(r.eps) << ',' << format_double(r.error_l2) << ','
        << format_double(r.bound) << ',' << (r.bound_satisfied ? "true" : "false") << ','
        << format_double(r.residual) << ',' << r.iterations << ',' << format_double(r.wall_ms) << '\n';
  }
}

Json trial_record_to_json(const TrialRecord& r) {
  Json j{{"trial", r.trial},
         {"seed", r.seed},
         {"s", r.s},
         {"n", r.n},
         {"m", r.m},
         {"T", number_to_json(r.time)},
         {"eps", number_to_json(r.eps)},
         {"planted", {{"support", r.support}, {"values", r.values}}},
         {"certificate",
          {{"feasible", r.feasible},
           {"reasons", r.reasons},
           {"delta_2s", number_to_json(r.delta_2s)},
           {"op_norm", number_to_json(r.op_norm)},
           {"tau", number_to_json(r.tau)},
           {"C0", number_to_json(r.C0)},
           {"C1", number_to_json(r.C1)},
           {"horizon_T_max", r.horizon_T_max},
           {"thm2_T_max", r.thm2_T_max}}},
         {"feasible", r.feasible},
         {"solved", r.solved},
         {"converged", r.converged},
         {"error_l2", number_to_json(r.error_l2)},
         {"bound", number_to_json(r.bound)},
         {"bound_satisfied", r.bound_satisfied},
         {"residual", number_to_json(r.residual)},
         {"iterations", r.iterations},
         {"wall_ms", number_to_json(r.wall_ms)}};
  if (!r.message.empty()) j["message"] = r.message;
  if (r.oracle_support_match) j["oracle_support_match"] = *r.oracle_support_match;
  if (r.oracle_max_diff) j["oracle_max_diff"] = number_to_json(*r.oracle_max_diff);
  return j;
}

void write_report_json(std::ostream& out, const std::vector<TrialRecord>& records) {
  Json arr = Json::array();
  for (const auto& r : records) arr.push_back(trial_record_to_json(r));
  out << arr.dump(2) << '\n';
}

ReportSummary summarize(const std::vector<TrialRecord>& records, double bound_tolerance) {
  ReportSummary s;
  s.trials = static_cast<int>(records.size());
  double total = 0.0;
  for (const auto& r : records) {
    if (r.feasible) ++s.feasible;
    if (r.solved) {
      ++s.solved;
      total += r.error_l2;
    }
    if (r.feasible) {
      if (!r.bound_satisfied) s.all_feasible_satisfied = false;
      if (r.solved) s.max_error_bound_ratio = std::max(s.max_error_bound_ratio, r.error_l2 / (r.bound + bound_tolerance));
    }
  }
  s.mean_error = s.solved > 0 ? total / s.solved : std::numeric_limits<double>::quiet_NaN();
  return s;
}

void emit_report(const std::vector<TrialRecord>& records, ReportFormat format, const std::filesystem::path& path,
                 std::ostream& summary_out, double bound_tolerance) {
  if (records.empty()) throw DomainError("emit_report: no records");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("emit_report: cannot open '" + path.string() + "' for writing");
  if (format == ReportFormat::csv) write_report_csv(out, records);
  else write_report_json(out, records);
  out.flush();
  if (!out) throw std::runtime_error("emit_report: failed writing '" + path.string() + "'");
  const ReportSummary s = summarize(records, bound_tolerance);
  summary_out << "# trials=" << s.trials << " feasible=" << s.feasible << " solved=" << s.solved
              << " mean_error=" << format_double(s.mean_error)
              << " max_error_bound_ratio=" << format_double(s.max_error_bound_ratio)
              << " all_bounds_satisfied=" << (s.all_feasible_satisfied ? "true" : "false") << '\n';
}

}  // namespace sparseobs
