#include "sparseobs/serialization.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sparseobs/errors.hpp"

namespace sparseobs {

namespace {

const Json& require(const Json& j, const char* key, const std::string& context) {
  if (!j.is_object() || !j.contains(key)) {
    throw ConfigError("field '" + context + (context.empty() ? "" : ".") + key + "' is required");
  }
  return j.at(key);
}

double as_double(const Json& j, const std::string& field) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  throw ConfigError("field '" + field + "': expected a number");
}

long long as_integer(const Json& j, const std::string& field) {
  if (j.is_number_integer() || j.is_number_unsigned()) return j.get<long long>();
  if (j.is_number_float()) {
    const double d = j.get<double>();
    if (std::floor(d) == d) return static_cast<long long>(d);
  }
  throw ConfigError("field '" + field + "': expected an integer");
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

Json number_to_json(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const Json& j, const std::string& field) {
  if (!j.is_array() || j.empty()) throw ConfigError("field '" + field + "': expected a nonempty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (!j.front().is_array() || j.front().empty()) throw ConfigError("field '" + field + "': rows must be nonempty arrays");
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Json& row = j.at(static_cast<std::size_t>(r));
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ConfigError("field '" + field + "': row " + std::to_string(r) + " has inconsistent length");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = as_double(row.at(static_cast<std::size_t>(c)), field + "[" + std::to_string(r) + "][" + std::to_string(c) + "]");
    }
  }
  return m;
}

Json vector_to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Vector vector_from_json(const Json& j, const std::string& field) {
  if (!j.is_array()) throw ConfigError("field '" + field + "': expected an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = as_double(j[i], field + "[" + std::to_string(i) + "]");
  return v;
}

Json system_to_json(const DynamicalSystem& system) {
  Json j;
  j["rhs"] = std::string(to_string(system.kind()));
  j["dim"] = system.dim();
  if (system.kind() != RhsKind::zero) {
    j["matrix"] = matrix_to_json(system.matrix());
    if (system.kind() != RhsKind::linear) j["bias"] = vector_to_json(system.bias());
  }
  j["lipschitz"] = system.lipschitz();
  return j;
}

DynamicalSystem system_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("system: expected an object");
  const RhsKind kind = [&] {
    try {
      return rhs_kind_from_string(require(j, "rhs", "system").get<std::string>());
    } catch (const DomainError& e) {
      throw ConfigError(std::string("field 'system.rhs': ") + e.what());
    }
  }();
  Matrix m;
  Vector bias;
  int dim = 0;
  if (kind == RhsKind::zero) {
    dim = static_cast<int>(as_integer(require(j, "dim", "system"), "system.dim"));
  } else {
    m = matrix_from_json(require(j, "matrix", "system"), "system.matrix");
    dim = static_cast<int>(m.rows());
    if (j.contains("dim") && as_integer(j["dim"], "system.dim") != dim) {
      throw ConfigError("field 'system.dim' disagrees with the matrix size");
    }
    if (j.contains("bias")) bias = vector_from_json(j["bias"], "system.bias");
  }
  DynamicalSystem sys = DynamicalSystem::make(kind, dim, std::move(m), std::move(bias));
  if (j.contains("lipschitz")) {
    const double given = as_double(j["lipschitz"], "system.lipschitz");
    if (given < sys.lipschitz() * (1.0 - 1e-12)) {
      throw ConfigError("field 'system.lipschitz': " + format_double(given) +
                        " is below the analytic bound " + format_double(sys.lipschitz()));
    }
  }
  return sys;
}

Json measurement_to_json(const MeasurementModel& meas) {
  return Json{{"matrix", matrix_to_json(meas.matrix())},
              {"time", meas.time()},
              {"noise_radius", meas.noise_radius()},
              {"weights", vector_to_json(meas.weights())}};
}

MeasurementModel measurement_from_json(const Json& j) {
  Matrix a = matrix_from_json(require(j, "matrix", "measurement"), "measurement.matrix");
  const double time = as_double(require(j, "time", "measurement"), "measurement.time");
  const double eps = j.contains("noise_radius") ? as_double(j["noise_radius"], "measurement.noise_radius") : 0.0;
  Vector w = j.contains("weights") ? vector_from_json(j["weights"], "measurement.weights") : Vector::Ones(a.cols());
  return {std::move(a), time, eps, std::move(w)};
}

Json problem_to_json(const SparseProblem& problem) {
  return Json{{"system", system_to_json(problem.system)},
              {"measurement", measurement_to_json(problem.measurement)},
              {"observation", vector_to_json(problem.observation)},
              {"sparsity", problem.sparsity}};
}

SparseProblem problem_from_json(const Json& j) {
  return {system_from_json(require(j, "system", "")), measurement_from_json(require(j, "measurement", "")),
          vector_from_json(require(j, "observation", ""), "observation"),
          static_cast<int>(as_integer(require(j, "sparsity", ""), "sparsity"))};
}

Json solver_config_to_json(const SolverConfig& cfg) {
  return Json{{"outer_max_iter", cfg.outer_max_iter}, {"outer_tol", cfg.outer_tol},
              {"inner_max_iter", cfg.inner_max_iter}, {"inner_tol", cfg.inner_tol},
              {"penalty", cfg.penalty},               {"residual_match_tol", cfg.residual_match_tol}};
}

SolverConfig solver_config_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("solver: expected an object");
  SolverConfig cfg;
  for (const auto& [key, value] : j.items()) {
    const std::string field = "solver." + key;
    if (key == "outer_max_iter") cfg.outer_max_iter = static_cast<int>(as_integer(value, field));
    else if (key == "outer_tol") cfg.outer_tol = as_double(value, field);
    else if (key == "inner_max_iter") cfg.inner_max_iter = static_cast<int>(as_integer(value, field));
    else if (key == "inner_tol") cfg.inner_tol = as_double(value, field);
    else if (key == "penalty") cfg.penalty = as_double(value, field);
    else if (key == "residual_match_tol") cfg.residual_match_tol = as_double(value, field);
    else throw ConfigError("field '" + field + "' is not recognized");
  }
  try {
    cfg.validate();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("solver: ") + e.what());
  }
  return cfg;
}

Json integration_config_to_json(const IntegrationConfig& cfg) {
  if (cfg.mode() == IntegrationConfig::Mode::fixed_step) return Json{{"steps", cfg.step_count()}};
  return Json{{"tolerance", cfg.tolerance()}};
}

IntegrationConfig integration_config_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("integration: expected an object");
  const bool has_steps = j.contains("steps");
  const bool has_tol = j.contains("tolerance");
  if (has_steps && has_tol) throw ConfigError("integration: set exactly one of 'steps' and 'tolerance'");
  try {
    if (has_tol) return IntegrationConfig::adaptive(as_double(j["tolerance"], "integration.tolerance"));
    if (has_steps) return IntegrationConfig::fixed(static_cast<int>(as_integer(j["steps"], "integration.steps")));
  } catch (const DomainError& e) {
    throw ConfigError(std::string("integration: ") + e.what());
  }
  return IntegrationConfig::fixed();
}

Json outcome_to_json(const RecoveryOutcome& outcome) {
  Json j{{"estimate", vector_to_json(outcome.estimate)},
         {"residual", number_to_json(outcome.residual)},
         {"weighted_l1", number_to_json(outcome.weighted_l1)},
         {"iterations", outcome.iterations},
         {"converged", outcome.converged}};
  if (!outcome.message.empty()) j["message"] = outcome.message;
  return j;
}

Json rip_report_to_json(const RipReport& report) {
  Json j{{"sparsity", report.sparsity},
         {"delta", number_to_json(report.delta)},
         {"method", std::string(to_string(report.method))},
         {"supports_examined", report.supports_examined}};
  if (!report.extremal_support.empty()) j["extremal_support"] = report.extremal_support;
  return j;
}

Json horizon_to_json(const Horizon& h) {
  switch (h.kind()) {
    case Horizon::Kind::finite:
      return h.value();
    case Horizon::Kind::unbounded:
      return "inf";
    case Horizon::Kind::not_certifiable:
      return "not-certifiable";
  }
  return nullptr;
}

Json certificate_to_json(const Certificate& cert) {
  auto opt = [](const std::optional<double>& v) -> Json { return v ? number_to_json(*v) : Json(nullptr); };
  return Json{{"horizon_T_max", horizon_to_json(cert.horizon_T_max)},
              {"thm2_T_max", horizon_to_json(cert.thm2_T_max)},
              {"time", cert.time},
              {"lipschitz", cert.lipschitz},
              {"delta_2s", number_to_json(cert.delta_2s)},
              {"delta_method", std::string(to_string(cert.delta_method))},
              {"tau", cert.tau},
              {"op_norm", cert.op_norm},
              {"M", number_to_json(cert.M)},
              {"alpha", opt(cert.alpha)},
              {"rho", opt(cert.rho)},
              {"denominator", opt(cert.denominator)},
              {"C0", opt(cert.C0)},
              {"C1", opt(cert.C1)},
              {"feasible", cert.feasible},
              {"reasons", cert.reasons}};
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    // Translate the byte offset into line/column for the diagnostic.
    const std::size_t offset = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < offset; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(path.string() + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + e.what());
  }
}

Matrix read_matrix_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw ConfigError("matrix CSV line " + std::to_string(line_no) + ": cannot parse '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ConfigError("matrix CSV line " + std::to_string(line_no) + ": inconsistent column count");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty() || rows.front().empty()) throw ConfigError("matrix CSV is empty");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  return m;
}

Matrix read_matrix_file(const std::filesystem::path& path) {
  if (path.extension() == ".csv") {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path.string() + "'");
    return read_matrix_csv(in);
  }
  const Json j = read_json_file(path);
  if (j.is_object()) return matrix_from_json(require(j, "matrix", ""), "matrix");
  return matrix_from_json(j, "matrix");
}

void write_matrix_csv(std::ostream& out, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

void write_vector_csv(std::ostream& out, const Vector& v, const std::string& header) {
  out << header << '\n';
  for (Eigen::Index i = 0; i < v.size(); ++i) out << format_double(v(i)) << '\n';
}

}  // namespace sparseobs
