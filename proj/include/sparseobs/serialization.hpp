#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include <json.hpp>

#include "sparseobs/certify.hpp"
#include "sparseobs/model.hpp"
#include "sparseobs/ode.hpp"
#include "sparseobs/recover.hpp"
#include "sparseobs/rip.hpp"

namespace sparseobs {

using Json = nlohmann::json;

// Matrices are row-major nested arrays: [[a11, a12], [a21, a22]].
[[nodiscard]] Json matrix_to_json(const Matrix& m);
[[nodiscard]] Matrix matrix_from_json(const Json& j, const std::string& field = "matrix");
[[nodiscard]] Json vector_to_json(const Vector& v);
[[nodiscard]] Vector vector_from_json(const Json& j, const std::string& field = "vector");

/// {"rhs": "linear", "dim": m, "matrix": [[...]], "bias": [...], "lipschitz": L}
[[nodiscard]] Json system_to_json(const DynamicalSystem& system);
[[nodiscard]] DynamicalSystem system_from_json(const Json& j);

/// {"matrix": [[...]], "time": T, "noise_radius": eps, "weights": [...]}
[[nodiscard]] Json measurement_to_json(const MeasurementModel& meas);
[[nodiscard]] MeasurementModel measurement_from_json(const Json& j);

/// {"system": {...}, "measurement": {...}, "observation": [...], "sparsity": s}
[[nodiscard]] Json problem_to_json(const SparseProblem& problem);
[[nodiscard]] SparseProblem problem_from_json(const Json& j);

[[nodiscard]] Json solver_config_to_json(const SolverConfig& cfg);
[[nodiscard]] SolverConfig solver_config_from_json(const Json& j);
/// {"steps": N} or {"tolerance": tol}
[[nodiscard]] Json integration_config_to_json(const IntegrationConfig& cfg);
[[nodiscard]] IntegrationConfig integration_config_from_json(const Json& j);

[[nodiscard]] Json outcome_to_json(const RecoveryOutcome& outcome);
[[nodiscard]] Json rip_report_to_json(const RipReport& report);
/// Horizons serialize as a number, the string "inf", or the string "not-certifiable".
[[nodiscard]] Json horizon_to_json(const Horizon& h);
[[nodiscard]] Json certificate_to_json(const Certificate& cert);
/// Finite doubles as numbers, +/-inf as "inf"/"-inf", NaN as null.
[[nodiscard]] Json number_to_json(double v);

/// Reads a JSON document, reporting syntax errors with line and column.
[[nodiscard]] Json read_json_file(const std::filesystem::path& path);
/// JSON (nested array or {"matrix": ...}) or, for a .csv extension, comma-separated rows.
[[nodiscard]] Matrix read_matrix_file(const std::filesystem::path& path);
[[nodiscard]] Matrix read_matrix_csv(std::istream& in);
void write_matrix_csv(std::ostream& out, const Matrix& m);
/// One column "x" with header, one entry per row.
void write_vector_csv(std::ostream& out, const Vector& v, const std::string& header = "x");

/// Shortest round-trip decimal representation, "nan", "inf" or "-inf".
[[nodiscard]] std::string format_double(double v);

}  // namespace sparseobs
