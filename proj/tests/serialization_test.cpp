#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "sparseobs/errors.hpp"
#include "sparseobs/random.hpp"
#include "sparseobs/serialization.hpp"

namespace sparseobs {
namespace {

namespace fs = std::filesystem;

fs::path temp_file(const std::string& name, const std::string& content) {
  const fs::path dir = fs::temp_directory_path() / "sparseobs_serialization_test";
  fs::create_directories(dir);
  const fs::path p = dir / name;
  std::ofstream(p) << content;
  return p;
}

TEST(MatrixJson, RowMajorRoundTrip) {
  Matrix m(2, 3);
  m << 1, 2, 3, 4, 5, 6.25;
  const Json j = matrix_to_json(m);
  EXPECT_EQ(j.dump(), "[[1.0,2.0,3.0],[4.0,5.0,6.25]]");
  EXPECT_EQ(matrix_from_json(j), m);
  EXPECT_THROW((void)matrix_from_json(Json::parse("[[1,2],[3]]")), ConfigError);
  EXPECT_THROW((void)matrix_from_json(Json::parse("[[1,\"x\"]]")), ConfigError);
}

TEST(SystemJson, RoundTripAllKinds) {
  Matrix mm(2, 2);
  mm << 0.5, -1, 2, 0.25;
  Vector c(2);
  c << 0.1, -0.2;
  for (const auto& sys : {DynamicalSystem::zero(2), DynamicalSystem::linear(mm), DynamicalSystem::affine(mm, c),
                          DynamicalSystem::tanh_saturated(mm, c)}) {
    const DynamicalSystem back = system_from_json(system_to_json(sys));
    EXPECT_EQ(back.kind(), sys.kind());
    EXPECT_EQ(back.dim(), sys.dim());
    EXPECT_DOUBLE_EQ(back.lipschitz(), sys.lipschitz());
    Vector x(2);
    x << 0.3, -0.4;
    EXPECT_EQ(back.rhs(0.0, x), sys.rhs(0.0, x));
  }
}

TEST(SystemJson, RejectsUnderstatedLipschitzAndUnknownKind) {
  const Json j = Json::parse(R"({"rhs":"linear","matrix":[[2,0],[0,1]],"lipschitz":1.0})");
  EXPECT_THROW((void)system_from_json(j), ConfigError);
  EXPECT_THROW((void)system_from_json(Json::parse(R"({"rhs":"cubic","dim":2})")), ConfigError);
  const DynamicalSystem tanh = system_from_json(Json::parse(R"({"rhs":"tanh-saturated","matrix":[[1,0],[0,1]]})"));
  EXPECT_EQ(tanh.kind(), RhsKind::tanh_saturated);
}

TEST(ProblemJson, RoundTrip) {
  Matrix a(2, 3);
  a << 1, 0, 1, 0, 1, 1;
  Vector w(3), b(2);
  w << 1, 2, 3;
  b << 0.5, -0.5;
  const SparseProblem p(DynamicalSystem::linear(-Matrix::Identity(3, 3)), MeasurementModel(a, 0.7, 0.01, w), b, 2);
  const SparseProblem q = problem_from_json(Json::parse(problem_to_json(p).dump()));
  EXPECT_EQ(q.measurement.matrix(), a);
  EXPECT_EQ(q.measurement.weights(), w);
  EXPECT_EQ(q.measurement.time(), 0.7);
  EXPECT_EQ(q.measurement.noise_radius(), 0.01);
  EXPECT_EQ(q.observation, b);
  EXPECT_EQ(q.sparsity, 2);
  EXPECT_EQ(q.system.kind(), RhsKind::linear);
}

TEST(SolverConfigJson, StrictKeysAndDefaults) {
  const SolverConfig c = solver_config_from_json(Json::parse(R"({"inner_tol":1e-10})"));
  EXPECT_EQ(c.inner_tol, 1e-10);
  EXPECT_EQ(c.outer_max_iter, 30);
  EXPECT_THROW((void)solver_config_from_json(Json::parse(R"({"inner_tolerance":1e-10})")), ConfigError);
  EXPECT_THROW((void)solver_config_from_json(Json::parse(R"({"penalty":-1})")), ConfigError);
  const SolverConfig d = solver_config_from_json(solver_config_to_json(c));
  EXPECT_EQ(d.inner_tol, c.inner_tol);
}

TEST(IntegrationConfigJson, OneModeOnly) {
  EXPECT_EQ(integration_config_from_json(Json::parse(R"({"steps":64})")).step_count(), 64);
  EXPECT_EQ(integration_config_from_json(Json::parse(R"({"tolerance":1e-9})")).mode(),
            IntegrationConfig::Mode::adaptive);
  EXPECT_THROW((void)integration_config_from_json(Json::parse(R"({"steps":64,"tolerance":1e-9})")), ConfigError);
}

TEST(Numbers, SentinelsAndShortestForm) {
  EXPECT_EQ(number_to_json(std::numeric_limits<double>::infinity()), Json("inf"));
  EXPECT_TRUE(number_to_json(std::nan("")).is_null());
  EXPECT_EQ(number_to_json(0.5), Json(0.5));
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(1.0), "1");
  EXPECT_EQ(format_double(std::nan("")), "nan");
  EXPECT_EQ(format_double(-std::numeric_limits<double>::infinity()), "-inf");
  RandomStream rng(1, 0);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.normal() * std::pow(10.0, rng.normal() * 10);
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
}

TEST(Horizons, Serialized) {
  EXPECT_EQ(horizon_to_json(Horizon::unbounded()), Json("inf"));
  EXPECT_EQ(horizon_to_json(Horizon::not_certifiable()), Json("not-certifiable"));
  EXPECT_EQ(horizon_to_json(Horizon::finite(0.25)), Json(0.25));
}

TEST(CertificateJson, InfeasibleOmitsConstants) {
  const Certificate c = recovery_constants(0.9, 1.0, 1.0, 0.1, 1.0);
  const Json j = certificate_to_json(c);
  EXPECT_FALSE(j.at("feasible").get<bool>());
  EXPECT_TRUE(j.at("C0").is_null());
  EXPECT_EQ(j.at("reasons").at(0), "delta-condition");
  const Json ok = certificate_to_json(recovery_constants(0.0, 1.0, 0.0, 1.0, 1.0));
  EXPECT_EQ(ok.at("C1").get<double>(), 4.0);
  EXPECT_EQ(ok.at("horizon_T_max"), Json("inf"));
}

TEST(Files, MatrixCsvAndJsonAgree) {
  Matrix m(2, 2);
  m << 0.1, -2, 3e-7, 4;
  std::ostringstream csv;
  write_matrix_csv(csv, m);
  const fs::path c = temp_file("m.csv", csv.str());
  const fs::path j = temp_file("m.json", matrix_to_json(m).dump());
  const fs::path o = temp_file("o.json", Json{{"matrix", matrix_to_json(m)}}.dump());
  EXPECT_EQ(read_matrix_file(c), m);
  EXPECT_EQ(read_matrix_file(j), m);
  EXPECT_EQ(read_matrix_file(o), m);
}

TEST(Files, CsvRejectsRaggedRows) {
  std::istringstream in("1,2\n3\n");
  EXPECT_THROW((void)read_matrix_csv(in), ConfigError);
}

TEST(Files, ParseErrorsReportLineAndColumn) {
  const fs::path p = temp_file("bad.json", "{\n  \"a\": 1,\n  \"b\": ]\n}\n");
  try {
    (void)read_json_file(p);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
  }
  EXPECT_THROW((void)read_json_file(p.parent_path() / "missing.json"), ConfigError);
}

TEST(Files, VectorCsv) {
  Vector v(2);
  v << 1.5, -0.25;
  std::ostringstream out;
  write_vector_csv(out, v);
  EXPECT_EQ(out.str(), "x\n1.5\n-0.25\n");
}

}  // namespace
}  // namespace sparseobs
