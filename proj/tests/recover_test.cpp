#include <cmath>

#include <Eigen/LU>
#include <gtest/gtest.h>

#include "sparseobs/certify.hpp"
#include "sparseobs/errors.hpp"
#include "sparseobs/random.hpp"
#include "sparseobs/recover.hpp"

namespace sparseobs {
namespace {

Matrix gaussian(int r, int c, std::uint64_t seed, bool unit_columns = false) {
  RandomStream rng(seed, 0);
  Matrix m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.normal() / std::sqrt(r);
  if (unit_columns)
    for (int j = 0; j < c; ++j) m.col(j).normalize();
  return m;
}

Vector planted(int m, int s, RandomStream& rng) {
  Vector x = Vector::Zero(m);
  for (int i : rng.subset(m, s)) x(i) = (rng.uniform() < 0.5 ? -1.0 : 1.0) * (0.5 + rng.uniform());
  return x;
}

// Equality-constrained weighted basis pursuit attains its minimum at a basic solution:
// enumerate every n-column support with an invertible submatrix and keep the cheapest.
Vector basis_pursuit_by_vertices(const Matrix& phi, const Vector& y, const Vector& w) {
  const int n = static_cast<int>(phi.rows()), m = static_cast<int>(phi.cols());
  Vector best;
  double best_obj = std::numeric_limits<double>::infinity();
  for_each_support(m, n, [&](std::span<const int> support) {
    Matrix sub(n, n);
    for (int k = 0; k < n; ++k) sub.col(k) = phi.col(support[static_cast<std::size_t>(k)]);
    const Eigen::FullPivLU<Matrix> lu(sub);
    if (!lu.isInvertible()) return true;
    const Vector z = lu.solve(y);
    Vector x = Vector::Zero(m);
    for (int k = 0; k < n; ++k) x(support[static_cast<std::size_t>(k)]) = z(k);
    const double obj = weighted_l1_norm(x, w);
    if (obj < best_obj) {
      best_obj = obj;
      best = x;
    }
    return true;
  });
  return best;
}

// Optimality of min ||x||_{1,w} s.t. ||y - Phi x|| <= eps with an active constraint:
// Phi^T r = mu * g for some mu > 0 and g in the weighted subdifferential at x.
void expect_kkt(const Matrix& phi, const Vector& y, const Vector& w, double eps, const Vector& x, double tol) {
  const Vector r = y - phi * x;
  EXPECT_NEAR(r.norm(), eps, 1e-6);
  const Vector c = phi.transpose() * r;
  const double mu = (c.array().abs() / w.array()).maxCoeff();
  ASSERT_GT(mu, 0.0);
  for (int i = 0; i < x.size(); ++i) {
    if (std::abs(x(i)) > 1e-9) {
      EXPECT_NEAR(c(i) / (mu * w(i)), x(i) > 0 ? 1.0 : -1.0, tol) << "i=" << i;
    } else {
      EXPECT_LE(std::abs(c(i)) / (mu * w(i)), 1.0 + tol) << "i=" << i;
    }
  }
}

SparseProblem make_problem(const DynamicalSystem& sys, const Matrix& a, double t, double eps, const Vector& x0,
                           int s, std::uint64_t noise_seed = 0, Vector weights = {}) {
  Vector b = a * flow(sys, x0, t);
  if (eps > 0) {
    RandomStream rng(noise_seed, 9);
    Vector e(b.size());
    for (int i = 0; i < e.size(); ++i) e(i) = rng.normal();
    b += eps * e.normalized();
  }
  if (weights.size() == 0) weights = Vector::Ones(a.cols());
  return {sys, MeasurementModel(a, t, eps, weights), b, s};
}

TEST(SoftThreshold, TiesMapToZero) {
  Vector v(4), t(4);
  v << 1.5, -0.5, 0.2, -3;
  t << 0.5, 0.5, 0.3, 1;
  Vector expect(4);
  expect << 1.0, 0.0, 0.0, -2.0;
  EXPECT_EQ(soft_threshold(v, t), expect);
}

TEST(SolverConfig, Validation) {
  SolverConfig c;
  EXPECT_NO_THROW(c.validate());
  c.penalty = 0;
  EXPECT_THROW(c.validate(), DomainError);
  c = {};
  c.outer_max_iter = 0;
  EXPECT_THROW(c.validate(), DomainError);
  c = {};
  c.residual_match_tol = -1;
  EXPECT_THROW(c.validate(), DomainError);
}

TEST(Bpdn, IdentityExamples) {
  const Matrix id = Matrix::Identity(2, 2);
  Vector b(2);
  b << 1, 0;
  const BpdnSolution exact = solve_weighted_bpdn(id, Vector::Zero(2), b, Vector::Ones(2), 0.0);
  EXPECT_LE((exact.x - b).norm(), 1e-9);
  const BpdnSolution zero = solve_weighted_bpdn(id, Vector::Zero(2), b, Vector::Ones(2), 1.0);
  EXPECT_TRUE(zero.x.isZero(0.0));
}

TEST(Bpdn, InfeasibleCarriesLeastSquaresResidual) {
  Matrix phi(3, 1);
  phi << 1, 0, 0;
  Vector b(3);
  b << 1, 2, 0;
  try {
    (void)solve_weighted_bpdn(phi, Vector::Zero(3), b, Vector::Ones(1), 0.5);
    FAIL() << "expected InfeasibleError";
  } catch (const InfeasibleError& e) {
    EXPECT_NEAR(e.min_residual(), 2.0, 1e-12);
  }
  EXPECT_THROW((void)solve_weighted_bpdn(phi, Vector::Zero(3), b, Vector::Ones(1), -1.0), DomainError);
  EXPECT_THROW((void)solve_weighted_bpdn(phi, Vector::Zero(2), b, Vector::Ones(1), 1.0), ShapeError);
}

TEST(Bpdn, OffsetIsSubtracted) {
  Vector off(2), b(2);
  off << 0.5, 0.5;
  b << 1.5, 0.5;
  const BpdnSolution s = solve_weighted_bpdn(Matrix::Identity(2, 2), off, b, Vector::Ones(2), 0.0);
  EXPECT_LE((s.x - Vector::Unit(2, 0)).norm(), 1e-9);
}

TEST(Bpdn, EqualityModeMatchesVertexEnumeration) {
  RandomStream rng(4, 0);
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    const Matrix phi = gaussian(3, 7, seed);
    Vector y(3);
    for (int i = 0; i < 3; ++i) y(i) = rng.normal();
    Vector w(7);
    for (int i = 0; i < 7; ++i) w(i) = seed % 2 ? 1.0 : 0.5 + rng.uniform();
    const Vector oracle = basis_pursuit_by_vertices(phi, y, w);
    const BpdnSolution sol = solve_weighted_bpdn(phi, Vector::Zero(3), y, w, 0.0);
    EXPECT_NEAR(sol.objective, weighted_l1_norm(oracle, w), 1e-7 * (1 + sol.objective)) << "seed " << seed;
    EXPECT_LE(sol.residual, 1e-6);
  }
}

TEST(Bpdn, NoisyModeSatisfiesKkt) {
  RandomStream rng(5, 0);
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    const Matrix phi = gaussian(6, 12, seed);
    const Vector x0 = planted(12, 2, rng);
    Vector y = phi * x0;
    Vector w(12);
    for (int i = 0; i < 12; ++i) w(i) = seed % 2 ? 1.0 : 0.5 + rng.uniform();
    const double eps = 0.05 * y.norm();
    const BpdnSolution sol = solve_weighted_bpdn(phi, Vector::Zero(6), y, w, eps);
    EXPECT_LE(sol.residual, eps + 1e-6);
    expect_kkt(phi, y, w, eps, sol.x, 1e-5);
    EXPECT_LE(sol.objective, weighted_l1_norm(x0, w) + 1e-9);
  }
}

TEST(Bpdn, WeightScalingLeavesEstimateUnchanged) {
  RandomStream rng(6, 0);
  const SolverConfig cfg;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Matrix phi = gaussian(5, 10, seed);
    const Vector y = phi * planted(10, 2, rng);
    Vector w(10);
    for (int i = 0; i < 10; ++i) w(i) = 0.5 + rng.uniform();
    for (double eps : {0.0, 0.02}) {
      const Vector x1 = solve_weighted_bpdn(phi, Vector::Zero(5), y, w, eps, cfg).x;
      const Vector x2 = solve_weighted_bpdn(phi, Vector::Zero(5), y, 7.5 * w, eps, cfg).x;
      EXPECT_LE((x1 - x2).lpNorm<Eigen::Infinity>(), cfg.inner_tol * 10) << "seed " << seed << " eps " << eps;
    }
  }
}

TEST(Bpdn, RecoversPlantedOnFeasibleGaussian) {
  std::uint64_t seed = 1;
  Matrix phi;
  for (;; ++seed) {
    phi = gaussian(64, 12, seed, true);
    if (certify_instance(DynamicalSystem::zero(12), phi, 1, 1.0, 1.0).feasible) break;
  }
  RandomStream rng(seed, 7);
  for (int k = 0; k < 20; ++k) {
    const Vector x0 = planted(12, 1, rng);
    const BpdnSolution sol = solve_weighted_bpdn(phi, Vector::Zero(64), phi * x0, Vector::Ones(12), 0.0);
    EXPECT_LE((sol.x - x0).norm(), 1e-6);
  }
}

TEST(L0Oracle, Examples) {
  const Matrix id = Matrix::Identity(4, 4);
  const SparseProblem p(DynamicalSystem::zero(4), MeasurementModel(id, 1.0, 0.0), Vector::Unit(4, 1), 1);
  const RecoveryOutcome out = l0_oracle(p);
  EXPECT_TRUE(out.converged);
  EXPECT_LE((out.estimate - Vector::Unit(4, 1)).norm(), 1e-12);
  EXPECT_LE(out.residual, 1e-12);

  const SparseProblem zero_b(DynamicalSystem::tanh_saturated(Matrix::Identity(4, 4)), MeasurementModel(id, 1.0, 0.0),
                             Vector::Zero(4), 2);
  const RecoveryOutcome z = l0_oracle(zero_b);
  EXPECT_TRUE(z.converged);
  EXPECT_TRUE(z.estimate.isZero(0.0));
}

TEST(L0Oracle, RecoversPlantedSupportThroughDecay) {
  const auto sys = DynamicalSystem::linear(-Matrix::Identity(6, 6));
  RandomStream rng(3, 3);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Matrix a = gaussian(3, 6, seed);
    const Vector x0 = planted(6, 1, rng);
    const RecoveryOutcome out = l0_oracle(make_problem(sys, a, 0.5, 0.0, x0, 1));
    EXPECT_TRUE(out.converged);
    EXPECT_EQ(support_of(out.estimate), support_of(x0));
    EXPECT_LE((out.estimate - x0).norm(), 1e-8);
  }
}

TEST(L0Oracle, BudgetRefusedAndInfeasibleReported) {
  const Matrix a = gaussian(3, 30, 1);
  const SparseProblem p(DynamicalSystem::zero(30), MeasurementModel(a, 1.0, 0.0), Vector::Ones(3), 3);
  EXPECT_THROW((void)l0_oracle(p, {}, 100), BudgetError);

  Matrix tall(3, 2);
  tall << 1, 0, 0, 1, 0, 0;
  const SparseProblem q(DynamicalSystem::zero(2), MeasurementModel(tall, 1.0, 0.0), Vector::Ones(3), 2);
  const RecoveryOutcome out = l0_oracle(q);
  EXPECT_FALSE(out.converged);
  EXPECT_NEAR(out.residual, 1.0, 1e-9);
}

TEST(Recover, ZeroSystemMatchesBpdn) {
  RandomStream rng(8, 0);
  const Matrix a = gaussian(6, 12, 8);
  const Vector x0 = planted(12, 2, rng);
  for (double eps : {0.0, 0.01}) {
    const SparseProblem p = make_problem(DynamicalSystem::zero(12), a, 1.0, eps, x0, 2, 8);
    const RecoveryOutcome out = recover_initial_state(p);
    const BpdnSolution ref = solve_weighted_bpdn(a, Vector::Zero(6), p.observation, Vector::Ones(12), eps);
    EXPECT_TRUE(out.converged);
    EXPECT_LE((out.estimate - ref.x).norm(), 1e-9);
    EXPECT_EQ(out.iterations, 1);
  }
}

TEST(Recover, DecayOneIteration) {
  const auto sys = DynamicalSystem::linear(-Matrix::Identity(2, 2));
  const SparseProblem p(sys, MeasurementModel(Matrix::Identity(2, 2), 1.0, 0.0),
                        std::exp(-1.0) * Vector::Unit(2, 0), 1);
  const RecoveryOutcome out = recover_initial_state(p);
  EXPECT_TRUE(out.converged);
  EXPECT_EQ(out.iterations, 1);
  EXPECT_LE((out.estimate - Vector::Unit(2, 0)).norm(), 1e-8);
}

TEST(Recover, TanhWithinCertifiedBound) {
  const int m = 12, n = 64;
  RandomStream mat_rng(17, 1);
  Matrix mm(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) mm(i, j) = mat_rng.normal() / std::sqrt(m);
  const auto sys = DynamicalSystem::tanh_saturated(mm);
  int tested = 0;
  RandomStream rng(17, 2);
  for (std::uint64_t seed = 1; tested < 10 && seed < 200; ++seed) {
    const Matrix a = gaussian(n, m, seed, true);
    const RipReport d = certificate_delta(a, 1);
    const double norm = operator_norm(a);
    const Horizon h = recovery_horizon(sys.lipschitz(), d.delta, 1.0, norm);
    if (h.kind() != Horizon::Kind::finite) continue;
    const double t = 0.9 * std::min(h.value(), observability_horizon(sys.lipschitz(), d.delta, norm).value());
    const Certificate cert = certify_instance(sys, a, 1, 1.0, t);
    ASSERT_TRUE(cert.feasible);
    const Vector x0 = planted(m, 1, rng);
    const double eps = 1e-3;
    const RecoveryOutcome out = recover_initial_state(make_problem(sys, a, t, eps, x0, 1, seed));
    EXPECT_TRUE(out.converged) << out.message;
    EXPECT_LE(out.residual, eps + 1e-6);
    EXPECT_LE((out.estimate - x0).norm(), recovery_error_bound(cert, x0, 1, eps) + 1e-6);
    EXPECT_LE((out.estimate - x0).norm(), *cert.C1 * eps + 1e-6);
    ++tested;
  }
  EXPECT_EQ(tested, 10);
}

TEST(Recover, OutputFeasibleAndObjectiveDominated) {
  RandomStream rng(9, 0);
  Matrix mm = gaussian(8, 8, 99) * 0.5;
  const std::vector<DynamicalSystem> systems{DynamicalSystem::zero(8), DynamicalSystem::linear(mm),
                                             DynamicalSystem::tanh_saturated(mm)};
  for (const auto& sys : systems) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const Matrix a = gaussian(5, 8, seed + 40);
      const Vector x0 = planted(8, 2, rng);
      Vector w(8);
      for (int i = 0; i < 8; ++i) w(i) = 0.5 + rng.uniform();
      const double eps = 0.01;
      const SparseProblem p = make_problem(sys, a, 0.3, eps, x0, 2, seed, w);
      const RecoveryOutcome out = recover_initial_state(p);
      ASSERT_TRUE(out.converged) << out.message;
      EXPECT_LE(observation_residual(p, out.estimate), eps + SolverConfig{}.residual_match_tol);
      EXPECT_NEAR(out.residual, observation_residual(p, out.estimate), 1e-12);
      EXPECT_DOUBLE_EQ(out.weighted_l1, weighted_l1_norm(out.estimate, w));
      EXPECT_LE(out.weighted_l1, weighted_l1_norm(x0, w) + SolverConfig{}.inner_tol);
    }
  }
}

TEST(Recover, WeightScalingInvariantThroughNonlinearFlow) {
  RandomStream rng(10, 0);
  const auto sys = DynamicalSystem::tanh_saturated(gaussian(8, 8, 5) * 0.5);
  const Matrix a = gaussian(5, 8, 6);
  const Vector x0 = planted(8, 1, rng);
  Vector w(8);
  for (int i = 0; i < 8; ++i) w(i) = 0.5 + rng.uniform();
  const RecoveryOutcome o1 = recover_initial_state(make_problem(sys, a, 0.3, 0.0, x0, 1, 0, w));
  const RecoveryOutcome o2 = recover_initial_state(make_problem(sys, a, 0.3, 0.0, x0, 1, 0, 3.0 * w));
  ASSERT_TRUE(o1.converged && o2.converged);
  EXPECT_LE((o1.estimate - o2.estimate).lpNorm<Eigen::Infinity>(), 1e-8);
}

TEST(Recover, AgreesWithL0OracleOnFeasibleInstances) {
  const int m = 8, n = 150, s = 2;
  const std::vector<DynamicalSystem> systems{DynamicalSystem::zero(m),
                                             DynamicalSystem::linear(-0.5 * Matrix::Identity(m, m)),
                                             DynamicalSystem::tanh_saturated(gaussian(m, m, 3))};
  RandomStream rng(11, 0);
  int compared = 0;
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const Matrix a = gaussian(n, m, seed, true);
    for (const auto& sys : systems) {
      const RipReport d = certificate_delta(a, s);
      const double norm = operator_norm(a);
      const Horizon h = recovery_horizon(sys.lipschitz(), d.delta, 1.0, norm);
      if (h.kind() == Horizon::Kind::not_certifiable) continue;
      const double t = h.kind() == Horizon::Kind::finite ? 0.9 * h.value() : 1.0;
      ASSERT_TRUE(certify_instance(sys, a, s, 1.0, t).feasible);
      const Vector x0 = planted(m, s, rng);
      const SparseProblem p = make_problem(sys, a, t, 0.0, x0, s);
      const RecoveryOutcome l1 = recover_initial_state(p);
      const RecoveryOutcome l0 = l0_oracle(p);
      ASSERT_TRUE(l1.converged && l0.converged);
      EXPECT_EQ(support_of(l1.estimate, 1e-6), support_of(l0.estimate, 1e-6));
      EXPECT_LE((l1.estimate - l0.estimate).lpNorm<Eigen::Infinity>(), 1e-6);
      ++compared;
    }
  }
  EXPECT_GE(compared, 6);
}

}  // namespace
}  // namespace sparseobs
