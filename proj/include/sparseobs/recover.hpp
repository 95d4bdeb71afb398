#pragma once

#include <cstdint>

#include "sparseobs/model.hpp"
#include "sparseobs/ode.hpp"

namespace sparseobs {

struct SolverConfig {
  int outer_max_iter = 30;
  double outer_tol = 1e-8;      // stop when the accepted outer step norm falls below this
  int inner_max_iter = 5000;    // ADMM iterations per inner solve
  double inner_tol = 1e-9;
  double penalty = 1.0;         // ADMM coupling parameter
  double residual_match_tol = 1e-6;

  /// Throws DomainError on nonpositive tolerances or caps below 1.
  void validate() const;
};

struct BpdnSolution {
  Vector x;
  double residual = 0.0;    // ||(b - offset) - Phi x||_2
  double objective = 0.0;   // sum_i w_i |x_i|
  double lambda = 0.0;      // matched LASSO penalty for weights w / max(w); 0 in equality mode
  int iterations = 0;       // total ADMM iterations
  bool polished = false;    // solution certified on its active set
};

/// Componentwise sign(v) max(|v| - t, 0); entries with |v_i| <= t_i map to exactly 0.
[[nodiscard]] Vector soft_threshold(const Vector& v, const Vector& thresholds);

/// min sum_i w_i |x_i|  subject to  ||(b - offset) - Phi x||_2 <= eps.
///
/// eps at or below the least-squares residual is solved as equality-constrained basis pursuit
/// on the projected data; otherwise the penalized form
///   min lambda ||x||_{1,w} + 1/2 ||Phi x - y||^2
/// is solved by ADMM and lambda is bisected (geometrically, <= 40 steps) until the residual
/// equals eps. Each ADMM solve is polished on its active set, where the residual has the closed
/// form ||r0||^2 + lambda^2 ||v||^2, which lets the matching lambda be computed exactly.
///
/// Throws InfeasibleError carrying the least-squares residual when eps is below it.
[[nodiscard]] BpdnSolution solve_weighted_bpdn(const Matrix& phi, const Vector& offset, const Vector& b,
                                               const Vector& w, double eps, const SolverConfig& cfg = {});

inline constexpr std::uint64_t kDefaultOracleBudget = 100000;

/// Sparsest initial state consistent with the observation, by enumerating supports of size
/// 0..s (ascending, lexicographic) and fitting each with damped Gauss-Newton on the flow map.
/// A support is feasible when its residual is <= eps + feasibility_tol.
[[nodiscard]] RecoveryOutcome l0_oracle(const SparseProblem& problem, const IntegrationConfig& icfg = {},
                                        std::uint64_t budget = kDefaultOracleBudget,
                                        double feasibility_tol = 1e-6);

/// Weighted l1 recovery through the flow map by sequential linearization:
/// at iterate x_k, Phi_k = A dx(T)/dx0 and offset_k = A x_k(T) - Phi_k x_k feed
/// solve_weighted_bpdn; the step is halved until the integrated residual does not grow
/// (or stays within eps). Affine flows are solved exactly in one iteration.
[[nodiscard]] RecoveryOutcome recover_initial_state(const SparseProblem& problem,
                                                    const IntegrationConfig& icfg = {},
                                                    const SolverConfig& scfg = {});

/// ||b - A x(T)||_2 for the flow of `estimate`.
[[nodiscard]] double observation_residual(const SparseProblem& problem, const Vector& estimate,
                                          const IntegrationConfig& icfg = {});

}  // namespace sparseobs
