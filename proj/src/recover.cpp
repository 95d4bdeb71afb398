#include "sparseobs/recover.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>

#include "sparseobs/errors.hpp"
#include "sparseobs/rip.hpp"

namespace sparseobs {

void SolverConfig::validate() const {
  if (outer_max_iter < 1 || inner_max_iter < 1) throw DomainError("solver iteration caps must be >= 1");
  if (!(outer_tol > 0.0) || !(inner_tol > 0.0) || !(residual_match_tol > 0.0)) {
    throw DomainError("solver tolerances must be > 0");
  }
  if (!(penalty > 0.0)) throw DomainError("solver penalty must be > 0");
}

Vector soft_threshold(const Vector& v, const Vector& thresholds) {
  Vector out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double a = std::abs(v(i));
    out(i) = a <= thresholds(i) ? 0.0 : std::copysign(a - thresholds(i), v(i));
  }
  return out;
}

namespace {

constexpr double kKktSlack = 1e-9;
constexpr int kPolishEvery = 20;
constexpr int kMaxBisections = 40;

// Support and sign pattern of an (approximately) sparse point, with the factorized
// normal equations on that support.
struct ActiveSet {
  std::vector<int> idx;
  Vector sign;
  Matrix sub;
  Vector ls;   // G^{-1} sub^T y, the least-squares fit on the support
  Vector dir;  // G^{-1} sign
  bool usable = false;
};

ActiveSet make_active_set(const Matrix& psi, const Vector& y, const Vector& z) {
  ActiveSet as;
  const double scale = std::max(1.0, z.lpNorm<Eigen::Infinity>());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (std::abs(z(i)) > 1e-12 * scale) as.idx.push_back(static_cast<int>(i));
  }
  const auto k = static_cast<Eigen::Index>(as.idx.size());
  as.sign.resize(k);
  as.sub.resize(psi.rows(), k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const int i = as.idx[static_cast<std::size_t>(j)];
    as.sign(j) = z(i) > 0.0 ? 1.0 : -1.0;
    as.sub.col(j) = psi.col(i);
  }
  if (k == 0) {
    as.usable = true;
    return as;
  }
  if (k > psi.rows()) return as;
  Eigen::ColPivHouseholderQR<Matrix> qr(as.sub);
  if (qr.rank() < k) return as;
  const Matrix gram = as.sub.transpose() * as.sub;
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success) return as;
  as.ls = llt.solve(as.sub.transpose() * y);
  as.dir = llt.solve(as.sign);
  as.usable = true;
  return as;
}

Vector embed(const ActiveSet& as, const Vector& values, Eigen::Index m) {
  Vector u = Vector::Zero(m);
  for (std::size_t j = 0; j < as.idx.size(); ++j) u(as.idx[j]) = values(static_cast<Eigen::Index>(j));
  return u;
}

bool signs_consistent(const ActiveSet& as, const Vector& values) {
  for (Eigen::Index j = 0; j < values.size(); ++j) {
    if (!(values(j) * as.sign(j) > 0.0)) return false;
  }
  return true;
}

// Off-support correlations |psi_j^T r| <= bound for every j outside the active set.
bool off_support_bounded(const Matrix& psi, const ActiveSet& as, const Vector& r, double bound) {
  const Vector corr = psi.transpose() * r;
  std::size_t next = 0;
  for (Eigen::Index j = 0; j < corr.size(); ++j) {
    if (next < as.idx.size() && as.idx[next] == j) {
      ++next;
      continue;
    }
    if (std::abs(corr(j)) > bound) return false;
  }
  return true;
}

// Exact LASSO solution for a fixed active set at penalty lambda, if the KKT conditions hold.
std::optional<Vector> lasso_on_active_set(const Matrix& psi, const Vector& y, const ActiveSet& as, double lambda) {
  if (!as.usable) return std::nullopt;
  if (as.idx.empty()) {
    if ((psi.transpose() * y).lpNorm<Eigen::Infinity>() <= lambda * (1.0 + kKktSlack)) {
      return Vector::Zero(psi.cols());
    }
    return std::nullopt;
  }
  const Vector values = as.ls - lambda * as.dir;
  if (!signs_consistent(as, values)) return std::nullopt;
  const Vector r = y - as.sub * values;
  if (!off_support_bounded(psi, as, r, lambda * (1.0 + kKktSlack) + 1e-14)) return std::nullopt;
  return embed(as, values, psi.cols());
}

// Basis pursuit solution for a fixed active set, certified by the minimum-norm dual vector.
std::optional<Vector> bp_on_active_set(const Matrix& psi, const Vector& y_hat, const ActiveSet& as,
                                       bool require_dual) {
  if (!as.usable || as.idx.empty()) return std::nullopt;
  const Vector& values = as.ls;
  if ((as.sub * values - y_hat).norm() > 1e-9 * std::max(1.0, y_hat.norm())) return std::nullopt;
  if (!signs_consistent(as, values)) return std::nullopt;
  if (require_dual) {
    const Vector nu = as.sub * as.dir;
    if (!off_support_bounded(psi, as, nu, 1.0 + kKktSlack)) return std::nullopt;
  }
  return embed(as, values, psi.cols());
}

bool admm_converged(const Vector& x, const Vector& z, const Vector& z_old, double penalty, double tol) {
  const double scale = std::max(1.0, z.norm());
  return (x - z).norm() <= tol * scale && penalty * (z - z_old).norm() <= tol * scale;
}

struct EqualityResult {
  Vector u;
  int iterations = 0;
  bool polished = false;
};

// min ||u||_1 s.t. psi u = y_hat, with y_hat in range(psi).
EqualityResult basis_pursuit(const Matrix& psi, const Vector& y_hat,
                             const Eigen::CompleteOrthogonalDecomposition<Matrix>& cod, const SolverConfig& cfg) {
  EqualityResult out;
  const Eigen::Index m = psi.cols();
  if (cod.rank() == m) {
    // Injective: the constraint set is a single point.
    out.u = cod.solve(y_hat);
    out.polished = true;
    return out;
  }
  const Matrix pinv = cod.pseudoInverse();
  auto project = [&](const Vector& v) -> Vector { return v - pinv * (psi * v - y_hat); };
  const Vector thresholds = Vector::Constant(m, 1.0 / cfg.penalty);

  Vector z = pinv * y_hat;
  Vector dual = Vector::Zero(m);
  Vector x = z;
  for (int it = 1; it <= cfg.inner_max_iter; ++it) {
    x = project(z - dual);
    const Vector z_old = z;
    z = soft_threshold(x + dual, thresholds);
    dual += x - z;
    out.iterations = it;
    const bool done = admm_converged(x, z, z_old, cfg.penalty, cfg.inner_tol);
    if (done || it % kPolishEvery == 0) {
      if (auto u = bp_on_active_set(psi, y_hat, make_active_set(psi, y_hat, z), true)) {
        out.u = *u;
        out.polished = true;
        return out;
      }
    }
    if (done) break;
  }
  // Uncertified: accept the active-set fit only if it does not lose objective.
  const Vector fallback = project(z);
  if (auto u = bp_on_active_set(psi, y_hat, make_active_set(psi, y_hat, z), false)) {
    if (u->lpNorm<1>() <= fallback.lpNorm<1>() + cfg.inner_tol) {
      out.u = *u;
      out.polished = true;
      return out;
    }
  }
  out.u = fallback;
  return out;
}

// ADMM state for min lambda ||u||_1 + 1/2 ||psi u - y||^2; the x-update system is independent
// of lambda, so one factorization serves the whole bisection.
class LassoAdmm {
 public:
  LassoAdmm(const Matrix& psi, const Vector& y, const SolverConfig& cfg)
      : psi_(psi), y_(y), cfg_(cfg), psity_(psi.transpose() * y),
        llt_(psi.transpose() * psi + cfg.penalty * Matrix::Identity(psi.cols(), psi.cols())),
        z_(Vector::Zero(psi.cols())), dual_(Vector::Zero(psi.cols())) {}

  struct Result {
    Vector u;
    std::optional<ActiveSet> active;  // set when u is certified on its active set
  };

  Result solve(double lambda, int& iterations) {
    const Eigen::Index m = psi_.cols();
    const Vector thresholds = Vector::Constant(m, lambda / cfg_.penalty);
    Vector x = z_;
    for (int it = 1; it <= cfg_.inner_max_iter; ++it) {
      x = llt_.solve(psity_ + cfg_.penalty * (z_ - dual_));
      const Vector z_old = z_;
      z_ = soft_threshold(x + dual_, thresholds);
      dual_ += x - z_;
      ++iterations;
      const bool done = admm_converged(x, z_, z_old, cfg_.penalty, cfg_.inner_tol);
      if (done || it % kPolishEvery == 0) {
        ActiveSet as = make_active_set(psi_, y_, z_);
        if (auto u = lasso_on_active_set(psi_, y_, as, lambda)) return {*u, std::move(as)};
      }
      if (done) break;
    }
    return {z_, std::nullopt};
  }

 private:
  const Matrix& psi_;
  const Vector& y_;
  const SolverConfig& cfg_;
  Vector psity_;
  Eigen::LLT<Matrix> llt_;
  Vector z_;
  Vector dual_;
};

struct MatchedLasso {
  Vector u;
  double lambda = 0.0;
  int iterations = 0;
  bool polished = false;
};

// Finds lambda with ||psi u(lambda) - y|| = eps, assuming r_ls < eps < ||y||.
MatchedLasso residual_matched_lasso(const Matrix& psi, const Vector& y, double eps, const SolverConfig& cfg) {
  MatchedLasso out;
  LassoAdmm admm(psi, y, cfg);
  const double lambda_max = (psi.transpose() * y).lpNorm<Eigen::Infinity>();
  double lo = lambda_max * 1e-12;
  double hi = lambda_max;
  std::optional<MatchedLasso> best_feasible;
  const double eps_sq = eps * eps;

  for (int step = 0; step < kMaxBisections; ++step) {
    const double lambda = std::sqrt(lo * hi);
    auto res = admm.solve(lambda, out.iterations);
    if (res.active) {
      // Residual along this active set: ||r0||^2 + lambda^2 ||v||^2.
      const ActiveSet& as = *res.active;
      if (!as.idx.empty()) {
        const double r0_sq = (y - as.sub * as.ls).squaredNorm();
        const double v_norm = (as.sub * as.dir).norm();
        if (v_norm > 0.0 && eps_sq >= r0_sq) {
          const double lambda_star = std::sqrt(eps_sq - r0_sq) / v_norm;
          if (auto u = lasso_on_active_set(psi, y, as, lambda_star)) {
            out.u = *u;
            out.lambda = lambda_star;
            out.polished = true;
            return out;
          }
        }
      }
    }
    const double r = (psi * res.u - y).norm();
    if (std::abs(r - eps) <= cfg.residual_match_tol && r <= eps + cfg.residual_match_tol) {
      out.u = res.u;
      out.lambda = lambda;
      out.polished = res.active.has_value();
      return out;
    }
    if (r > eps) {
      hi = lambda;
    } else {
      lo = lambda;
      best_feasible = MatchedLasso{res.u, lambda, 0, res.active.has_value()};
    }
  }
  if (!best_feasible) {
    auto res = admm.solve(lo, out.iterations);
    best_feasible = MatchedLasso{res.u, lo, 0, res.active.has_value()};
  }
  best_feasible->iterations = out.iterations;
  return *best_feasible;
}

}  // namespace

BpdnSolution solve_weighted_bpdn(const Matrix& phi, const Vector& offset, const Vector& b, const Vector& w,
                                 double eps, const SolverConfig& cfg) {
  cfg.validate();
  if (offset.size() != phi.rows() || b.size() != phi.rows()) throw ShapeError("solve_weighted_bpdn: data length mismatch");
  if (w.size() != phi.cols()) throw ShapeError("solve_weighted_bpdn: weight length mismatch");
  require_positive_weights(w);
  if (!(eps >= 0.0) || !std::isfinite(eps)) throw DomainError("solve_weighted_bpdn: eps must be >= 0");

  const Eigen::Index m = phi.cols();
  const Vector y = b - offset;
  // u = W x with W = diag(w) / max(w) turns the weighted norm into a multiple of the l1 norm.
  const Vector wn = w / w.maxCoeff();
  const Matrix psi = phi * wn.cwiseInverse().asDiagonal();

  const Eigen::CompleteOrthogonalDecomposition<Matrix> cod(psi);
  const Vector y_hat = psi * cod.solve(y);
  const double r_ls = (y - y_hat).norm();
  if (r_ls > eps + cfg.residual_match_tol) {
    throw InfeasibleError("solve_weighted_bpdn: eps = " + std::to_string(eps) +
                              " is below the least-squares residual " + std::to_string(r_ls),
                          r_ls);
  }

  BpdnSolution sol;
  Vector u;
  if (y.norm() <= eps) {
    u = Vector::Zero(m);
    sol.polished = true;
  } else if (eps - r_ls <= cfg.residual_match_tol) {
    auto eq = basis_pursuit(psi, y_hat, cod, cfg);
    u = std::move(eq.u);
    sol.iterations = eq.iterations;
    sol.polished = eq.polished;
  } else {
    auto matched = residual_matched_lasso(psi, y, eps, cfg);
    u = std::move(matched.u);
    sol.lambda = matched.lambda;
    sol.iterations = matched.iterations;
    sol.polished = matched.polished;
  }
  sol.x = u.cwiseQuotient(wn);
  sol.residual = (y - phi * sol.x).norm();
  sol.objective = weighted_l1_norm(sol.x, w);
  return sol;
}

double observation_residual(const SparseProblem& problem, const Vector& estimate, const IntegrationConfig& icfg) {
  const auto& meas = problem.measurement;
  return (problem.observation - meas.matrix() * flow(problem.system, estimate, meas.time(), icfg)).norm();
}

namespace {

struct SupportFit {
  Vector x;
  double residual;
};

// min_z ||b - A flow(embed(z, S))|| by Gauss-Newton with step halving, starting at z = 0.
SupportFit fit_support(const SparseProblem& problem, std::span<const int> support, const IntegrationConfig& icfg) {
  const auto& a = problem.measurement.matrix();
  const double horizon = problem.measurement.time();
  const int m = problem.system.dim();
  Vector x = Vector::Zero(m);
  auto residual_at = [&](const Vector& p) { return observation_residual(problem, p, icfg); };
  double res = residual_at(x);
  if (support.empty()) return {x, res};

  const int max_iter = problem.system.has_affine_flow() ? 2 : 50;
  for (int it = 0; it < max_iter; ++it) {
    const FlowSensitivity fs = flow_with_jacobian(problem.system, x, horizon, icfg);
    const Vector r = problem.observation - a * fs.state;
    Matrix j(a.rows(), static_cast<Eigen::Index>(support.size()));
    const Matrix aj = a * fs.jacobian;
    for (std::size_t k = 0; k < support.size(); ++k) j.col(static_cast<Eigen::Index>(k)) = aj.col(support[k]);
    const Vector dz = j.colPivHouseholderQr().solve(r);
    Vector step = Vector::Zero(m);
    for (std::size_t k = 0; k < support.size(); ++k) step(support[k]) = dz(static_cast<Eigen::Index>(k));

    double t = 1.0;
    bool accepted = false;
    for (int halving = 0; halving < 40; ++halving, t *= 0.5) {
      const Vector trial = x + t * step;
      const double trial_res = residual_at(trial);
      if (trial_res <= res) {
        x = trial;
        res = trial_res;
        accepted = true;
        break;
      }
    }
    if (!accepted || t * step.norm() <= 1e-14 * std::max(1.0, x.norm())) break;
  }
  return {x, res};
}

}  // namespace

RecoveryOutcome l0_oracle(const SparseProblem& problem, const IntegrationConfig& icfg, std::uint64_t budget,
                          double feasibility_tol) {
  const int m = problem.system.dim();
  const int s = problem.sparsity;
  std::uint64_t total = 0;
  for (int k = 0; k <= s; ++k) {
    const std::uint64_t c = binomial(m, k);
    total = (c > UINT64_MAX - total) ? UINT64_MAX : total + c;
  }
  if (total > budget) {
    throw BudgetError("l0_oracle: " + std::to_string(total) + " supports exceed the budget of " +
                      std::to_string(budget));
  }
  const double eps = problem.measurement.noise_radius();
  const auto& w = problem.measurement.weights();

  RecoveryOutcome out;
  std::optional<SupportFit> best_infeasible;
  int examined = 0;
  for (int k = 0; k <= s; ++k) {
    std::optional<SupportFit> best;
    for_each_support(m, k, [&](std::span<const int> support) {
      SupportFit fit = fit_support(problem, support, icfg);
      ++examined;
      if (fit.residual <= eps + feasibility_tol) {
        if (!best || fit.residual < best->residual) best = std::move(fit);
      } else if (!best_infeasible || fit.residual < best_infeasible->residual) {
        best_infeasible = std::move(fit);
      }
      return true;
    });
    if (best) {
      out.estimate = best->x;
      out.residual = best->residual;
      out.weighted_l1 = weighted_l1_norm(out.estimate, w);
      out.iterations = examined;
      out.converged = true;
      return out;
    }
  }
  out.estimate = best_infeasible->x;
  out.residual = best_infeasible->residual;
  out.weighted_l1 = weighted_l1_norm(out.estimate, w);
  out.iterations = examined;
  out.converged = false;
  out.message = "no support of size <= s meets the residual bound";
  return out;
}

RecoveryOutcome recover_initial_state(const SparseProblem& problem, const IntegrationConfig& icfg,
                                      const SolverConfig& scfg) {
  scfg.validate();
  const auto& meas = problem.measurement;
  const auto& a = meas.matrix();
  const double eps = meas.noise_radius();
  const double horizon = meas.time();
  const int m = problem.system.dim();
  const bool exact_linearization = problem.system.has_affine_flow();

  RecoveryOutcome out;
  Vector x = Vector::Zero(m);
  double res = observation_residual(problem, x, icfg);
  bool converged = false;

  for (int k = 1; k <= scfg.outer_max_iter; ++k) {
    out.iterations = k;
    const FlowSensitivity fs = flow_with_jacobian(problem.system, x, horizon, icfg);
    const Matrix phi = a * fs.jacobian;
    const Vector offset = a * fs.state - phi * x;

    BpdnSolution sol;
    try {
      sol = solve_weighted_bpdn(phi, offset, problem.observation, meas.weights(), eps, scfg);
    } catch (const InfeasibleError& e) {
      if (exact_linearization) throw;
      // The linearized ball can miss the data far from the solution; take the closest
      // reachable residual for this step instead.
      sol = solve_weighted_bpdn(phi, offset, problem.observation, meas.weights(), e.min_residual(), scfg);
    }

    if (exact_linearization) {
      x = sol.x;
      res = observation_residual(problem, x, icfg);
      converged = true;
      break;
    }

    const Vector step = sol.x - x;
    const double allowed = std::max(res, eps + scfg.residual_match_tol);
    double t = 1.0;
    bool accepted = false;
    for (int halving = 0; halving < 40; ++halving, t *= 0.5) {
      const Vector trial = x + t * step;
      const double trial_res = observation_residual(problem, trial, icfg);
      if (trial_res <= allowed) {
        x = trial;
        res = trial_res;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      out.message = "step halving failed to keep the residual from growing";
      break;
    }
    if (t * step.norm() < scfg.outer_tol) {
      converged = true;
      break;
    }
  }

  out.estimate = x;
  out.residual = res;
  out.weighted_l1 = weighted_l1_norm(x, meas.weights());
  if (converged && res > eps + scfg.residual_match_tol) {
    converged = false;
    out.message = "final residual exceeds eps";
  } else if (!converged && out.message.empty()) {
    out.message = "outer iteration limit reached";
  }
  out.converged = converged;
  return out;
}

}  // namespace sparseobs
