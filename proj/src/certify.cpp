#include "sparseobs/certify.hpp"

#include <cmath>
#include <numbers>

#include "sparseobs/errors.hpp"

namespace sparseobs {

namespace {

void require_positive_norm(double op_norm) {
  if (!(op_norm > 0.0) || !std::isfinite(op_norm)) throw DomainError("operator norm must be > 0");
}

Horizon log_horizon(double lipschitz, double ratio) {
  if (lipschitz == 0.0) return Horizon::unbounded();
  return Horizon::finite(std::log1p(ratio) / lipschitz);
}

}  // namespace

Horizon observability_horizon(double lipschitz, double delta_2s, double op_norm) {
  require_positive_norm(op_norm);
  if (!(lipschitz >= 0.0)) throw DomainError("Lipschitz constant must be >= 0");
  if (!(delta_2s >= 0.0)) throw DomainError("delta_2s must be >= 0");
  if (delta_2s >= 1.0) return Horizon::not_certifiable();
  return log_horizon(lipschitz, std::sqrt(1.0 - delta_2s) / op_norm);
}

Horizon recovery_horizon(double lipschitz, double delta_2s, double tau, double op_norm) {
  require_positive_norm(op_norm);
  if (!(lipschitz >= 0.0)) throw DomainError("Lipschitz constant must be >= 0");
  if (!(delta_2s >= 0.0)) throw DomainError("delta_2s must be >= 0");
  const double slack = 1.0 - delta_2s * (1.0 + tau * std::numbers::sqrt2);
  if (!(slack > 0.0)) return Horizon::not_certifiable();
  return log_horizon(lipschitz, slack / ((1.0 + tau) * op_norm * std::sqrt(1.0 + delta_2s)));
}

Certificate recovery_constants(double delta_2s, double tau, double lipschitz, double time, double op_norm) {
  require_positive_norm(op_norm);
  if (!(tau >= 1.0)) throw DomainError("tau must be >= 1");
  if (!(time > 0.0)) throw DomainError("time must be > 0");
  if (!(lipschitz >= 0.0)) throw DomainError("Lipschitz constant must be >= 0");
  if (!(delta_2s >= 0.0)) throw DomainError("delta_2s must be >= 0");

  Certificate cert;
  cert.time = time;
  cert.lipschitz = lipschitz;
  cert.delta_2s = delta_2s;
  cert.tau = tau;
  cert.op_norm = op_norm;
  cert.M = std::expm1(lipschitz * time);
  cert.horizon_T_max = observability_horizon(lipschitz, delta_2s, op_norm);
  cert.thm2_T_max = recovery_horizon(lipschitz, delta_2s, tau, op_norm);

  const bool delta_ok = delta_2s < 1.0 / (1.0 + tau * std::numbers::sqrt2);
  if (!delta_ok) cert.reasons.emplace_back(reason::delta_condition);

  if (delta_2s < 1.0) {
    const double alpha = 2.0 * std::sqrt(1.0 + delta_2s) / (1.0 - delta_2s);
    const double rho = std::numbers::sqrt2 * delta_2s / (1.0 - delta_2s);
    const double denom = 1.0 - rho * tau - 0.5 * alpha * (1.0 + tau) * cert.M * op_norm;
    cert.alpha = alpha;
    cert.rho = rho;
    cert.denominator = denom;
    if (denom > 0.0) {
      cert.C0 = 2.0 * tau * (rho + 1.0) / denom;
      cert.C1 = alpha * (1.0 + tau) / denom;
    } else {
      cert.reasons.emplace_back(reason::denominator_nonpositive);
    }
  }
  if (delta_ok && !cert.thm2_T_max.admits(time)) cert.reasons.emplace_back(reason::horizon_exceeded);

  cert.feasible = cert.reasons.empty();
  return cert;
}

double recovery_error_bound(const Certificate& cert, const Vector& x0, int s, double eps) {
  if (!cert.feasible || !cert.C0 || !cert.C1) {
    std::string msg = "certificate is infeasible:";
    for (const auto& r : cert.reasons) msg += " " + r;
    throw CertificateError(msg, cert.reasons);
  }
  if (s < 1 || s > x0.size()) throw DomainError("recovery_error_bound: s must lie in [1, m]");
  if (!(eps >= 0.0)) throw DomainError("recovery_error_bound: eps must be >= 0");
  const double tail = (x0 - best_s_term(x0, s)).lpNorm<1>();
  return *cert.C0 * tail / std::sqrt(static_cast<double>(s)) + *cert.C1 * eps;
}

DistinguishabilityGap distinguishability_gap(const Matrix& a, const DynamicalSystem& system, const Vector& x1_0,
                                             const Vector& x2_0, double time, const IntegrationConfig& cfg,
                                             double delta_2s) {
  if (a.cols() != system.dim()) throw ShapeError("distinguishability_gap: matrix/system dimension mismatch");
  if (x1_0 == x2_0) throw DomainError("distinguishability_gap: initial states must differ");
  const Vector x1 = flow(system, x1_0, time, cfg);
  const Vector x2 = flow(system, x2_0, time, cfg);
  DistinguishabilityGap gap{};
  gap.measured = (a * (x2 - x1)).norm();
  if (delta_2s < 1.0) {
    const double m_const = std::expm1(system.lipschitz() * time);
    gap.guaranteed = (std::sqrt(1.0 - delta_2s) - m_const * operator_norm(a)) * (x2_0 - x1_0).norm();
  } else {
    gap.guaranteed = -std::numeric_limits<double>::infinity();
  }
  return gap;
}

RipReport certificate_delta(const Matrix& a, int sparsity, std::uint64_t budget) {
  const auto m = static_cast<int>(a.cols());
  if (sparsity < 1 || sparsity > m) throw DomainError("sparsity must lie in [1, m]");
  const int k = std::min(2 * sparsity, m);
  if (binomial(m, k) <= budget) return rip_constant_exact(a, k, budget);
  return rip_constant_bounds(a, k, 1, 0).upper;
}

Certificate certify_instance(const DynamicalSystem& system, const Matrix& a, int sparsity, double tau, double time,
                             const CertifyOptions& options) {
  if (a.cols() != system.dim()) throw ShapeError("certify: matrix columns must equal the system dimension");
  const RipReport delta = certificate_delta(a, sparsity, options.rip_budget);
  const double norm = operator_norm(a, options.norm_tolerance);
  if (!std::isfinite(delta.delta)) {
    Certificate cert;
    cert.time = time;
    cert.lipschitz = system.lipschitz();
    cert.delta_2s = delta.delta;
    cert.delta_method = delta.method;
    cert.tau = tau;
    cert.op_norm = norm;
    cert.M = std::expm1(system.lipschitz() * time);
    cert.reasons.emplace_back(reason::delta_condition);
    return cert;
  }
  Certificate cert = recovery_constants(delta.delta, tau, system.lipschitz(), time, norm);
  cert.delta_method = delta.method;
  return cert;
}

}  // namespace sparseobs
