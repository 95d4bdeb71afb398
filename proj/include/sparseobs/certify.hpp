#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sparseobs/model.hpp"
#include "sparseobs/ode.hpp"
#include "sparseobs/rip.hpp"

namespace sparseobs {

/// Upper limit on the observation time under which a guarantee holds.
class Horizon {
 public:
  enum class Kind { finite, unbounded, not_certifiable };

  static Horizon finite(double value) { return Horizon(Kind::finite, value); }
  static Horizon unbounded() { return Horizon(Kind::unbounded, std::numeric_limits<double>::infinity()); }
  static Horizon not_certifiable() { return Horizon(Kind::not_certifiable, std::numeric_limits<double>::quiet_NaN()); }

  [[nodiscard]] Kind kind() const noexcept { return kind_; }
  /// Finite bound, +inf for unbounded, NaN when not certifiable.
  [[nodiscard]] double value() const noexcept { return value_; }
  /// True when observing at time t lies strictly inside the horizon.
  [[nodiscard]] bool admits(double t) const noexcept {
    return kind_ == Kind::unbounded || (kind_ == Kind::finite && t < value_);
  }

 private:
  Horizon(Kind kind, double value) : kind_(kind), value_(value) {}
  Kind kind_;
  double value_;
};

namespace reason {
inline constexpr std::string_view delta_condition = "delta-condition";
inline constexpr std::string_view horizon_exceeded = "horizon-exceeded";
inline constexpr std::string_view denominator_nonpositive = "denominator-nonpositive";
}  // namespace reason

/// Observability and recovery guarantees for one (L, A, s, tau, T) configuration.
///
/// Constants follow the recovery error estimate
///   ||x* - x0||_2 <= C0 s^{-1/2} ||x0 - (x0)_s||_1 + C1 eps
/// with
///   M     = exp(L T) - 1
///   alpha = 2 sqrt(1 + d) / (1 - d)
///   rho   = sqrt(2) d / (1 - d)
///   D     = 1 - rho tau - alpha (1 + tau) M ||A|| / 2
///   C0    = 2 tau (rho + 1) / D,   C1 = alpha (1 + tau) / D
/// where d = delta_2s.
struct Certificate {
  double time = 0.0;
  double lipschitz = 0.0;
  Horizon horizon_T_max = Horizon::not_certifiable();  // unique-determination horizon
  Horizon thm2_T_max = Horizon::not_certifiable();     // stable-recovery horizon
  double delta_2s = 0.0;
  RipMethod delta_method = RipMethod::exact;
  double tau = 1.0;
  double op_norm = 0.0;
  double M = 0.0;
  std::optional<double> alpha;
  std::optional<double> rho;
  std::optional<double> denominator;
  std::optional<double> C0;
  std::optional<double> C1;
  bool feasible = false;
  std::vector<std::string> reasons;
};

/// (1/L) ln(1 + sqrt(1 - delta_2s) / ||A||); unbounded for L = 0; not certifiable for delta_2s >= 1.
[[nodiscard]] Horizon observability_horizon(double lipschitz, double delta_2s, double op_norm);

/// (1/L) ln(1 + (1 - d(1 + tau sqrt2)) / ((1 + tau) ||A|| sqrt(1 + d))), the time below which
/// the denominator D stays positive; not certifiable unless d < 1 / (1 + tau sqrt2).
[[nodiscard]] Horizon recovery_horizon(double lipschitz, double delta_2s, double tau, double op_norm);

[[nodiscard]] Certificate recovery_constants(double delta_2s, double tau, double lipschitz, double time,
                                             double op_norm);

/// C0 s^{-1/2} ||x0 - best_s_term(x0, s)||_1 + C1 eps. Throws CertificateError when infeasible.
[[nodiscard]] double recovery_error_bound(const Certificate& cert, const Vector& x0, int s, double eps);

struct DistinguishabilityGap {
  double measured;    // ||A x2(T) - A x1(T)||_2
  double guaranteed;  // (sqrt(1 - d) - M ||A||) ||x2^0 - x1^0||_2, -inf when d >= 1
};

[[nodiscard]] DistinguishabilityGap distinguishability_gap(const Matrix& a, const DynamicalSystem& system,
                                                           const Vector& x1_0, const Vector& x2_0, double time,
                                                           const IntegrationConfig& cfg, double delta_2s);

struct CertifyOptions {
  std::uint64_t rip_budget = kDefaultRipBudget;
  double norm_tolerance = 1e-12;
};

/// End-to-end certificate: ||A|| by power iteration, delta_{2s} exactly when enumeration fits the
/// budget (2s is capped at m), otherwise the coherence upper bound.
[[nodiscard]] Certificate certify_instance(const DynamicalSystem& system, const Matrix& a, int sparsity,
                                           double tau, double time, const CertifyOptions& options = {});

/// delta_{min(2s, m)} used by the certificates; exact within budget, else coherence upper bound.
[[nodiscard]] RipReport certificate_delta(const Matrix& a, int sparsity, std::uint64_t budget = kDefaultRipBudget);

}  // namespace sparseobs
