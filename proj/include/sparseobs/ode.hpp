#pragma once

#include <iosfwd>
#include <vector>

#include "sparseobs/model.hpp"

namespace sparseobs {

/// Either fixed-step classical RK4 or adaptive Dormand-Prince 5(4).
class IntegrationConfig {
 public:
  enum class Mode { fixed_step, adaptive };

  static constexpr int kDefaultSteps = 256;

  /// Default: fixed-step RK4 with 256 steps over [0, T].
  IntegrationConfig() = default;
  static IntegrationConfig fixed(int step_count = kDefaultSteps);
  static IntegrationConfig adaptive(double tolerance);

  [[nodiscard]] Mode mode() const noexcept { return mode_; }
  [[nodiscard]] int step_count() const noexcept { return step_count_; }
  [[nodiscard]] double tolerance() const noexcept { return tolerance_; }

 private:
  Mode mode_ = Mode::fixed_step;
  int step_count_ = kDefaultSteps;
  double tolerance_ = 0.0;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;

  [[nodiscard]] const Vector& final_state() const { return states.back(); }
};

struct FlowSensitivity {
  Vector state;     // x(T)
  Matrix jacobian;  // dx(T)/dx0
};

/// Integrates x' = f(x) from x(0) = x0 to T, keeping every accepted step.
[[nodiscard]] Trajectory integrate(const DynamicalSystem& system, const Vector& x0, double horizon,
                                   const IntegrationConfig& cfg = {});

/// Final state x(T) only.
[[nodiscard]] Vector flow(const DynamicalSystem& system, const Vector& x0, double horizon,
                          const IntegrationConfig& cfg = {});

/// x(T) together with Phi(T) = dx(T)/dx0 from the forward variational equation
/// Phi' = Df(x) Phi, Phi(0) = I, integrated with the same steps as the state.
/// In fixed-step mode the result is the exact derivative of the discrete RK4 map.
[[nodiscard]] FlowSensitivity flow_with_jacobian(const DynamicalSystem& system, const Vector& x0,
                                                 double horizon, const IntegrationConfig& cfg = {});

[[nodiscard]] Matrix flow_jacobian(const DynamicalSystem& system, const Vector& x0, double horizon,
                                   const IntegrationConfig& cfg = {});

/// gap0 * exp(L t): the Gronwall bound on the separation of two trajectories.
[[nodiscard]] double gronwall_envelope(double lipschitz, double gap0, double t);

/// CSV with header t,x_1,...,x_m.
void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory);

}  // namespace sparseobs
