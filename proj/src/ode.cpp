#include "sparseobs/ode.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "sparseobs/errors.hpp"

namespace sparseobs {

IntegrationConfig IntegrationConfig::fixed(int step_count) {
  if (step_count < 1) throw DomainError("step_count must be >= 1");
  IntegrationConfig cfg;
  cfg.mode_ = Mode::fixed_step;
  cfg.step_count_ = step_count;
  cfg.tolerance_ = 0.0;
  return cfg;
}

IntegrationConfig IntegrationConfig::adaptive(double tolerance) {
  if (!(tolerance > 0.0)) throw DomainError("tolerance must be > 0");
  IntegrationConfig cfg;
  cfg.mode_ = Mode::adaptive;
  cfg.step_count_ = 0;
  cfg.tolerance_ = tolerance;
  return cfg;
}

namespace {

void check_inputs(const DynamicalSystem& system, const Vector& x0, double horizon) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw DomainError("integration time T must be > 0");
  if (x0.size() != system.dim()) {
    throw ShapeError("initial state has length " + std::to_string(x0.size()) + ", system dimension is " +
                     std::to_string(system.dim()));
  }
}

void check_finite(const Vector& y, double t) {
  if (!y.allFinite()) {
    std::ostringstream msg;
    msg << "non-finite state encountered at t = " << t;
    throw NumericalError(msg.str(), t);
  }
}

// Augmented right-hand side: the state alone, or state plus column-major Phi.
struct StateRhs {
  const DynamicalSystem& system;
  Vector operator()(double t, const Vector& y) const { return system.rhs(t, y); }
};

struct VariationalRhs {
  const DynamicalSystem& system;
  Vector operator()(double t, const Vector& y) const {
    const int m = system.dim();
    const Vector x = y.head(m);
    Vector dy(y.size());
    dy.head(m) = system.rhs(t, x);
    const Eigen::Map<const Matrix> phi(y.data() + m, m, m);
    Eigen::Map<Matrix> dphi(dy.data() + m, m, m);
    dphi.noalias() = system.rhs_jacobian(t, x) * phi;
    return dy;
  }
};

template <typename Rhs>
Vector rk4_step(const Rhs& f, double t, const Vector& y, double h) {
  const Vector k1 = f(t, y);
  const Vector k2 = f(t + 0.5 * h, y + (0.5 * h) * k1);
  const Vector k3 = f(t + 0.5 * h, y + (0.5 * h) * k2);
  const Vector k4 = f(t + h, y + h * k3);
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// Dormand-Prince 5(4) tableau.
constexpr double kC[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
constexpr double kA[7][6] = {
    {0, 0, 0, 0, 0, 0},
    {1.0 / 5, 0, 0, 0, 0, 0},
    {3.0 / 40, 9.0 / 40, 0, 0, 0, 0},
    {44.0 / 45, -56.0 / 15, 32.0 / 9, 0, 0, 0},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729, 0, 0},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656, 0},
    {35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84}};
constexpr double kB5[7] = {35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84, 0};
constexpr double kB4[7] = {5179.0 / 57600, 0, 7571.0 / 16695, 393.0 / 640, -92097.0 / 339200, 187.0 / 2100,
                           1.0 / 40};

template <typename Rhs>
void run_fixed(const Rhs& f, Vector y, double horizon, int steps, std::vector<double>* times,
               std::vector<Vector>* states, Vector& final_out) {
  const double h = horizon / steps;
  double t = 0.0;
  for (int k = 1; k <= steps; ++k) {
    y = rk4_step(f, t, y, h);
    t = (k == steps) ? horizon : k * h;
    check_finite(y, t);
    if (times) {
      times->push_back(t);
      states->push_back(y);
    }
  }
  final_out = std::move(y);
}

template <typename Rhs>
void run_adaptive(const Rhs& f, Vector y, double horizon, double tol, std::vector<double>* times,
                  std::vector<Vector>* states, Vector& final_out) {
  constexpr int kMaxSteps = 1000000;
  const double h_min = 1e-14 * horizon;
  double t = 0.0;
  double h = std::min(horizon, 0.01 * horizon / std::max(1.0, f(0.0, y).norm() + 1e-300));
  h = std::max(h, 1e-6 * horizon);
  Vector k[7];
  k[0] = f(t, y);
  for (int step = 0; step < kMaxSteps && t < horizon; ++step) {
    const bool last = t + h >= horizon * (1.0 - 1e-15);
    if (last) h = horizon - t;
    for (int s = 1; s < 7; ++s) {
      Vector ys = y;
      for (int j = 0; j < s; ++j) {
        if (kA[s][j] != 0.0) ys += (h * kA[s][j]) * k[j];
      }
      k[s] = f(t + kC[s] * h, ys);
    }
    Vector y5 = y;
    Vector err = Vector::Zero(y.size());
    for (int s = 0; s < 7; ++s) {
      if (kB5[s] != 0.0) y5 += (h * kB5[s]) * k[s];
      err += (h * (kB5[s] - kB4[s])) * k[s];
    }
    const Eigen::ArrayXd scale = tol + tol * y.array().abs().max(y5.array().abs());
    const double err_norm = std::sqrt((err.array() / scale).square().mean());
    if (!std::isfinite(err_norm)) check_finite(y5, t + h);
    if (err_norm <= 1.0) {
      t = last ? horizon : t + h;
      y = std::move(y5);
      check_finite(y, t);
      k[0] = k[6];  // first-same-as-last
      if (times) {
        times->push_back(t);
        states->push_back(y);
      }
    }
    const double factor = err_norm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err_norm, -0.2), 0.2, 5.0);
    h *= factor;
    if (h < h_min && t < horizon) throw NumericalError("adaptive step size underflow", t);
  }
  if (t < horizon) throw NumericalError("adaptive integrator exceeded the step limit", t);
  final_out = std::move(y);
}

template <typename Rhs>
void run(const Rhs& f, const Vector& y0, double horizon, const IntegrationConfig& cfg,
         std::vector<double>* times, std::vector<Vector>* states, Vector& final_out) {
  check_finite(y0, 0.0);
  if (cfg.mode() == IntegrationConfig::Mode::fixed_step) {
    run_fixed(f, y0, horizon, cfg.step_count(), times, states, final_out);
  } else {
    run_adaptive(f, y0, horizon, cfg.tolerance(), times, states, final_out);
  }
}

}  // namespace

Trajectory integrate(const DynamicalSystem& system, const Vector& x0, double horizon,
                     const IntegrationConfig& cfg) {
  check_inputs(system, x0, horizon);
  Trajectory traj;
  traj.times.push_back(0.0);
  traj.states.push_back(x0);
  Vector final_state;
  run(StateRhs{system}, x0, horizon, cfg, &traj.times, &traj.states, final_state);
  return traj;
}

Vector flow(const DynamicalSystem& system, const Vector& x0, double horizon, const IntegrationConfig& cfg) {
  check_inputs(system, x0, horizon);
  Vector final_state;
  run(StateRhs{system}, x0, horizon, cfg, nullptr, nullptr, final_state);
  return final_state;
}

FlowSensitivity flow_with_jacobian(const DynamicalSystem& system, const Vector& x0, double horizon,
                                   const IntegrationConfig& cfg) {
  check_inputs(system, x0, horizon);
  const int m = system.dim();
  Vector y0(m + m * m);
  y0.head(m) = x0;
  Eigen::Map<Matrix>(y0.data() + m, m, m).setIdentity();
  Vector y;
  run(VariationalRhs{system}, y0, horizon, cfg, nullptr, nullptr, y);
  FlowSensitivity out;
  out.state = y.head(m);
  out.jacobian = Eigen::Map<const Matrix>(y.data() + m, m, m);
  return out;
}

Matrix flow_jacobian(const DynamicalSystem& system, const Vector& x0, double horizon,
                     const IntegrationConfig& cfg) {
  return flow_with_jacobian(system, x0, horizon, cfg).jacobian;
}

double gronwall_envelope(double lipschitz, double gap0, double t) {
  if (!(lipschitz >= 0.0) || !(gap0 >= 0.0) || !(t >= 0.0)) {
    throw DomainError("gronwall_envelope: L, gap0 and t must be nonnegative");
  }
  return gap0 * std::exp(lipschitz * t);
}

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory) {
  const auto m = trajectory.states.empty() ? 0 : trajectory.states.front().size();
  out << "t";
  for (Eigen::Index i = 1; i <= m; ++i) out << ",x_" << i;
  out << '\n';
  out << std::setprecision(17);
  for (std::size_t k = 0; k < trajectory.times.size(); ++k) {
    out << trajectory.times[k];
    for (Eigen::Index i = 0; i < m; ++i) out << ',' << trajectory.states[k](i);
    out << '\n';
  }
}

}  // namespace sparseobs
