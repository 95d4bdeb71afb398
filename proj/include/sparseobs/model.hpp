#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace sparseobs {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Right-hand-side families with analytic global Lipschitz constants.
enum class RhsKind { zero, linear, affine, tanh_saturated };

[[nodiscard]] std::string_view to_string(RhsKind kind) noexcept;
[[nodiscard]] RhsKind rhs_kind_from_string(std::string_view name);

/// Autonomous system x' = f(x) drawn from a small catalog:
///   zero            f(x) = 0
///   linear          f(x) = M x
///   affine          f(x) = M x + c
///   tanh-saturated  f(x) = tanh(M x + c)   (componentwise)
/// The Lipschitz constant is the operator 2-norm of M (0 for zero),
/// computed once at construction.
class DynamicalSystem {
 public:
  static DynamicalSystem zero(int dim);
  static DynamicalSystem linear(Matrix m);
  static DynamicalSystem affine(Matrix m, Vector bias);
  static DynamicalSystem tanh_saturated(Matrix m, Vector bias);
  static DynamicalSystem tanh_saturated(Matrix m);
  /// Generic constructor used by deserialization; validates shapes.
  static DynamicalSystem make(RhsKind kind, int dim, Matrix m, Vector bias);

  [[nodiscard]] int dim() const noexcept { return dim_; }
  [[nodiscard]] RhsKind kind() const noexcept { return kind_; }
  [[nodiscard]] const Matrix& matrix() const noexcept { return m_; }
  [[nodiscard]] const Vector& bias() const noexcept { return bias_; }
  [[nodiscard]] double lipschitz() const noexcept { return lipschitz_; }
  /// True when the flow map is affine in x0 (zero, linear, affine).
  [[nodiscard]] bool has_affine_flow() const noexcept { return kind_ != RhsKind::tanh_saturated; }

  /// f(x); t is accepted for interface symmetry and ignored.
  [[nodiscard]] Vector rhs(double t, const Vector& x) const;
  /// Df(x), the m x m Jacobian of the right-hand side.
  [[nodiscard]] Matrix rhs_jacobian(double t, const Vector& x) const;

 private:
  DynamicalSystem(RhsKind kind, int dim, Matrix m, Vector bias);

  RhsKind kind_;
  int dim_;
  Matrix m_;
  Vector bias_;
  double lipschitz_;
};

/// b = A x(T) + e with ||e||_2 <= noise_radius; weights define ||.||_{1,w}.
class MeasurementModel {
 public:
  MeasurementModel(Matrix a, double time, double noise_radius, Vector weights);
  /// Unit weights.
  MeasurementModel(Matrix a, double time, double noise_radius);

  [[nodiscard]] const Matrix& matrix() const noexcept { return a_; }
  [[nodiscard]] int rows() const noexcept { return static_cast<int>(a_.rows()); }
  [[nodiscard]] int cols() const noexcept { return static_cast<int>(a_.cols()); }
  [[nodiscard]] double time() const noexcept { return time_; }
  [[nodiscard]] double noise_radius() const noexcept { return noise_radius_; }
  [[nodiscard]] const Vector& weights() const noexcept { return weights_; }

 private:
  Matrix a_;
  double time_;
  double noise_radius_;
  Vector weights_;
};

struct SparseProblem {
  SparseProblem(DynamicalSystem system, MeasurementModel measurement, Vector observation, int sparsity);

  DynamicalSystem system;
  MeasurementModel measurement;
  Vector observation;
  int sparsity;
};

struct RecoveryOutcome {
  Vector estimate;
  double residual = 0.0;
  double weighted_l1 = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string message;
};

/// f(t, x) for the catalog system.
[[nodiscard]] Vector eval_rhs(const DynamicalSystem& system, double t, const Vector& x);

/// sum_i w_i |x_i|.
[[nodiscard]] double weighted_l1_norm(const Vector& x, const Vector& w);

/// Keeps the s largest-magnitude entries of x; ties keep the lowest index.
[[nodiscard]] Vector best_s_term(const Vector& x, int s);

/// max w_i / min w_i.
[[nodiscard]] double weight_condition_number(const Vector& w);

[[nodiscard]] double lipschitz_bound(const DynamicalSystem& system) noexcept;

/// Indices of nonzero entries, ascending.
[[nodiscard]] std::vector<int> support_of(const Vector& x, double threshold = 0.0);

/// Throws DomainError unless every weight is finite and strictly positive.
void require_positive_weights(const Vector& w);

}  // namespace sparseobs
