#include "sparseobs/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sparseobs/errors.hpp"

namespace sparseobs {

namespace {

double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues().size() > 0 ? svd.singularValues()(0) : 0.0;
}

void require_length(const Vector& x, int n, const char* what) {
  if (x.size() != n) {
    throw ShapeError(std::string(what) + ": expected length " + std::to_string(n) + ", got " +
                     std::to_string(x.size()));
  }
}

}  // namespace

std::string_view to_string(RhsKind kind) noexcept {
  switch (kind) {
    case RhsKind::zero:
      return "zero";
    case RhsKind::linear:
      return "linear";
    case RhsKind::affine:
      return "affine";
    case RhsKind::tanh_saturated:
      return "tanh-saturated";
  }
  return "unknown";
}

RhsKind rhs_kind_from_string(std::string_view name) {
  if (name == "zero") return RhsKind::zero;
  if (name == "linear") return RhsKind::linear;
  if (name == "affine") return RhsKind::affine;
  if (name == "tanh-saturated" || name == "tanh") return RhsKind::tanh_saturated;
  throw DomainError("unknown rhs kind '" + std::string(name) + "'");
}

DynamicalSystem::DynamicalSystem(RhsKind kind, int dim, Matrix m, Vector bias)
    : kind_(kind), dim_(dim), m_(std::move(m)), bias_(std::move(bias)), lipschitz_(0.0) {
  if (dim_ < 1) throw DomainError("system dimension must be >= 1");
  if (kind_ == RhsKind::zero) {
    m_ = Matrix::Zero(dim_, dim_);
    bias_ = Vector::Zero(dim_);
    return;
  }
  if (m_.rows() != dim_ || m_.cols() != dim_) {
    throw ShapeError("system matrix must be " + std::to_string(dim_) + "x" + std::to_string(dim_));
  }
  if (bias_.size() == 0) bias_ = Vector::Zero(dim_);
  require_length(bias_, dim_, "system bias");
  if (kind_ == RhsKind::linear && !bias_.isZero(0.0)) {
    throw DomainError("linear system cannot carry a bias; use affine");
  }
  if (!m_.allFinite() || !bias_.allFinite()) throw DomainError("system parameters must be finite");
  lipschitz_ = spectral_norm(m_);
}

DynamicalSystem DynamicalSystem::zero(int dim) { return {RhsKind::zero, dim, Matrix(), Vector()}; }

DynamicalSystem DynamicalSystem::linear(Matrix m) {
  const auto d = static_cast<int>(m.rows());
  return {RhsKind::linear, d, std::move(m), Vector()};
}

DynamicalSystem DynamicalSystem::affine(Matrix m, Vector bias) {
  const auto d = static_cast<int>(m.rows());
  return {RhsKind::affine, d, std::move(m), std::move(bias)};
}

DynamicalSystem DynamicalSystem::tanh_saturated(Matrix m, Vector bias) {
  const auto d = static_cast<int>(m.rows());
  return {RhsKind::tanh_saturated, d, std::move(m), std::move(bias)};
}

DynamicalSystem DynamicalSystem::tanh_saturated(Matrix m) { return tanh_saturated(std::move(m), Vector()); }

DynamicalSystem DynamicalSystem::make(RhsKind kind, int dim, Matrix m, Vector bias) {
  return {kind, dim, std::move(m), std::move(bias)};
}

Vector DynamicalSystem::rhs(double /*t*/, const Vector& x) const {
  require_length(x, dim_, "state");
  switch (kind_) {
    case RhsKind::zero:
      return Vector::Zero(dim_);
    case RhsKind::linear:
      return m_ * x;
    case RhsKind::affine:
      return m_ * x + bias_;
    case RhsKind::tanh_saturated:
      return (m_ * x + bias_).array().tanh().matrix();
  }
  return Vector::Zero(dim_);
}

Matrix DynamicalSystem::rhs_jacobian(double /*t*/, const Vector& x) const {
  require_length(x, dim_, "state");
  switch (kind_) {
    case RhsKind::zero:
      return Matrix::Zero(dim_, dim_);
    case RhsKind::linear:
    case RhsKind::affine:
      return m_;
    case RhsKind::tanh_saturated: {
      const Vector th = (m_ * x + bias_).array().tanh().matrix();
      const Vector slope = (1.0 - th.array().square()).matrix();
      return slope.asDiagonal() * m_;
    }
  }
  return Matrix::Zero(dim_, dim_);
}

MeasurementModel::MeasurementModel(Matrix a, double time, double noise_radius, Vector weights)
    : a_(std::move(a)), time_(time), noise_radius_(noise_radius), weights_(std::move(weights)) {
  if (a_.rows() < 1 || a_.cols() < 1) throw ShapeError("measurement matrix must be at least 1x1");
  if (!a_.allFinite()) throw DomainError("measurement matrix must be finite");
  if (!(time_ > 0.0) || !std::isfinite(time_)) throw DomainError("observation time must be > 0");
  if (!(noise_radius_ >= 0.0) || !std::isfinite(noise_radius_)) throw DomainError("noise radius must be >= 0");
  require_length(weights_, static_cast<int>(a_.cols()), "weights");
  require_positive_weights(weights_);
}

MeasurementModel::MeasurementModel(Matrix a, double time, double noise_radius)
    : MeasurementModel(a, time, noise_radius, Vector::Ones(a.cols())) {}

SparseProblem::SparseProblem(DynamicalSystem sys, MeasurementModel meas, Vector obs, int s)
    : system(std::move(sys)), measurement(std::move(meas)), observation(std::move(obs)), sparsity(s) {
  if (measurement.cols() != system.dim()) {
    throw ShapeError("measurement matrix has " + std::to_string(measurement.cols()) +
                     " columns but the system dimension is " + std::to_string(system.dim()));
  }
  require_length(observation, measurement.rows(), "observation");
  if (sparsity < 1 || sparsity > system.dim()) throw DomainError("sparsity must lie in [1, m]");
}

Vector eval_rhs(const DynamicalSystem& system, double t, const Vector& x) { return system.rhs(t, x); }

void require_positive_weights(const Vector& w) {
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (!(w(i) > 0.0) || !std::isfinite(w(i))) {
      throw DomainError("weights must be strictly positive (w[" + std::to_string(i) + "] = " +
                        std::to_string(w(i)) + ")");
    }
  }
}

double weighted_l1_norm(const Vector& x, const Vector& w) {
  if (x.size() != w.size()) throw ShapeError("weighted_l1_norm: length mismatch");
  require_positive_weights(w);
  return (w.array() * x.array().abs()).sum();
}

Vector best_s_term(const Vector& x, int s) {
  const auto m = static_cast<int>(x.size());
  if (s < 0 || s > m) throw DomainError("best_s_term: s must lie in [0, m]");
  std::vector<int> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  // stable_sort keeps ascending index among equal magnitudes.
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return std::abs(x(a)) > std::abs(x(b)); });
  Vector out = Vector::Zero(m);
  for (int k = 0; k < s; ++k) {
    const int i = order[static_cast<std::size_t>(k)];
    out(i) = x(i);
  }
  return out;
}

double weight_condition_number(const Vector& w) {
  if (w.size() == 0) throw ShapeError("weight_condition_number: empty weights");
  require_positive_weights(w);
  return w.maxCoeff() / w.minCoeff();
}

double lipschitz_bound(const DynamicalSystem& system) noexcept { return system.lipschitz(); }

std::vector<int> support_of(const Vector& x, double threshold) {
  std::vector<int> s;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (std::abs(x(i)) > threshold) s.push_back(static_cast<int>(i));
  }
  return s;
}

}  // namespace sparseobs
