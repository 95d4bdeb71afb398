#include "sparseobs/rip.hpp"

#include <algorithm>
#include <cmath>

#include "sparseobs/errors.hpp"
#include "sparseobs/random.hpp"

namespace sparseobs {

std::string_view to_string(RipMethod method) noexcept {
  switch (method) {
    case RipMethod::exact:
      return "exact";
    case RipMethod::monte_carlo_lower:
      return "monte-carlo-lower";
    case RipMethod::coherence_upper:
      return "coherence-upper";
  }
  return "unknown";
}

std::uint64_t binomial(int n, int k) noexcept {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) {
    const auto num = static_cast<std::uint64_t>(n - k + i);
    if (r > UINT64_MAX / num) return UINT64_MAX;
    r = r * num / static_cast<std::uint64_t>(i);
  }
  return r;
}

double operator_norm(const Matrix& a, double tol) {
  if (!(tol > 0.0)) throw DomainError("operator_norm: tol must be > 0");
  if (a.size() == 0) return 0.0;
  const Matrix gram = a.transpose() * a;
  if (gram.isZero(0.0)) return 0.0;
  // Fixed pseudo-random start: a deterministic vector with no special alignment.
  RandomStream rng(0x0B5E7A7Eu, 0);
  Vector v(a.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = 1.0 + rng.uniform();
  v.normalize();
  double lambda = 0.0;
  constexpr int kMaxIter = 100000;
  for (int it = 0; it < kMaxIter; ++it) {
    Vector w = gram * v;
    lambda = v.dot(w);
    const double res = (w - lambda * v).norm();
    const double wn = w.norm();
    if (wn == 0.0) {
      // Start vector fell in the null space; restart along the heaviest column.
      Eigen::Index j;
      gram.diagonal().maxCoeff(&j);
      v = gram.col(j).normalized();
      continue;
    }
    if (res <= tol * lambda) break;
    v = w / wn;
  }
  return std::sqrt(std::max(lambda, 0.0));
}

double support_isometry_defect(const Matrix& a, std::span<const int> support) {
  const auto k = static_cast<Eigen::Index>(support.size());
  if (k == 0) return 0.0;
  Matrix sub(a.rows(), k);
  for (Eigen::Index j = 0; j < k; ++j) sub.col(j) = a.col(support[static_cast<std::size_t>(j)]);
  if (k == 1) {
    return std::abs(sub.col(0).squaredNorm() - 1.0);
  }
  const Matrix gram = sub.transpose() * sub;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();  // ascending
  return std::max(ev(k - 1) - 1.0, 1.0 - ev(0));
}

RipReport rip_constant_exact(const Matrix& a, int s, std::uint64_t budget) {
  const auto m = static_cast<int>(a.cols());
  if (s < 1 || s > m) throw DomainError("rip_constant_exact: sparsity must lie in [1, m]");
  const std::uint64_t count = binomial(m, s);
  if (count > budget) {
    throw BudgetError("rip_constant_exact: C(" + std::to_string(m) + "," + std::to_string(s) + ") = " +
                      std::to_string(count) + " supports exceed the budget of " + std::to_string(budget) +
                      "; use bounds");
  }
  RipReport report;
  report.sparsity = s;
  report.method = RipMethod::exact;
  report.delta = 0.0;
  bool first = true;
  for_each_support(m, s, [&](std::span<const int> support) {
    const double d = support_isometry_defect(a, support);
    ++report.supports_examined;
    if (first || d > report.delta) {
      report.delta = d;
      report.extremal_support.assign(support.begin(), support.end());
      first = false;
    }
    return true;
  });
  report.delta = std::max(report.delta, 0.0);
  return report;
}

double mutual_coherence(const Matrix& a) {
  const Eigen::Index m = a.cols();
  Vector norms = a.colwise().norm().transpose();
  double mu = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      const double denom = norms(i) * norms(j);
      if (denom == 0.0) continue;
      mu = std::max(mu, std::abs(a.col(i).dot(a.col(j))) / denom);
    }
  }
  return mu;
}

RipBounds rip_constant_bounds(const Matrix& a, int s, int samples, std::uint64_t seed) {
  const auto m = static_cast<int>(a.cols());
  if (s < 1 || s > m) throw DomainError("rip_constant_bounds: sparsity must lie in [1, m]");
  if (samples < 1) throw DomainError("rip_constant_bounds: samples must be >= 1");

  RipBounds out;
  out.lower.sparsity = s;
  out.lower.method = RipMethod::monte_carlo_lower;
  RandomStream rng(seed, 0);
  for (int i = 0; i < samples; ++i) {
    const std::vector<int> support = rng.subset(m, s);
    const double d = support_isometry_defect(a, support);
    ++out.lower.supports_examined;
    if (i == 0 || d > out.lower.delta) {
      out.lower.delta = d;
      out.lower.extremal_support = support;
    }
  }
  out.lower.delta = std::max(out.lower.delta, 0.0);

  out.upper.sparsity = s;
  out.upper.method = RipMethod::coherence_upper;
  const Eigen::ArrayXd sq = a.colwise().squaredNorm().transpose().array();
  const double norm_defect = (sq - 1.0).abs().maxCoeff();
  constexpr double kUnitNormTol = 1e-12;
  if (norm_defect > kUnitNormTol) {
    out.upper.delta = std::numeric_limits<double>::infinity();
  } else {
    // Gershgorin on the s x s Gram block; the raw inner products and the residual
    // norm defect keep the bound valid under rounding.
    double mu_raw = 0.0;
    for (Eigen::Index i = 0; i < a.cols(); ++i) {
      for (Eigen::Index j = i + 1; j < a.cols(); ++j) mu_raw = std::max(mu_raw, std::abs(a.col(i).dot(a.col(j))));
    }
    out.upper.delta = norm_defect + (s - 1) * mu_raw;
  }
  return out;
}

double disjoint_inner_product_margin(const Matrix& a, const Vector& x, const Vector& xp, double delta) {
  if (x.size() != a.cols() || xp.size() != a.cols()) throw ShapeError("disjoint_inner_product_margin: length mismatch");
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x(i) != 0.0 && xp(i) != 0.0) {
      throw DomainError("disjoint_inner_product_margin: supports overlap at index " + std::to_string(i));
    }
  }
  const double inner = (a * x).dot(a * xp);
  return delta * x.norm() * xp.norm() - std::abs(inner);
}

}  // namespace sparseobs
