#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include "sparseobs/model.hpp"

namespace sparseobs {

enum class RipMethod { exact, monte_carlo_lower, coherence_upper };

[[nodiscard]] std::string_view to_string(RipMethod method) noexcept;

/// Restricted isometry constant delta_s of a matrix, with provenance.
struct RipReport {
  int sparsity = 0;
  double delta = 0.0;
  RipMethod method = RipMethod::exact;
  std::uint64_t supports_examined = 0;
  /// Support attaining delta (exact and monte-carlo methods); empty otherwise.
  std::vector<int> extremal_support;
};

struct RipBounds {
  RipReport lower;
  RipReport upper;
};

inline constexpr std::uint64_t kDefaultRipBudget = 2'000'000;

/// C(n, k), saturating at UINT64_MAX.
[[nodiscard]] std::uint64_t binomial(int n, int k) noexcept;

/// Largest singular value by power iteration on A^T A from a fixed start vector.
/// Stops once the eigen-residual ||A^T A v - lambda v|| falls below tol * lambda.
[[nodiscard]] double operator_norm(const Matrix& a, double tol = 1e-12);

/// max(sigma_max(A_S)^2 - 1, 1 - sigma_min(A_S)^2) for one column support S.
[[nodiscard]] double support_isometry_defect(const Matrix& a, std::span<const int> support);

/// Exact delta_s by enumerating all C(m, s) supports in lexicographic order.
/// Throws BudgetError when C(m, s) > budget.
[[nodiscard]] RipReport rip_constant_exact(const Matrix& a, int s, std::uint64_t budget = kDefaultRipBudget);

/// Monte-Carlo lower bound over `samples` random supports, and the coherence
/// upper bound (s-1) mu, which is only valid (finite) when columns have unit norm.
[[nodiscard]] RipBounds rip_constant_bounds(const Matrix& a, int s, int samples, std::uint64_t seed);

/// Mutual coherence of the column-normalized matrix.
[[nodiscard]] double mutual_coherence(const Matrix& a);

/// delta * ||x|| * ||xp|| - |<Ax, Axp>|; nonnegative whenever delta >= delta_{s+s'}.
/// Throws DomainError when the supports overlap.
[[nodiscard]] double disjoint_inner_product_margin(const Matrix& a, const Vector& x, const Vector& xp,
                                                   double delta);

/// Visits every k-subset of {0..n-1} in lexicographic order; stops early if visit returns false.
template <typename Visit>
void for_each_support(int n, int k, Visit&& visit) {
  if (k < 0 || k > n) return;
  std::vector<int> idx(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i;
  while (true) {
    if (!visit(std::span<const int>(idx))) return;
    int i = k - 1;
    while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - k + i) --i;
    if (i < 0) return;
    ++idx[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < k; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
  }
}

}  // namespace sparseobs
