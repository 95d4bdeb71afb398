#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace sparseobs {

/// Philox4x32-10 counter-based block cipher (Salmon et al., Random123).
/// Maps a 128-bit counter and 64-bit key to 128 pseudo-random bits.
[[nodiscard]] std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                                         std::array<std::uint32_t, 2> key) noexcept;

/// Deterministic 64-bit mix of (seed, index); used to derive independent child seeds.
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept;

/// Sequential view over a Philox stream identified by (seed, stream id).
/// The i-th draw depends only on (seed, stream, i), never on thread scheduling.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream) noexcept;

  std::uint64_t next_u64() noexcept;
  /// Uniform on [0, 1).
  double uniform() noexcept;
  /// Standard normal via Box-Muller.
  double normal() noexcept;
  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) noexcept;
  /// Uniformly random k-subset of {0..n-1}, sorted ascending.
  std::vector<int> subset(int n, int k);

 private:
  void refill() noexcept;

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int used_ = 4;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace sparseobs
