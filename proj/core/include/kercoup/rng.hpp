#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace kercoup {

/// Stateless 64-bit finalizer (splitmix64 core). Passes standard statistical
/// batteries when driven by a counter.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Stream roles keep draws at one step independent of how many draws another
/// role consumed, so replicates are reproducible and order-independent.
enum class Role : std::uint64_t {
  kInit = 1,
  kProposalX = 2,
  kProposalY = 3,
  kAccept = 4,
  kMaximalLoop = 5,
  kCoin = 6,
  kNuDraw = 7,
  kResidualX = 8,
  kResidualY = 9,
  kAlgoLoop = 10,
  kMisc = 11,
};

/// Counter-based stream keyed by (seed, replicate, step, role). Two streams
/// with different keys are independent; a given key always replays the same
/// sequence.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t replicate, std::uint64_t step, Role role) {
    std::uint64_t h = mix64(seed + 0x9e3779b97f4a7c15ULL);
    h = mix64(h ^ (0xc2b2ae3d27d4eb4fULL * (replicate + 1)));
    h = mix64(h ^ (0x165667b19e3779f9ULL * (step + 1)));
    h = mix64(h ^ (0xd6e8feb86659fd93ULL * (static_cast<std::uint64_t>(role) + 1)));
    base_ = h;
  }

  std::uint64_t next_u64() { return mix64(base_ + (counter_++) * 0x9e3779b97f4a7c15ULL); }

  /// Uniform on [0, 1) with 53 random bits.
  double next_uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1]; safe to take logs of.
  double next_uniform_pos() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

  /// Standard normal via Box-Muller (two fresh uniforms per call).
  double next_normal() {
    const double u1 = next_uniform_pos();
    const double u2 = next_uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  /// Uniform integer in [0, n) by 128-bit multiply; n must be positive.
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  /// Index drawn from (possibly unnormalized) non-negative weights.
  std::size_t next_index(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = next_uniform() * total;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
      u -= weights[i];
      if (u < 0.0) return i;
    }
    return weights.empty() ? 0 : weights.size() - 1;
  }

 private:
  std::uint64_t base_;
  std::uint64_t counter_ = 0;
};

}  // namespace kercoup
