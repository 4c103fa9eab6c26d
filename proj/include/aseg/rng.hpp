#pragma once

#include <cstdint>
#include <random>

namespace aseg {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Addressed random streams: every (iteration, round, slot, node) tuple maps to
/// its own generator, so results never depend on evaluation order.
class RngPolicy {
 public:
  explicit RngPolicy(std::uint64_t master_seed = 0) : master_(master_seed) {}

  std::uint64_t master_seed() const noexcept { return master_; }

  Rng stream(std::uint64_t iteration, std::uint64_t round, std::uint64_t slot,
             std::uint64_t node) const {
    std::uint64_t h = splitmix64(master_);
    h = splitmix64(h ^ iteration);
    h = splitmix64(h ^ (round + 0x100));
    h = splitmix64(h ^ (slot + 0x10000));
    h = splitmix64(h ^ (node + 0x1000000));
    return Rng(h);
  }

  /// Stream for purposes outside the per-iteration layout (solver, init, ...).
  Rng named(std::uint64_t tag, std::uint64_t index = 0) const {
    return stream(~0ULL - tag, 0xFFFF, index, 0);
  }

 private:
  std::uint64_t master_;
};

}  // namespace aseg
