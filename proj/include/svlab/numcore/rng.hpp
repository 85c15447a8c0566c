#pragma once

#include <array>
#include <cstdint>

namespace svlab {

/// xoshiro256** generator.
///
/// Seeding: the 256-bit state is filled with four successive outputs of
/// splitmix64 started at the 64-bit seed. split(id) derives a child whose
/// seed is splitmix64(seed ^ splitmix64(id)); it depends only on the parent
/// seed and the id, never on how much of the parent stream was consumed.
/// Normal variates use the Box-Muller transform (one pair per two uniforms,
/// the second value cached), so streams are identical on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();

  Rng split(std::uint64_t child_id) const;

  bool operator==(const Rng&) const = default;

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> state_{};
  bool has_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace svlab
