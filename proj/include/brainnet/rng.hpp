#pragma once

#include <cstdint>
#include <string_view>

namespace brainnet {

// Deterministic random stream. All randomness in the library flows from one
// root seed; independent components (init, shuffle, data, ...) derive named
// sub-streams so reseeding one does not disturb the others.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Derived stream: same (seed, name) always yields the same stream.
  Rng stream(std::string_view name) const;
  Rng stream(std::string_view name, std::uint64_t index) const;

  std::uint64_t next_u64();

  // Uniform in [0, 1), 53-bit resolution.
  double uniform();
  double uniform(double lo, double hi);

  // Standard normal via Box-Muller (no cached spare, keeps the stream
  // position a pure function of the draw count).
  double normal();
  double normal(double mean, double stddev);

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
};

}  // namespace brainnet
