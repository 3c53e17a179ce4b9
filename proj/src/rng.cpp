#include "brainnet/rng.hpp"

#include <cmath>

namespace brainnet {

namespace {

// splitmix64, the usual seeding/stepping function.
std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed), state_(seed) {
  // Warm up so that small seeds do not produce near-zero first draws.
  splitmix64(state_);
  splitmix64(state_);
}

Rng Rng::stream(std::string_view name) const {
  return Rng(seed_ ^ fnv1a(name));
}

Rng Rng::stream(std::string_view name, std::uint64_t index) const {
  std::uint64_t h = fnv1a(name);
  std::uint64_t mix = h ^ (index + 0x9e3779b97f4a7c15ull);
  splitmix64(mix);
  return Rng(seed_ ^ mix);
}

std::uint64_t Rng::next_u64() { return splitmix64(state_); }

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  // Box-Muller; u1 shifted away from 0 so log stays finite.
  double u1 = uniform();
  double u2 = uniform();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  constexpr double two_pi = 6.283185307179586476925286766559;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

double Rng::normal(double mean, double stddev) {
  return mean + stddev * normal();
}

std::uint64_t Rng::below(std::uint64_t n) {
  // Rejection-free modulo is biased for huge n; all uses here are tiny.
  return next_u64() % n;
}

}  // namespace brainnet
