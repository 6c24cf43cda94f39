#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace recast {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace detail

/// Seeded pseudo-random stream (xoshiro256++). Identical seed gives a
/// bit-identical stream. One instance per thread of execution; parallel
/// work derives independent child streams with split().
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0x2545f4914f6cdd1dULL) : seed_(seed) {
    std::uint64_t sm = seed;
    for (auto& w : state_) w = detail::splitmix64(sm);
  }

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() {
    const std::uint64_t result = detail::rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = detail::rotl(state_[3], 45);
    return result;
  }

  /// Uniform on the open interval (0, 1); never returns an endpoint.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; the second variate of each pair is cached.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double theta = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  double gaussian(double mean, double sd) { return mean + sd * gaussian(); }

  /// Inverse-CDF Cauchy draw: one uniform consumed per variate.
  double cauchy(double delta, double gamma) {
    return delta + gamma * std::tan(std::numbers::pi * (uniform() - 0.5));
  }

  double lognormal(double log_mean, double log_sd) {
    return std::exp(gaussian(log_mean, log_sd));
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Child stream for parallel work: deterministic in (seed, stream index),
  /// independent of how much of the parent stream has been consumed.
  Rng split(std::uint64_t stream) const {
    return Rng(derive_seed(seed_, {0x5eedc0febadd1e5aULL, stream}));
  }

  /// Hash a master seed with a list of domain-separating words. Used to give
  /// every (scenario, replicate) task its own reproducible stream.
  static std::uint64_t derive_seed(std::uint64_t master,
                                   std::initializer_list<std::uint64_t> parts) {
    std::uint64_t h = master;
    for (std::uint64_t p : parts) {
      std::uint64_t s = h ^ (p + 0x9e3779b97f4a7c15ULL);
      h = detail::splitmix64(s);
      h = detail::splitmix64(s);
    }
    return h;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t state_[4];
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace recast
