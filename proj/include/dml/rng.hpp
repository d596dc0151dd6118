#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace dml::rng {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Derive the state of an independent substream from (seed, stream id).
inline std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t s = seed;
  std::uint64_t a = splitmix64(s);
  s = stream ^ 0xD2B74407B1CE6E93ull;
  std::uint64_t b = splitmix64(s);
  s = a ^ (b + 0x9E3779B97F4A7C15ull + (a << 6) + (a >> 2));
  return splitmix64(s);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

// Seed of a named substream hanging off a root seed ("sim.test", "net.init", ...).
inline std::uint64_t label_seed(std::uint64_t root, std::string_view label) {
  return mix(root, fnv1a(label));
}

// Sequential generator over one (seed, stream) substream. Each Monte Carlo
// path owns its stream, so generation order across paths cannot change the
// draws and parallel runs reproduce serial runs bit for bit.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t stream) : state_(mix(seed, stream)) {}

  // uniform on (0,1), open at both ends
  double uniform() { return (static_cast<double>(splitmix64(state_) >> 11) + 0.5) * 0x1.0p-53; }

  // standard normal via Box-Muller; the second value of each pair is cached
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  // uniform integer in [0, n)
  std::uint64_t below(std::uint64_t n) {
    const double u = uniform();
    auto k = static_cast<std::uint64_t>(u * static_cast<double>(n));
    return k < n ? k : n - 1;
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace dml::rng
