#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace sgltn {

// Splittable counter-free PRNG built on SplitMix64. Every consumer owns its
// generator and derives independent substreams with split(); there is no
// global state anywhere in the library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(mix(seed ^ kGolden)) {}

  std::uint64_t next_u64() {
    state_ += kGolden;
    return mix(state_);
  }

  // uniform in [0, 1)
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // uniform integer in [0, n), n > 0
  int uniform_int(int n) { return int(next_u64() % std::uint64_t(n)); }

  // standard normal via Box-Muller (one sample per call, no cached state)
  double normal() {
    double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  // Independent substream, a pure function of (current state, stream id).
  Rng split(std::uint64_t stream) const {
    Rng r(0);
    r.state_ = mix(state_ ^ mix(stream + kGolden));
    return r;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int i = int(v.size()) - 1; i > 0; --i) {
      int j = uniform_int(i + 1);
      std::swap(v[std::size_t(i)], v[std::size_t(j)]);
    }
  }

 private:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;
  static constexpr double kPi = 3.14159265358979323846;

  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t state_;
};

}  // namespace sgltn
