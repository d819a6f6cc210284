#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace ganaug {

// Counter-based generator: SplitMix64 run in counter mode. The i-th output is
// finalize(seed + i * gamma), so a stream is fully determined by (seed, counter)
// and identical seeds give bit-identical streams on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), counter_(0) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64() {
    ++counter_;
    return finalize(seed_ + counter_ * kGamma);
  }

  // Uniform double in [0, 1), 53-bit resolution.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform double in (0, 1]; safe as a log() argument.
  double next_double_open() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  float next_float() { return static_cast<float>(next_double()); }

  // Unbiased integer in [0, n) by Lemire's multiply-shift with rejection.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) return 0;
    while (true) {
      std::uint64_t x = next_u64();
      unsigned __int128 m = static_cast<unsigned __int128>(x) * n;
      std::uint64_t lo = static_cast<std::uint64_t>(m);
      if (lo >= n || lo >= (-n) % n) return static_cast<std::uint64_t>(m >> 64);
    }
  }

  // Two independent standard normals per call (Box-Muller).
  void normal_pair(float& z0, float& z1) {
    double u1 = next_double_open();
    double u2 = next_double();
    double r = std::sqrt(-2.0 * std::log(u1));
    double t = 2.0 * 3.14159265358979323846 * u2;
    z0 = static_cast<float>(r * std::cos(t));
    z1 = static_cast<float>(r * std::sin(t));
  }

  float normal() {
    float z0, z1;
    normal_pair(z0, z1);
    return z0;
  }

  void fill_normal(float* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 1 < n; i += 2) normal_pair(out[i], out[i + 1]);
    if (i < n) out[i] = normal();
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Independent child stream; distinct ids give decorrelated sequences.
  Rng split(std::uint64_t stream_id) const {
    return Rng(finalize(seed_ ^ finalize(stream_id * kGamma + 0x1F123BB5159A55E5ull)));
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

  static std::uint64_t finalize(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::uint64_t counter_;
};

}  // namespace ganaug
