#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "condlab/numerics.hpp"

namespace condlab {

// Counter-based splittable stream: draw j of stream k is
// mix64(base_k + j * GOLDEN) where base_k itself mixes (master seed, k).
// Streams are independent of how many draws other streams made, and every
// draw is a pure function of (seed, stream, counter), so runs are
// bit-for-bit reproducible on a given platform.
class RngStream {
 public:
  RngStream(u64 master_seed, u64 stream_index)
      : base_(mix64(mix64(master_seed + kGolden) + stream_index)), counter_(0) {}

  u64 next_u64() { return mix64(base_ + (counter_++) * kGolden); }

  // Uniform on [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on {0, ..., n-1}; rejection keeps it exactly unbiased.
  u64 next_below(u64 n) {
    if (n == 0) throw std::domain_error("RngStream::next_below: n == 0");
    u64 limit = ~u64{0} - ~u64{0} % n;
    u64 v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

  double next_exponential(double rate) {
    if (!(rate > 0.0)) throw std::domain_error("RngStream::next_exponential: rate <= 0");
    double u = next_double();
    return -std::log1p(-u) / rate;
  }

 private:
  static constexpr u64 kGolden = 0x9E3779B97F4A7C15ull;

  static u64 mix64(u64 z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
  }

  u64 base_;
  u64 counter_;
};

}  // namespace condlab
