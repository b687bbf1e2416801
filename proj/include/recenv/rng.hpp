#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>

#include "recenv/common.hpp"

// Counter-based RNG (Philox4x32-10). Every consumer opens its own stream
// identified by (master seed, purpose, index); streams never share state, so
// trials can run on any thread in any order and still draw identical values.
// One block cipher call yields 128 bits = two uint64 draws.

namespace recenv {

enum class StreamPurpose : std::uint32_t {
  kFieldDraw = 1,   // Gaussian field coefficient draws
  kMcTrial = 2,     // Monte Carlo probability trials
  kSimPath = 3,     // diffusion path increments
  kGeometryMc = 4,  // quadrature node placement in high dimension
};

class PhiloxStream {
 public:
  PhiloxStream(std::uint64_t seed, StreamPurpose purpose, std::uint64_t index = 0)
      : counter_{0U, 0U, static_cast<std::uint32_t>(index),
                 static_cast<std::uint32_t>(index >> 32) ^
                     (static_cast<std::uint32_t>(purpose) << 24)},
        key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

  std::uint64_t next_u64() {
    if (cache_size_ == 0) refill();
    return cache_[--cache_size_];
  }

  // Uniform on (0, 1]: 53 random bits, then shifted into the open-below
  // interval so log(u) is always finite.
  double next_uniform() {
    const double k2n53 = 1.1102230246251565e-16;  // 2^-53
    return (static_cast<double>(next_u64() >> 11) + 1.0) * k2n53;
  }

  // Standard normal via Box-Muller; the second member of each pair is cached.
  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = next_uniform();
    double u2 = next_uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = kTwoPi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  void fill_normals(std::span<double> out) {
    for (double& v : out) v = next_normal();
  }

  // Raw cipher, public so known-answer vectors can be checked directly.
  static std::array<std::uint32_t, 4> encrypt_block(std::array<std::uint32_t, 4> x,
                                                    std::array<std::uint32_t, 2> k) {
    for (int round = 0; round < 10; ++round) {
      if (round != 0) {
        k[0] += kW32A;
        k[1] += kW32B;
      }
      std::uint64_t p0 = static_cast<std::uint64_t>(kM4x32A) * x[0];
      std::uint64_t p1 = static_cast<std::uint64_t>(kM4x32B) * x[2];
      x = {static_cast<std::uint32_t>(p1 >> 32) ^ x[1] ^ k[0],
           static_cast<std::uint32_t>(p1),
           static_cast<std::uint32_t>(p0 >> 32) ^ x[3] ^ k[1],
           static_cast<std::uint32_t>(p0)};
    }
    return x;
  }

 private:
  static constexpr std::uint32_t kW32A = 0x9E3779B9U;
  static constexpr std::uint32_t kW32B = 0xBB67AE85U;
  static constexpr std::uint32_t kM4x32A = 0xD2511F53U;
  static constexpr std::uint32_t kM4x32B = 0xCD9E8D57U;

  void refill() {
    auto out = encrypt_block(counter_, key_);
    cache_[1] = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
    cache_[0] = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
    cache_size_ = 2;
    if (++counter_[0] == 0) ++counter_[1];  // 64-bit draw counter; c2/c3 fixed
  }

  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 2> key_;
  std::array<std::uint64_t, 2> cache_{};
  int cache_size_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace recenv
