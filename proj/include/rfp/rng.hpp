#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace rfp {

// Counter-based random streams (Philox 4x32, 10 rounds; Salmon et al.,
// SC 2011).  Every 128-bit output block is a pure function of
// (counter, key), so a path can draw its own numbers without touching any
// other path's stream: parallel and serial sweeps produce identical
// ensembles.
namespace philox {

inline constexpr uint32_t kWeylA = 0x9E3779B9u;
inline constexpr uint32_t kWeylB = 0xBB67AE85u;
inline constexpr uint32_t kMultA = 0xD2511F53u;
inline constexpr uint32_t kMultB = 0xCD9E8D57u;

using Counter = std::array<uint32_t, 4>;
using Key = std::array<uint32_t, 2>;

inline void round_once(Counter& x, const Key& k) {
  const uint64_t p0 = static_cast<uint64_t>(kMultA) * x[0];
  const uint64_t p1 = static_cast<uint64_t>(kMultB) * x[2];
  const uint32_t hi0 = static_cast<uint32_t>(p0 >> 32);
  const uint32_t lo0 = static_cast<uint32_t>(p0);
  const uint32_t hi1 = static_cast<uint32_t>(p1 >> 32);
  const uint32_t lo1 = static_cast<uint32_t>(p1);
  x = {hi1 ^ x[1] ^ k[0], lo1, hi0 ^ x[3] ^ k[1], lo0};
}

inline Counter block10(Counter x, Key k) {
  for (int r = 0; r < 10; ++r) {
    if (r > 0) {
      k[0] += kWeylA;
      k[1] += kWeylB;
    }
    round_once(x, k);
  }
  return x;
}

}  // namespace philox

// One independent stream per (seed, stream id).  The stream id selects the
// path, the running block index walks along it.
class CounterRng {
 public:
  CounterRng(uint64_t seed, uint64_t stream)
      : key_{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)},
        stream_lo_(static_cast<uint32_t>(stream)),
        stream_hi_(static_cast<uint32_t>(stream >> 32)) {}

  // 128 bits for the given block index, independent of call order.
  philox::Counter block(uint64_t n) const {
    return philox::block10({static_cast<uint32_t>(n),
                            static_cast<uint32_t>(n >> 32), stream_lo_,
                            stream_hi_},
                           key_);
  }

  uint64_t next_u64() {
    if (half_) {
      half_ = false;
      return spare_;
    }
    const auto b = block(block_++);
    spare_ = (static_cast<uint64_t>(b[2]) << 32) | b[3];
    half_ = true;
    return (static_cast<uint64_t>(b[0]) << 32) | b[1];
  }

  // Uniform on the open interval (0, 1).
  double next_uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; consumes two uniforms per pair.
  double next_normal() {
    if (have_normal_) {
      have_normal_ = false;
      return spare_normal_;
    }
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_normal_ = r * std::sin(a);
    have_normal_ = true;
    return r * std::cos(a);
  }

 private:
  philox::Key key_;
  uint32_t stream_lo_, stream_hi_;
  uint64_t block_ = 0;
  uint64_t spare_ = 0;
  bool half_ = false;
  double spare_normal_ = 0.0;
  bool have_normal_ = false;
};

}  // namespace rfp
