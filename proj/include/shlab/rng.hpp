#ifndef SHLAB_RNG_HPP
#define SHLAB_RNG_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace shlab {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t m0 = 0xD2511F53u, m1 = 0xCD9E8D57u;
  constexpr std::uint32_t w0 = 0x9E3779B9u, w1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(m0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(m1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += w0;
    key[1] += w1;
  }
  return ctr;
}

/// Stream of standard normals addressed by (seed, stream_id, position).
/// Two streams with the same seed and stream id produce identical sequences;
/// the position can be set directly, so no state needs to be shared.
class NoiseStream {
public:
  NoiseStream(std::uint64_t seed, std::uint64_t stream_id)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_(stream_id) {}

  double normal() {
    if (cursor_ == 4) refill();
    return buffer_[cursor_++];
  }

  /// Uniform in (0,1) with 32-bit resolution; consumes one block slot.
  double uniform() {
    const auto block = philox4x32(counter(block_++), key_);
    return (static_cast<double>(block[0]) + 0.5) * 0x1p-32;
  }

  std::uint64_t block_position() const { return block_; }
  void seek(std::uint64_t block) {
    block_ = block;
    cursor_ = 4;
  }

private:
  std::array<std::uint32_t, 4> counter(std::uint64_t block) const {
    return {static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
            static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
  }

  void refill() {
    const auto r = philox4x32(counter(block_++), key_);
    for (int pair = 0; pair < 2; ++pair) {
      const double u1 = (static_cast<double>(r[2 * pair]) + 0.5) * 0x1p-32;
      const double u2 = (static_cast<double>(r[2 * pair + 1]) + 0.5) * 0x1p-32;
      const double radius = std::sqrt(-2.0 * std::log(u1));
      const double angle = 2.0 * std::numbers::pi * u2;
      buffer_[2 * pair] = radius * std::cos(angle);
      buffer_[2 * pair + 1] = radius * std::sin(angle);
    }
    cursor_ = 0;
  }

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<double, 4> buffer_{};
  int cursor_ = 4;
};

/// SplitMix64 finaliser; used to derive stream ids from study coordinates.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace shlab

#endif
