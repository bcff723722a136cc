#pragma once

#include <cstdint>
#include <cmath>

namespace d2epm {

// Deterministic seedable stream (xoshiro256** seeded through splitmix64).
// Distinct stream ids give independent streams; substream() derives further
// independent streams, so a draw can be reproduced from (seed, stream path).
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0) {
    std::uint64_t x = seed ^ (0x9e3779b97f4a7c15ull * (stream_id + 1));
    for (auto& si : s_) si = splitmix64(x);
    // discard a few outputs so nearby seeds decorrelate
    for (int i = 0; i < 8; ++i) next();
  }

  RngStream substream(std::uint64_t a, std::uint64_t b = 0) const {
    std::uint64_t mixed = s_[0];
    mixed ^= splitmix_const(a * 0x632be59bd9b4e019ull + 0x9e3779b97f4a7c15ull);
    mixed ^= splitmix_const(b * 0xd6e8feb86659fd93ull + 0xca01f9dd53c5a1a3ull);
    return RngStream(mixed, a ^ (b << 32));
  }

  std::uint64_t next_u64() { return next(); }

  // uniform on (0,1), never exactly 0 or 1
  double uniform() {
    double u = (next() >> 11) * 0x1.0p-53;
    if (u <= 0.0) return 0x1.0p-53;
    return u;
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    have_spare_ = true;
    return u * f;
  }

  // uniform integer in [0, n)
  std::uint64_t below(std::uint64_t n) {
    std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      std::uint64_t r = next();
      if (r >= threshold) return r % n;
    }
  }

 private:
  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool have_spare_ = false;

  static std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ull;
    return splitmix_const(x);
  }

  static std::uint64_t splitmix_const(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t next() {
    std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }
};

}  // namespace d2epm
