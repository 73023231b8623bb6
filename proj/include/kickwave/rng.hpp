#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace kickwave {

// Philox4x32-10 (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3").
// Output is a pure function of (key, counter); no hidden state.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      ctr = single_round(ctr, key);
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static Counter single_round(const Counter& c, const Key& k) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

// SplitMix64 finalizer; used to derive per-replica seeds from a master seed.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t replica_seed(std::uint64_t master, std::uint64_t replica) {
  return splitmix64(master ^ splitmix64(replica + 0x5851F42D4C957F2Dull));
}

// Uniform stream keyed by (seed, time, cell). Regenerating the same triple
// replays the same numbers regardless of what was generated before.
class CellStream {
 public:
  CellStream(std::uint64_t seed, std::int64_t time, std::int64_t cell) {
    if (time < std::numeric_limits<std::int32_t>::min() ||
        time > std::numeric_limits<std::int32_t>::max()) {
      throw std::out_of_range("kickwave: time index outside int32 range");
    }
    key_ = {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    const auto ucell = static_cast<std::uint64_t>(cell);
    ctr_ = {static_cast<std::uint32_t>(ucell), static_cast<std::uint32_t>(ucell >> 32),
            static_cast<std::uint32_t>(static_cast<std::int32_t>(time)), 0u};
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() {
    if (used_ == 4) refill();
    const std::uint32_t a = block_[used_++];
    const std::uint32_t b = block_[used_++];
    return (static_cast<double>(a >> 5) * 67108864.0 + static_cast<double>(b >> 6)) *
           (1.0 / 9007199254740992.0);
  }

 private:
  void refill() {
    block_ = Philox4x32::generate(ctr_, key_);
    ++ctr_[3];
    used_ = 0;
  }

  Philox4x32::Key key_{};
  Philox4x32::Counter ctr_{};
  Philox4x32::Counter block_{};
  int used_ = 4;
};

}  // namespace kickwave
