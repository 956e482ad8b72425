#pragma once

#include <cstdint>

namespace a2amkt {

// Counter-based random draws: every value is a hash of (seed, stream,
// counter), so a draw for agent i at step t does not depend on how many
// draws happened elsewhere.  This is what makes simulation output
// independent of scheduling and worker count.
namespace rng {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

inline std::uint64_t mix(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebull;
  x ^= x >> 31;
  return x;
}

inline std::uint64_t hash(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
  std::uint64_t h = mix(seed + kGolden);
  h = mix(h ^ (stream * kGolden));
  return mix(h ^ (counter * kGolden));
}

// 53-bit mantissa draw in [0,1)
inline double to_unit(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

inline double uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
  return to_unit(hash(seed, stream, counter));
}

}  // namespace rng

// Sequential generator for loops that need an unbounded number of draws from
// one logical stream (shuffles, rejection sampling).  Seeded through the same
// hash family as the counter draws.
class SeqRng {
 public:
  explicit SeqRng(std::uint64_t seed) : state_(rng::mix(seed + rng::kGolden)) {}
  SeqRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter)
      : state_(rng::hash(seed, stream, counter)) {}

  std::uint64_t next() {
    state_ += rng::kGolden;
    return rng::mix(state_);
  }

  double uniform() { return rng::to_unit(next()); }

  // uniform integer in [0, n); n > 0
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next()) * n) >> 64);
  }

 private:
  std::uint64_t state_;
};

}  // namespace a2amkt
