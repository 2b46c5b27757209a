#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace tqa {

namespace detail {

// SplitMix64 step; used for state expansion and stream derivation.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix64(std::uint64_t x) {
  return splitmix64_next(x);
}

inline std::uint64_t rotl64(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace detail

// xoshiro256++ generator, seeded through SplitMix64.
//
// A generator is identified by (seed, stream). split(key) derives a child
// whose stream id mixes `key` into the parent stream, so a tree of parallel
// streams (chains, languages, bootstrap workers) is reproducible from one
// seed. Not cryptographic.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream) {
    std::uint64_t sm = seed ^ detail::mix64(stream + 0x1d8af066a44b634fULL);
    for (auto& word : state_) word = detail::splitmix64_next(sm);
    // xoshiro state must not be all zero
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
  }

  std::uint64_t next_u64() {
    const std::uint64_t result =
        detail::rotl64(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = detail::rotl64(state_[3], 45);
    return result;
  }

  // Uniform in the open interval (0, 1); never returns 0 or 1, so the
  // result is always safe inside log().
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Multiply-shift; the modulo bias is below
  // n / 2^64 and irrelevant at the sizes used here.
  std::uint64_t uniform_index(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Derive an independent child stream. Children of distinct keys, and
  // children of distinct parents, use distinct streams.
  Rng split(std::uint64_t key) const {
    return Rng(seed_, detail::mix64(stream_ * 0x9e3779b97f4a7c15ULL + key + 1));
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  static constexpr std::string_view algorithm() {
    return "xoshiro256++ (SplitMix64 seeding, hashed stream splitting)";
  }

 private:
  std::array<std::uint64_t, 4> state_;
  std::uint64_t seed_;
  std::uint64_t stream_;
};

}  // namespace tqa
