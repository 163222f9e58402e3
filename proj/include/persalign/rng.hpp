#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>

namespace persalign::rng {

using Counter = std::array<std::uint64_t, 4>;
using Key = std::array<std::uint64_t, 2>;

// Philox4x64-10 block function (Salmon et al., "Parallel random numbers: as
// easy as 1, 2, 3"). Pure and platform-independent; the known-answer vectors
// from the Random123 distribution are checked in tests/test_rng.cpp.
Counter philox4x64(Counter counter, Key key);

// Folds a seed and a list of integer tags into a new 64-bit seed. Used to give
// each pipeline stage, query, or matrix cell its own independent stream.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags);

// Converts the top 53 bits to a double in [0, 1).
inline double to_unit(std::uint64_t x) { return static_cast<double>(x >> 11) * 0x1.0p-53; }

// Sequential stream over a Philox key. Stream (seed, id) and stream
// (seed, id') never overlap for id != id'.
class Stream {
 public:
  explicit Stream(std::uint64_t seed, std::uint64_t stream_id = 0) : key_{seed, stream_id} {}

  std::uint64_t next_u64();
  double uniform() { return to_unit(next_u64()); }
  // Uniform integer in [0, n) by rejection; n must be > 0.
  std::uint64_t below(std::uint64_t n);
  // Standard normal via Box-Muller (cosine branch only).
  double normal();

 private:
  Key key_;
  std::uint64_t block_ = 0;
  Counter buffer_{};
  int used_ = 4;
};

}  // namespace persalign::rng
