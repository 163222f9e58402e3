#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "persalign/error.hpp"

namespace persalign {

// Nonnegative probabilities summing to 1 within 1e-12.
class SamplingProbabilities {
 public:
  // Validates an existing probability vector.
  explicit SamplingProbabilities(std::vector<double> probs);

  const std::vector<double>& values() const noexcept { return probs_; }
  std::size_t size() const noexcept { return probs_.size(); }

 private:
  std::vector<double> probs_;
};

SamplingProbabilities normalize_weights(std::span<const double> weights);

// n categorical draws with replacement by inversion of the cumulative sum.
// A uniform landing exactly on a boundary selects the higher index. Only
// Philox output, one division and comparisons are involved, so the result is
// the same on every IEEE-754 platform.
std::vector<std::size_t> multinomial_draw(const SamplingProbabilities& probs, std::size_t n,
                                          std::uint64_t seed);

// Indices of the ceil(fraction * N) largest weights, returned in ascending
// index order. Ties are resolved towards the lower index.
std::vector<std::size_t> top_fraction(std::span<const double> weights, double fraction);

// n distinct indices from [0, population), uniformly, in draw order.
std::vector<std::size_t> sample_without_replacement(std::size_t population, std::size_t n,
                                                    std::uint64_t seed);

}  // namespace persalign
