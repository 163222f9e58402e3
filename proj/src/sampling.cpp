#include "persalign/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "persalign/rng.hpp"

namespace persalign {

namespace {

// Neumaier-compensated sum; the 1e-12 normalization contract needs more than
// naive summation on long, skewed weight vectors.
double stable_sum(std::span<const double> v) {
  double sum = 0.0;
  double comp = 0.0;
  for (double x : v) {
    const double t = sum + x;
    comp += (std::abs(sum) >= std::abs(x)) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  return sum + comp;
}

}  // namespace

SamplingProbabilities::SamplingProbabilities(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw Error(ErrorCode::kEmptyInput, "probability vector is empty");
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    if (!std::isfinite(probs_[i]) || probs_[i] < 0.0) {
      throw Error(ErrorCode::kNonFiniteWeight,
                  "probability " + std::to_string(i) + " is negative or non-finite");
    }
  }
  const double total = stable_sum(probs_);
  if (std::abs(total - 1.0) > 1e-12) {
    throw Error(ErrorCode::kInvalidConfig, "probabilities sum to " + std::to_string(total));
  }
}

SamplingProbabilities normalize_weights(std::span<const double> weights) {
  if (weights.empty()) throw Error(ErrorCode::kEmptyInput, "weight vector is empty");
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!std::isfinite(weights[i])) {
      throw Error(ErrorCode::kNonFiniteWeight, "weight " + std::to_string(i) + " is not finite");
    }
    if (weights[i] < 0.0) {
      throw Error(ErrorCode::kNonFiniteWeight, "weight " + std::to_string(i) + " is negative");
    }
  }
  const double total = stable_sum(weights);
  if (!(total > 0.0)) throw Error(ErrorCode::kAllZeroWeights, "all weights are zero");
  std::vector<double> probs(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) probs[i] = weights[i] / total;
  return SamplingProbabilities(std::move(probs));
}

std::vector<std::size_t> multinomial_draw(const SamplingProbabilities& probs, std::size_t n,
                                          std::uint64_t seed) {
  if (n == 0) throw Error(ErrorCode::kInvalidConfig, "draw count must be >= 1");
  const auto& p = probs.values();
  std::vector<double> cdf(p.size());
  std::partial_sum(p.begin(), p.end(), cdf.begin());
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) last_positive = i;
  }
  const double total = cdf.back();

  rng::Stream stream(seed, 0x4D554C54ULL);
  std::vector<std::size_t> out(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double u = stream.uniform() * total;
    // upper_bound: first cdf strictly greater than u, i.e. ties go up and a
    // zero-probability slot (cdf equal to its predecessor) is never chosen.
    auto idx = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    out[t] = std::min(idx, last_positive);
  }
  return out;
}

std::vector<std::size_t> top_fraction(std::span<const double> weights, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "retain fraction must be in (0, 1]");
  }
  if (weights.empty()) throw Error(ErrorCode::kEmptyInput, "weight vector is empty");
  const auto keep = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(weights.size()) - 1e-9)));
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return weights[a] > weights[b]; });
  order.resize(std::min(keep, order.size()));
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<std::size_t> sample_without_replacement(std::size_t population, std::size_t n,
                                                    std::uint64_t seed) {
  if (n > population) {
    throw Error(ErrorCode::kInvalidConfig, "cannot draw " + std::to_string(n) + " distinct items from " +
                                               std::to_string(population));
  }
  std::vector<std::size_t> idx(population);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  rng::Stream stream(seed, 0x53575230ULL);
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = i + static_cast<std::size_t>(stream.below(population - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  return idx;
}

}  // namespace persalign
