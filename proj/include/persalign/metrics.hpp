#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "persalign/core.hpp"

namespace persalign {

// Exact W1 between two empirical distributions: the integral of |F_x - F_y|
// over the merged sorted support.
double wasserstein_1d(std::span<const double> x, std::span<const double> y);

// Exact W2 between two 1D empirical distributions via the quantile coupling.
double wasserstein2_1d(std::span<const double> x, std::span<const double> y);

// Averaged monotonic Wasserstein: mean over items of the per-item W1.
double amw(const ResponseMatrix& x, const ResponseMatrix& y);

// Gaussian Frechet distance with unbiased covariances. The cross term uses
// tr((Sx^1/2 Sy Sx^1/2)^1/2), which equals tr((Sx Sy)^1/2) for PSD inputs.
double frechet_distance(const ResponseMatrix& x, const ResponseMatrix& y);

// Unit directions drawn as normalized standard normals from `seed`.
Matrix sphere_directions(Eigen::Index dims, std::size_t count, std::uint64_t seed);

double sliced_wasserstein(const ResponseMatrix& x, const ResponseMatrix& y, std::size_t n_projections,
                          std::uint64_t seed);

// Median of pairwise Euclidean distances over the pooled sample. Pools larger
// than kMedianHeuristicCap points are thinned by even striding within X and Y
// separately, so the value does not depend on argument order.
inline constexpr std::size_t kMedianHeuristicCap = 3000;
double median_heuristic_bandwidth(const ResponseMatrix& x, const ResponseMatrix& y);

struct MmdResult {
  double squared = 0.0;  // biased V-statistic of MMD^2, clamped at 0
  double bandwidth = 0.0;
  double unsquared() const;
};

MmdResult mmd_detailed(const ResponseMatrix& x, const ResponseMatrix& y,
                       std::optional<double> kernel_bandwidth = std::nullopt);

// Squared MMD with Gaussian kernel exp(-|x-y|^2 / (2 sigma^2)).
double mmd(const ResponseMatrix& x, const ResponseMatrix& y,
           std::optional<double> kernel_bandwidth = std::nullopt);

struct CorrelationMatrix {
  // NaN marks entries involving a constant column.
  Eigen::MatrixXd values;
  std::vector<std::size_t> constant_columns;
  bool fully_defined() const { return constant_columns.empty(); }
};

CorrelationMatrix pearson_corr_matrix(const ResponseMatrix& x);

// Mean |rho_x - rho_y| over the strictly upper-triangular item pairs.
double mae_corr(const ResponseMatrix& x, const ResponseMatrix& y);

struct MetricSettings {
  double mmd_bandwidth = 0.0;
  std::size_t sw_projections = 0;
  std::uint64_t sw_seed = 0;
};

struct MetricReport {
  double amw = 0.0;
  double fd = 0.0;
  double sw = 0.0;
  double mmd_squared = 0.0;
  std::optional<double> mae_corr;
  std::size_t n = 0;
  std::size_t m = 0;
  MetricSettings settings;

  double mmd() const;  // unsquared
};

inline constexpr std::size_t kDefaultSwProjections = 512;

MetricReport compute_metric_report(const ResponseMatrix& x, const ResponseMatrix& y,
                                   std::size_t sw_projections = kDefaultSwProjections,
                                   std::uint64_t sw_seed = 0,
                                   std::optional<double> mmd_bandwidth = std::nullopt);

}  // namespace persalign
