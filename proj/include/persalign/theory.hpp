#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "persalign/ot.hpp"

namespace persalign {

struct EntropicGap {
  double entropic_cost = 0.0;  // <C, Gamma_eps>
  double exact_cost = 0.0;
  double gap = 0.0;            // entropic - exact, signed
  double bound = 0.0;          // eps * log(N * M)
  double tolerance = 0.0;      // 1e-6 * max(C)
  bool holds = false;          // |gap| <= bound + tolerance and gap >= -1e-8
  std::size_t iterations = 0;
  bool converged = false;
};

// Solves the entropic problem to a tight tolerance and compares it with
// exact_ot_small. Throws InstanceTooLarge past kExactOtMaxEntries.
EntropicGap entropic_gap(const CostMatrix& cost, std::span<const double> a, std::span<const double> b,
                         double epsilon);

struct SweepSetting {
  std::size_t n_pool = 0;
  std::size_t n_reference = 0;
  std::size_t n_candidates = 0;
  double bandwidth = 0.0;
  double retain_fraction = 0.0;
};

struct SweepCell {
  SweepSetting setting;
  // One entry per repetition.
  std::vector<double> w1;
  std::vector<double> w2;   // exact 1D W2 when dims == 1, else empty
  std::vector<double> sw;   // sliced W1 when dims > 1, else empty
  double median_w1 = 0.0;
  double median_w2 = 0.0;
  double median_sw = 0.0;
  double iqr_primary = 0.0;  // spread of the asserted divergence
};

struct SweepOptions {
  std::string preset = "shifted-gaussian";
  std::size_t dims = 1;
  std::vector<std::size_t> n_grid{1'000, 10'000, 100'000};
  std::vector<double> bandwidth_grid{0.2};
  std::size_t n_reference = 5'000;
  std::size_t n_candidates = 10'000;
  double retain_fraction = 0.7;
  std::size_t repetitions = 5;
  std::size_t sw_projections = 128;
  std::uint64_t seed = 0;
};

struct ConvergenceSweepResult {
  SweepOptions options;
  std::vector<SweepCell> cells;  // bandwidth-major, then n_grid order
  // Median of the primary divergence (W1 for d = 1, SW otherwise) is
  // non-increasing along n_grid for every bandwidth.
  bool trend_holds = false;
};

// Stage-1 only: KDE ratio weights, truncation, multinomial draw of
// n_candidates. Each repetition shares its reference draw across the N grid.
ConvergenceSweepResult convergence_sweep(const SweepOptions& options);

// Median of a copy; NaN for empty input.
double median_of(std::vector<double> v);

}  // namespace persalign
