#include "persalign/theory.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <cmath>
#include <limits>
#include <thread>

#include "persalign/kde.hpp"
#include "persalign/metrics.hpp"
#include "persalign/rng.hpp"
#include "persalign/sampling.hpp"
#include "persalign/synthetic.hpp"

namespace persalign {

EntropicGap entropic_gap(const CostMatrix& cost, std::span<const double> a, std::span<const double> b,
                         double epsilon) {
  const auto entries = static_cast<std::size_t>(cost.values().size());
  if (entries > kExactOtMaxEntries) {
    throw Error(ErrorCode::kInstanceTooLarge,
                std::to_string(entries) + " cost entries exceed the exact solver limit");
  }
  ExactOtResult exact = exact_ot_small(cost, a, b);
  // Marginal error feeds straight into the cost, so converge far past the
  // pipeline tolerance.
  TransportPlan plan = sinkhorn(cost, a, b, epsilon, {.max_iters = 200'000, .tol = 1e-12});

  EntropicGap g;
  g.entropic_cost = plan.transport_cost(cost);
  g.exact_cost = exact.cost;
  g.gap = g.entropic_cost - g.exact_cost;
  g.bound = epsilon * std::log(static_cast<double>(entries));
  g.tolerance = 1e-6 * cost.max_cost();
  g.iterations = plan.iterations;
  g.converged = plan.converged;
  g.holds = std::abs(g.gap) <= g.bound + g.tolerance && g.gap >= -1e-8;
  return g;
}

double median_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

namespace {

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  double pos = q * static_cast<double>(v.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::vector<double> column(const ResponseMatrix& m, Eigen::Index k) {
  std::vector<double> out(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = m.values()(static_cast<Eigen::Index>(i), k);
  return out;
}

}  // namespace

namespace {

struct SweepSample {
  double w1 = 0.0, w2 = 0.0, sw = 0.0;
};

SweepSample sweep_sample(const SweepOptions& opt, const SimulationPreset& preset, std::size_t hi,
                         std::size_t n, std::size_t rep) {
  const double h = opt.bandwidth_grid[hi];
  ResponseMatrix reference = draw_population(preset.reference, opt.n_reference, opt.dims,
                                              rng::derive_seed(opt.seed, {0x52, rep}), "h");
  ResponseMatrix pool =
      draw_population(preset.pool, n, opt.dims, rng::derive_seed(opt.seed, {0x50, rep, n}), "p");
  DensityModel human = fit_kde(reference, h);
  DensityModel persona = fit_kde(pool, h);
  auto w = importance_weights(human, persona, pool);
  auto retained = top_fraction(w, opt.retain_fraction);
  std::vector<double> kept(retained.size());
  for (std::size_t i = 0; i < retained.size(); ++i) kept[i] = w[retained[i]];
  auto draws = multinomial_draw(normalize_weights(kept), opt.n_candidates,
                                rng::derive_seed(opt.seed, {0x44, rep, n, hi}));
  std::vector<std::size_t> rows(draws.size());
  for (std::size_t i = 0; i < draws.size(); ++i) rows[i] = retained[draws[i]];
  ResponseMatrix resampled = pool.select_rows(rows);

  SweepSample out;
  if (opt.dims == 1) {
    auto xs = column(resampled, 0);
    auto ys = column(reference, 0);
    out.w1 = wasserstein_1d(xs, ys);
    out.w2 = wasserstein2_1d(xs, ys);
  } else {
    out.w1 = amw(resampled, reference);
    out.sw = sliced_wasserstein(resampled, reference, opt.sw_projections,
                                rng::derive_seed(opt.seed, {0x53, rep}));
  }
  return out;
}

}  // namespace

ConvergenceSweepResult convergence_sweep(const SweepOptions& opt) {
  if (opt.repetitions < 3) throw Error(ErrorCode::kInvalidConfig, "sweep needs at least 3 repetitions");
  if (opt.n_grid.empty() || opt.bandwidth_grid.empty()) throw Error(ErrorCode::kInvalidConfig, "empty sweep grid");
  const SimulationPreset preset = simulation_preset(opt.preset);

  // Every (h, N, repetition) sample is seeded on its own, so they run on a
  // worker pool and land in fixed slots.
  const std::size_t n_h = opt.bandwidth_grid.size(), n_n = opt.n_grid.size(), reps = opt.repetitions;
  const std::size_t jobs = n_h * n_n * reps;
  std::vector<SweepSample> samples(jobs);
  std::vector<std::exception_ptr> failures(jobs);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t j = next++; j < jobs; j = next++) {
      const std::size_t hi = j / (n_n * reps), ni = (j / reps) % n_n, rep = j % reps;
      try {
        samples[j] = sweep_sample(opt, preset, hi, opt.n_grid[ni], rep);
      } catch (...) {
        failures[j] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads =
      std::min<std::size_t>(jobs, std::max(1u, std::thread::hardware_concurrency()));
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  ConvergenceSweepResult result;
  result.options = opt;
  result.trend_holds = true;
  for (std::size_t hi = 0; hi < n_h; ++hi) {
    double previous = std::numeric_limits<double>::infinity();
    for (std::size_t ni = 0; ni < n_n; ++ni) {
      SweepCell cell;
      cell.setting = {opt.n_grid[ni], opt.n_reference, opt.n_candidates, opt.bandwidth_grid[hi],
                      opt.retain_fraction};
      for (std::size_t rep = 0; rep < reps; ++rep) {
        const SweepSample& s = samples[(hi * n_n + ni) * reps + rep];
        cell.w1.push_back(s.w1);
        if (opt.dims == 1) {
          cell.w2.push_back(s.w2);
        } else {
          cell.sw.push_back(s.sw);
        }
      }
      cell.median_w1 = median_of(cell.w1);
      cell.median_w2 = median_of(cell.w2);
      cell.median_sw = median_of(cell.sw);
      const auto& primary = opt.dims == 1 ? cell.w1 : cell.sw;
      cell.iqr_primary = quantile(primary, 0.75) - quantile(primary, 0.25);
      const double m = opt.dims == 1 ? cell.median_w1 : cell.median_sw;
      if (m > previous) result.trend_holds = false;
      previous = m;
      result.cells.push_back(std::move(cell));
    }
  }
  return result;
}

}  // namespace persalign
