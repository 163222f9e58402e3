#include "persalign/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

#include "persalign/kde.hpp"
#include "persalign/rng.hpp"
#include "persalign/sampling.hpp"

namespace persalign {

StageSeeds stage_seeds(std::uint64_t seed) {
  return {rng::derive_seed(seed, {0x5046}), rng::derive_seed(seed, {0x4953}), rng::derive_seed(seed, {0x4F54}),
          rng::derive_seed(seed, {0x5253}), rng::derive_seed(seed, {0x5357})};
}

namespace {

class StageTimer {
 public:
  explicit StageTimer(std::map<std::string, double>& sink) : sink_(sink) {}

  template <typename Fn>
  auto run(const char* name, Fn&& fn) {
    auto start = std::chrono::steady_clock::now();
    try {
      if constexpr (std::is_void_v<decltype(fn())>) {
        fn();
        record(name, start);
      } else {
        auto out = fn();
        record(name, start);
        return out;
      }
    } catch (const Error& e) {
      rethrow_with_context(e, std::string("stage ") + name);
    }
  }

 private:
  void record(const char* name, std::chrono::steady_clock::time_point start) {
    sink_[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  std::map<std::string, double>& sink_;
};

WeightSummary summarize(const ImportanceWeights& iw) {
  WeightSummary s;
  std::vector<double> w = iw.weights;
  std::sort(w.begin(), w.end());
  s.min = w.front();
  s.max = w.back();
  std::size_t n = w.size();
  s.median = n % 2 ? w[n / 2] : 0.5 * (w[n / 2 - 1] + w[n / 2]);
  double sum = 0.0, sum_sq = 0.0;
  for (double x : w) {
    sum += x;
    sum_sq += x * x;
  }
  s.effective_sample_size = sum_sq > 0.0 ? sum * sum / sum_sq : 0.0;
  s.clamped_low = iw.clamped_low;
  s.clamped_high = iw.clamped_high;
  return s;
}

}  // namespace

AlignmentResult run_alignment(const ResponseMatrix& pool_responses, const ResponseMatrix& reference,
                              const std::vector<PersonaRecord>& personas, const AlignmentConfig& config) {
  AlignmentResult result;
  AlignmentReport& report = result.report;
  StageTimer timer(report.timings_seconds);
  const StageSeeds seeds = stage_seeds(config.seed);

  // Candidate rows and the ids reported for them.
  std::vector<std::size_t> rows;
  std::vector<std::string> ids;
  ResponseMatrix pool = timer.run("validate", [&] {
    if (reference.dims() != pool_responses.dims()) {
      throw Error(ErrorCode::kDimensionMismatch, "pool has " + std::to_string(pool_responses.dims()) +
                                                     " items, reference has " + std::to_string(reference.dims()));
    }
    if (personas.empty()) {
      rows.resize(pool_responses.size());
      std::iota(rows.begin(), rows.end(), std::size_t{0});
      ids = pool_responses.row_ids();
    } else {
      ValidatedPool vp = validate_pool(personas, pool_responses);
      rows = vp.persona_rows();
      for (const auto& p : vp.personas()) ids.push_back(p.id);
    }
    validate_config(config, rows.size(), static_cast<std::size_t>(pool_responses.dims()));
    if (rows.size() == pool_responses.size() && std::is_sorted(rows.begin(), rows.end())) return pool_responses;
    return pool_responses.select_rows(rows);
  });

  report.config = config;
  report.n_pool = pool.size();
  report.n_reference = reference.size();

  ImportanceWeights iw = timer.run("importance_weights", [&] {
    DensityModel human = fit_kde(reference, config.bandwidth);
    std::optional<DensityModel> persona;
    if (config.persona_fit_subsample > 0 && config.persona_fit_subsample < pool.size()) {
      auto sub = sample_without_replacement(pool.size(), config.persona_fit_subsample, seeds.persona_fit);
      std::sort(sub.begin(), sub.end());
      persona.emplace(fit_kde(pool.select_rows(sub), config.bandwidth));
    } else {
      persona.emplace(fit_kde(pool, config.bandwidth));
    }
    return importance_weights_detailed(human, *persona, pool, config.log_weight_cap);
  });
  report.weights = summarize(iw);

  std::vector<std::size_t> candidates = timer.run("importance_sampling", [&] {
    std::vector<std::size_t> retained = top_fraction(iw.weights, config.retain_fraction);
    report.n_retained = retained.size();
    std::vector<double> w(retained.size());
    for (std::size_t i = 0; i < retained.size(); ++i) w[i] = iw.weights[retained[i]];
    auto draws = multinomial_draw(normalize_weights(w), config.n_is_candidates, seeds.is_draw);
    std::vector<std::size_t> unique(draws.size());
    for (std::size_t i = 0; i < draws.size(); ++i) unique[i] = retained[draws[i]];
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    return unique;
  });
  report.n_candidates_raw = config.n_is_candidates;
  report.n_candidates_dedup = candidates.size();
  ResponseMatrix x = pool.select_rows(candidates);

  BatchedOtResult ot = timer.run("optimal_transport", [&] { return batched_ot_weights_detailed(x, reference, config); });
  report.batches = ot.batches;

  std::vector<std::size_t> final_rows = timer.run("resample", [&] {
    auto picks = resample_ot(ot.weights, config.n_final, seeds.ot_resample);
    std::vector<std::size_t> out(picks.size());
    for (std::size_t i = 0; i < picks.size(); ++i) out[i] = candidates[picks[i]];
    return out;
  });
  report.n_final = final_rows.size();

  result.selected_ids.reserve(final_rows.size());
  std::vector<std::size_t> counts(pool.size(), 0);
  for (std::size_t r : final_rows) {
    result.selected_ids.push_back(ids[r]);
    ++counts[r];
  }
  for (std::size_t r = 0; r < pool.size(); ++r) {
    if (counts[r] > 0) report.selection.push_back({ids[r], counts[r]});
  }

  timer.run("metrics", [&] {
    auto baseline = sample_without_replacement(pool.size(), config.n_final, seeds.random_select);
    std::sort(baseline.begin(), baseline.end());
    ResponseMatrix before = pool.select_rows(baseline);
    ResponseMatrix after = pool.select_rows(final_rows);
    // One MMD bandwidth for both sides keeps the two reports comparable.
    double bw = config.mmd_bandwidth ? *config.mmd_bandwidth : median_heuristic_bandwidth(before, reference);
    report.before = compute_metric_report(before, reference, config.sw_projections, seeds.sw, bw);
    report.after = compute_metric_report(after, reference, config.sw_projections, seeds.sw, bw);
  });
  return result;
}

nlohmann::json report_to_json(const AlignmentReport& r, bool include_timings) {
  using nlohmann::json;
  json batches = json::array();
  for (const auto& b : r.batches) {
    batches.push_back({{"batch", b.batch},
                       {"size", b.size},
                       {"epsilon", b.epsilon},
                       {"iterations", b.iterations},
                       {"converged", b.converged},
                       {"row_residual", b.row_residual},
                       {"col_residual", b.col_residual}});
  }
  json selection = json::array();
  for (const auto& s : r.selection) selection.push_back({{"id", s.id}, {"count", s.count}});
  json j = {{"report_version", kReportVersion},
            {"config", io::config_to_json(r.config)},
            {"sizes",
             {{"n_pool", r.n_pool},
              {"n_reference", r.n_reference},
              {"n_retained", r.n_retained},
              {"n_candidates_raw", r.n_candidates_raw},
              {"n_candidates_dedup", r.n_candidates_dedup},
              {"n_final", r.n_final}}},
            {"importance_weights",
             {{"min", r.weights.min},
              {"median", r.weights.median},
              {"max", r.weights.max},
              {"clamped_low", r.weights.clamped_low},
              {"clamped_high", r.weights.clamped_high},
              {"effective_sample_size", r.weights.effective_sample_size}}},
            {"sinkhorn", batches},
            {"metrics_before", io::metric_report_to_json(r.before)},
            {"metrics_after", io::metric_report_to_json(r.after)},
            {"selection", selection}};
  if (include_timings) j["timings_seconds"] = r.timings_seconds;
  return j;
}

}  // namespace persalign
