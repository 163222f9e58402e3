#pragma once

#include <json.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "persalign/core.hpp"
#include "persalign/io.hpp"
#include "persalign/metrics.hpp"
#include "persalign/ot.hpp"

namespace persalign {

inline constexpr int kReportVersion = 1;

// Every random stage draws from its own seed derived from config.seed, so the
// stages can be replayed one at a time through the library.
struct StageSeeds {
  std::uint64_t persona_fit = 0;   // subsample for the persona KDE
  std::uint64_t is_draw = 0;       // multinomial draw of N-dagger
  std::uint64_t ot_resample = 0;   // final draw of N'
  std::uint64_t random_select = 0; // baseline subset
  std::uint64_t sw = 0;            // slicing directions for both reports
};

StageSeeds stage_seeds(std::uint64_t seed);

struct WeightSummary {
  double min = 0.0;
  double median = 0.0;
  double max = 0.0;
  std::size_t clamped_low = 0;
  std::size_t clamped_high = 0;
  double effective_sample_size = 0.0;
};

struct AlignmentReport {
  AlignmentConfig config;
  std::size_t n_pool = 0;
  std::size_t n_reference = 0;
  std::size_t n_retained = 0;
  std::size_t n_candidates_raw = 0;
  std::size_t n_candidates_dedup = 0;
  std::size_t n_final = 0;
  WeightSummary weights;
  std::vector<BatchDiagnostics> batches;
  // "before" is a RandomSelect subset of size N' drawn without replacement.
  MetricReport before;
  MetricReport after;
  // Ascending pool order; counts sum to n_final.
  std::vector<io::SelectionEntry> selection;
  std::map<std::string, double> timings_seconds;
};

struct AlignmentResult {
  // Persona ids of the N' draws in draw order.
  std::vector<std::string> selected_ids;
  AlignmentReport report;
};

// Pool rows are the candidates. With personas given, candidate i is the
// persona's response row (see ValidatedPool::persona_rows) and the persona id
// is reported; without personas the response row ids are used.
AlignmentResult run_alignment(const ResponseMatrix& pool, const ResponseMatrix& reference,
                              const std::vector<PersonaRecord>& personas, const AlignmentConfig& config);

// Timings are wall-clock and therefore left out unless asked for; the default
// document is byte-stable for fixed inputs.
nlohmann::json report_to_json(const AlignmentReport& report, bool include_timings = false);

}  // namespace persalign
