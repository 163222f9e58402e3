// persalign command-line tool. Every subcommand reads JSON-lines files, takes
// --seed and --config, and on failure prints one JSON error record to stderr.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "persalign/external.hpp"
#include "persalign/io.hpp"
#include "persalign/metrics.hpp"
#include "persalign/pipeline.hpp"
#include "persalign/responder.hpp"
#include "persalign/retrieval.hpp"
#include "persalign/synthetic.hpp"
#include "persalign/theory.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace persalign;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

void print_error(std::string_view code, const std::string& message) {
  std::cerr << json{{"error", code}, {"message", message}}.dump() << '\n';
}

// Keys consumed by the tool itself; everything else must be an AlignmentConfig field.
struct ToolSettings {
  double timeout_seconds = 30.0;
  int retries = 2;
  std::size_t max_in_flight = 1;
  std::size_t n_hard = 10;
  std::size_t n_random = 10;
};

struct Common {
  std::optional<std::uint64_t> seed;
  std::string config_path;
};

struct LoadedConfig {
  AlignmentConfig alignment;
  ToolSettings tool;
};

LoadedConfig load_settings(const Common& common) {
  LoadedConfig out;
  if (!common.config_path.empty()) {
    json j = json::parse(io::read_file(common.config_path), nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw Error(ErrorCode::kParseError, "config \"" + common.config_path + "\" is not a JSON object");
    }
    auto pop = [&](const char* key, auto& dst) {
      if (auto it = j.find(key); it != j.end()) {
        try {
          dst = it->get<std::remove_reference_t<decltype(dst)>>();
        } catch (const json::exception& e) {
          throw Error(ErrorCode::kSchemaError, std::string("config key \"") + key + "\": " + e.what());
        }
        j.erase(it);
      }
    };
    pop("timeout_seconds", out.tool.timeout_seconds);
    pop("retries", out.tool.retries);
    pop("max_in_flight", out.tool.max_in_flight);
    pop("n_hard", out.tool.n_hard);
    pop("n_random", out.tool.n_random);
    out.alignment = io::config_from_json(j);
  }
  if (common.seed) out.alignment.seed = *common.seed;
  return out;
}

void add_common(CLI::App* app, Common& common) {
  app->add_option("--seed", common.seed, "Master seed (overrides the config file)");
  app->add_option("--config", common.config_path, "Flat JSON config; keys mirror AlignmentConfig")
      ->check(CLI::ExistingFile);
}

// Writes to a file, or stdout when the path is empty or "-".
template <typename Fn>
void emit(const std::string& path, Fn&& fn) {
  if (path.empty() || path == "-") {
    fn(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open \"" + path + "\" for writing");
  fn(out);
  if (!out) throw Error(ErrorCode::kIoError, "write to \"" + path + "\" failed");
}

std::vector<double> parse_vector(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string token;
  while (std::getline(ss, token, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(token, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0) throw Error(ErrorCode::kParseError, "bad number \"" + token + "\" in query vector");
    out.push_back(v);
  }
  if (out.empty()) throw Error(ErrorCode::kParseError, "empty query vector");
  return out;
}

std::unordered_map<std::string, std::string> text_map(const std::vector<QuestionItem>& items) {
  std::unordered_map<std::string, std::string> out;
  for (const auto& it : items) out.emplace(it.id, it.text);
  return out;
}

// ---- align ----------------------------------------------------------------

struct AlignArgs {
  Common common;
  std::string pool, reference, personas, selection_out, report_out = "-", ids_out;
  std::optional<double> bandwidth, retain_fraction, epsilon;
  std::optional<std::size_t> n_candidates, n_final, batch_size, iters;
  bool timings = false;
};

void run_align(const AlignArgs& a) {
  LoadedConfig cfg = load_settings(a.common);
  AlignmentConfig& c = cfg.alignment;
  if (a.bandwidth) c.bandwidth = *a.bandwidth;
  if (a.retain_fraction) c.retain_fraction = *a.retain_fraction;
  if (a.epsilon) c.epsilon = *a.epsilon;
  if (a.n_candidates) c.n_is_candidates = *a.n_candidates;
  if (a.n_final) c.n_final = *a.n_final;
  if (a.batch_size) c.ot_batch_size = *a.batch_size;
  if (a.iters) c.sinkhorn_iters = *a.iters;

  ResponseMatrix pool = io::load_responses(a.pool);
  ResponseMatrix reference = io::load_responses(a.reference);
  std::vector<PersonaRecord> personas;
  if (!a.personas.empty()) personas = io::load_personas(a.personas);

  AlignmentResult result = run_alignment(pool, reference, personas, c);
  if (!a.selection_out.empty()) {
    emit(a.selection_out, [&](std::ostream& out) { io::write_selection(out, result.report.selection); });
  }
  if (!a.ids_out.empty()) {
    emit(a.ids_out, [&](std::ostream& out) {
      for (const auto& id : result.selected_ids) out << id << '\n';
    });
  }
  emit(a.report_out, [&](std::ostream& out) { out << report_to_json(result.report, a.timings).dump(2) << '\n'; });
}

// ---- metrics --------------------------------------------------------------

struct MetricsArgs {
  Common common;
  std::string x, y, out = "-";
};

void run_metrics(const MetricsArgs& a) {
  LoadedConfig cfg = load_settings(a.common);
  ResponseMatrix x = io::load_responses(a.x);
  ResponseMatrix y = io::load_responses(a.y);
  MetricReport r = compute_metric_report(x, y, cfg.alignment.sw_projections, cfg.alignment.seed,
                                         cfg.alignment.mmd_bandwidth);
  emit(a.out, [&](std::ostream& out) { out << io::metric_report_to_json(r).dump(2) << '\n'; });
}

// ---- collect --------------------------------------------------------------

struct CollectArgs {
  Common common;
  std::string personas, items, endpoint, out = "-";
  bool synthetic = false;
  double noise = 0.0;
  std::optional<double> lower, upper;
};

void run_collect(const CollectArgs& a) {
  LoadedConfig cfg = load_settings(a.common);
  auto personas = io::load_personas(a.personas);
  auto items = io::load_items(a.items);
  CollectOptions opts{cfg.tool.retries, cfg.tool.max_in_flight};
  std::unique_ptr<Responder> responder;
  if (a.synthetic) {
    responder = std::make_unique<SyntheticResponder>(a.noise, a.lower, a.upper);
  } else {
    if (a.endpoint.empty()) throw Error(ErrorCode::kInvalidConfig, "collect needs --endpoint or --synthetic");
    // Transport retries live in collect_responses; the client tries once.
    responder = std::make_unique<HttpResponder>(Endpoint{a.endpoint, cfg.tool.timeout_seconds, 0});
  }
  ResponseMatrix m = collect_responses(personas, items, *responder, cfg.alignment.seed, opts);
  emit(a.out, [&](std::ostream& out) { io::write_responses(out, m); });
}

// ---- retrieve -------------------------------------------------------------

struct RetrieveArgs {
  Common common;
  std::string embeddings, query, query_text, embed_endpoint, revise_endpoint, personas, out = "-",
      group_out;
  std::size_t k = 10;
};

void run_retrieve(const RetrieveArgs& a) {
  LoadedConfig cfg = load_settings(a.common);
  io::EmbeddingRecords records = io::load_embeddings(a.embeddings);
  EmbeddingIndex index(records.ids, records.vectors);
  std::vector<double> q;
  if (!a.query.empty()) {
    q = parse_vector(a.query);
  } else if (!a.query_text.empty() && !a.embed_endpoint.empty()) {
    q = fetch_embedding({a.embed_endpoint, cfg.tool.timeout_seconds, cfg.tool.retries}, a.query_text);
  } else {
    throw Error(ErrorCode::kInvalidConfig, "retrieve needs --query or --query-text with --embed-endpoint");
  }
  auto hits = top_k_retrieve(q, index, a.k);
  emit(a.out, [&](std::ostream& out) {
    for (const auto& h : hits) out << json{{"id", h.id}, {"score", h.score}}.dump() << '\n';
  });
  if (!a.revise_endpoint.empty()) {
    if (a.personas.empty() || a.group_out.empty()) {
      throw Error(ErrorCode::kInvalidConfig, "--revise-endpoint needs --personas and --group-out");
    }
    auto personas = io::load_personas(a.personas);
    HttpReviser reviser({a.revise_endpoint, cfg.tool.timeout_seconds, cfg.tool.retries});
    GroupSubset group = group_subset(a.query_text, q, index, personas, a.k, reviser);
    io::save_personas(a.group_out, group.personas);
    for (const auto& w : group.warnings) {
      std::cerr << json{{"warning", "ReviserFailure"}, {"seed_id", w.seed_id}, {"message", w.message}}.dump()
                << '\n';
    }
  }
}

// ---- pairs ----------------------------------------------------------------

struct PairsArgs {
  Common common;
  std::string embeddings, queries, filter_endpoint, query_texts, personas, out = "-";
  std::optional<std::size_t> n_hard, n_random;
};

void run_pairs(const PairsArgs& a) {
  LoadedConfig cfg = load_settings(a.common);
  io::EmbeddingRecords records = io::load_embeddings(a.embeddings);
  EmbeddingIndex index(records.ids, records.vectors);
  auto queries = io::load_queries(a.queries);
  FalseNegativeFilter filter;
  if (!a.filter_endpoint.empty()) {
    if (a.query_texts.empty() || a.personas.empty()) {
      throw Error(ErrorCode::kInvalidConfig, "--filter-endpoint needs --query-texts and --personas");
    }
    std::unordered_map<std::string, std::string> narratives;
    for (const auto& p : io::load_personas(a.personas)) narratives.emplace(p.id, p.narrative);
    filter = HttpFalseNegativeFilter({a.filter_endpoint, cfg.tool.timeout_seconds, cfg.tool.retries},
                                     text_map(io::load_items(a.query_texts)), std::move(narratives));
  }
  TrainingPairSet set = build_training_pairs(index, queries, a.n_hard.value_or(cfg.tool.n_hard),
                                             a.n_random.value_or(cfg.tool.n_random), cfg.alignment.seed, filter);
  emit(a.out, [&](std::ostream& out) { io::write_pairs(out, set.pairs); });
  for (const auto& issue : set.issues) {
    std::cerr << json{{"warning", error_code_name(issue.code)}, {"query_id", issue.query_id},
                      {"message", issue.message}}
                     .dump()
              << '\n';
  }
}

// ---- simulate -------------------------------------------------------------

struct SimulateArgs {
  Common common;
  std::string preset = "shifted-gaussian", out_dir = ".";
  SimulationSize size;
};

void run_simulate(const SimulateArgs& a) {
  LoadedConfig cfg = load_settings(a.common);
  SimulatedData data = simulate(simulation_preset(a.preset), a.size, cfg.alignment.seed);
  fs::create_directories(a.out_dir);
  const fs::path dir(a.out_dir);
  io::save_responses(dir / "pool.jsonl", data.pool);
  io::save_responses(dir / "reference.jsonl", data.reference);
  io::save_personas(dir / "personas.jsonl", data.personas);
  emit((dir / "items.jsonl").string(), [&](std::ostream& out) { io::write_items(out, data.items); });
  std::cout << json{{"pool", (dir / "pool.jsonl").string()},
                    {"reference", (dir / "reference.jsonl").string()},
                    {"personas", (dir / "personas.jsonl").string()},
                    {"items", (dir / "items.jsonl").string()}}
                   .dump()
            << '\n';
}

// ---- sweep ----------------------------------------------------------------

struct SweepArgs {
  Common common;
  SweepOptions options;
  std::string out = "-", table;
  std::optional<double> retain_fraction;
};

void run_sweep(SweepArgs a) {
  LoadedConfig cfg = load_settings(a.common);
  a.options.seed = cfg.alignment.seed;
  a.options.retain_fraction = a.retain_fraction.value_or(cfg.alignment.retain_fraction);
  ConvergenceSweepResult r = convergence_sweep(a.options);
  emit(a.out, [&](std::ostream& out) {
    for (const auto& c : r.cells) {
      out << json{{"n_pool", c.setting.n_pool},
                  {"n_reference", c.setting.n_reference},
                  {"n_candidates", c.setting.n_candidates},
                  {"bandwidth", c.setting.bandwidth},
                  {"retain_fraction", c.setting.retain_fraction},
                  {"w1", c.w1},
                  {"w2", c.w2},
                  {"sw", c.sw},
                  {"median_w1", c.median_w1},
                  {"median_w2", std::isnan(c.median_w2) ? json(nullptr) : json(c.median_w2)},
                  {"median_sw", std::isnan(c.median_sw) ? json(nullptr) : json(c.median_sw)},
                  {"iqr", c.iqr_primary}}
                 .dump()
          << '\n';
    }
    out << json{{"trend_holds", r.trend_holds}}.dump() << '\n';
  });
  if (!a.table.empty()) {
    emit(a.table, [&](std::ostream& out) {
      out << "bandwidth\tn_pool\tmedian_w1\tmedian_w2\tmedian_sw\tiqr\n";
      for (const auto& c : r.cells) {
        out << c.setting.bandwidth << '\t' << c.setting.n_pool << '\t' << c.median_w1 << '\t' << c.median_w2
            << '\t' << c.median_sw << '\t' << c.iqr_primary << '\n';
      }
    });
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Population-level persona alignment: importance sampling followed by optimal transport"};
  app.require_subcommand(1);

  AlignArgs align;
  auto* c_align = app.add_subcommand("align", "Select an aligned persona subset");
  add_common(c_align, align.common);
  c_align->add_option("--pool", align.pool, "Persona response file")->required()->check(CLI::ExistingFile);
  c_align->add_option("--reference", align.reference, "Reference response file")->required()->check(CLI::ExistingFile);
  c_align->add_option("--personas", align.personas, "Persona file (ids reported instead of row ids)")
      ->check(CLI::ExistingFile);
  c_align->add_option("--selection-out", align.selection_out, "Write {id, count} records here");
  c_align->add_option("--ids-out", align.ids_out, "Write the N' selected ids, one per line, here");
  c_align->add_option("--report-out", align.report_out, "Report JSON (default stdout)");
  c_align->add_option("--bandwidth", align.bandwidth);
  c_align->add_option("--retain-fraction", align.retain_fraction);
  c_align->add_option("--epsilon", align.epsilon);
  c_align->add_option("--n-candidates", align.n_candidates);
  c_align->add_option("--n-final", align.n_final);
  c_align->add_option("--ot-batch-size", align.batch_size);
  c_align->add_option("--sinkhorn-iters", align.iters);
  c_align->add_flag("--timings", align.timings, "Include wall-clock timings in the report");

  MetricsArgs metrics;
  auto* c_metrics = app.add_subcommand("metrics", "Compare two response files");
  add_common(c_metrics, metrics.common);
  c_metrics->add_option("x", metrics.x)->required()->check(CLI::ExistingFile);
  c_metrics->add_option("y", metrics.y)->required()->check(CLI::ExistingFile);
  c_metrics->add_option("--out", metrics.out);

  CollectArgs collect;
  auto* c_collect = app.add_subcommand("collect", "Query a responder for every persona x item cell");
  add_common(c_collect, collect.common);
  c_collect->add_option("--personas", collect.personas)->required()->check(CLI::ExistingFile);
  c_collect->add_option("--items", collect.items, "Item file, {id, text} per line")->required()->check(CLI::ExistingFile);
  c_collect->add_option("--endpoint", collect.endpoint, "Responder URL");
  c_collect->add_flag("--synthetic", collect.synthetic, "Use the latent-trait test responder");
  c_collect->add_option("--noise", collect.noise);
  c_collect->add_option("--lower", collect.lower);
  c_collect->add_option("--upper", collect.upper);
  c_collect->add_option("--out", collect.out);

  RetrieveArgs retrieve;
  auto* c_retrieve = app.add_subcommand("retrieve", "Top-k personas by cosine similarity");
  add_common(c_retrieve, retrieve.common);
  c_retrieve->add_option("--embeddings", retrieve.embeddings)->required()->check(CLI::ExistingFile);
  c_retrieve->add_option("--query", retrieve.query, "Comma-separated query vector");
  c_retrieve->add_option("--query-text", retrieve.query_text);
  c_retrieve->add_option("--embed-endpoint", retrieve.embed_endpoint);
  c_retrieve->add_option("--revise-endpoint", retrieve.revise_endpoint);
  c_retrieve->add_option("--personas", retrieve.personas)->check(CLI::ExistingFile);
  c_retrieve->add_option("--group-out", retrieve.group_out);
  c_retrieve->add_option("-k,--k", retrieve.k);
  c_retrieve->add_option("--out", retrieve.out);

  PairsArgs pairs;
  auto* c_pairs = app.add_subcommand("pairs", "Build contrastive training pairs");
  add_common(c_pairs, pairs.common);
  c_pairs->add_option("--embeddings", pairs.embeddings)->required()->check(CLI::ExistingFile);
  c_pairs->add_option("--queries", pairs.queries)->required()->check(CLI::ExistingFile);
  c_pairs->add_option("--n-hard", pairs.n_hard);
  c_pairs->add_option("--n-random", pairs.n_random);
  c_pairs->add_option("--filter-endpoint", pairs.filter_endpoint);
  c_pairs->add_option("--query-texts", pairs.query_texts, "{id, text} per query")->check(CLI::ExistingFile);
  c_pairs->add_option("--personas", pairs.personas)->check(CLI::ExistingFile);
  c_pairs->add_option("--out", pairs.out);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Write a synthetic pool/reference pair");
  add_common(c_sim, sim.common);
  c_sim->add_option("--preset", sim.preset)->check(CLI::IsMember(simulation_preset_names()));
  c_sim->add_option("--dims", sim.size.dims);
  c_sim->add_option("--n-pool", sim.size.n_pool);
  c_sim->add_option("--n-reference", sim.size.n_reference);
  c_sim->add_option("--out-dir", sim.out_dir);

  SweepArgs sweep;
  auto* c_sweep = app.add_subcommand("sweep", "Stage-1 divergence as the pool grows");
  add_common(c_sweep, sweep.common);
  c_sweep->add_option("--preset", sweep.options.preset)->check(CLI::IsMember(simulation_preset_names()));
  c_sweep->add_option("--dims", sweep.options.dims);
  c_sweep->add_option("--n-grid", sweep.options.n_grid)->delimiter(',');
  c_sweep->add_option("--bandwidth-grid", sweep.options.bandwidth_grid)->delimiter(',');
  c_sweep->add_option("--n-reference", sweep.options.n_reference);
  c_sweep->add_option("--n-candidates", sweep.options.n_candidates);
  c_sweep->add_option("--repetitions", sweep.options.repetitions);
  c_sweep->add_option("--retain-fraction", sweep.retain_fraction);
  c_sweep->add_option("--out", sweep.out);
  c_sweep->add_option("--table", sweep.table, "Tab-separated divergence-vs-N table for plotting");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("UsageError", e.what());
    std::cerr << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kExitUsage;
  }

  try {
    if (*c_align) run_align(align);
    else if (*c_metrics) run_metrics(metrics);
    else if (*c_collect) run_collect(collect);
    else if (*c_retrieve) run_retrieve(retrieve);
    else if (*c_pairs) run_pairs(pairs);
    else if (*c_sim) run_simulate(sim);
    else if (*c_sweep) run_sweep(sweep);
  } catch (const Error& e) {
    print_error(error_code_name(e.code()), e.what());
    return kExitFailure;
  } catch (const std::exception& e) {
    print_error("InternalError", e.what());
    return kExitFailure;
  }
  return 0;
}
