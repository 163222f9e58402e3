#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "persalign/io.hpp"
#include "persalign/kde.hpp"
#include "persalign/metrics.hpp"
#include "persalign/ot.hpp"
#include "persalign/pipeline.hpp"
#include "persalign/retrieval.hpp"
#include "persalign/theory.hpp"

namespace py = pybind11;
using namespace persalign;

namespace {

ResponseMatrix responses(const Matrix& values, std::vector<std::string> row_ids = {}) {
  return ResponseMatrix(values, {}, std::move(row_ids));
}

AlignmentConfig parse_config(const std::string& config_json) {
  return config_json.empty() ? AlignmentConfig{} : io::config_from_json(nlohmann::json::parse(config_json));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Population-level persona alignment: importance sampling followed by optimal transport";

  static py::exception<Error> error_type(m, "PersalignError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object instance = py::handle(error_type.ptr())(py::str(e.what()));
      instance.attr("code") = py::str(std::string(error_code_name(e.code())));
      PyErr_SetObject(error_type.ptr(), instance.ptr());
    }
  });

  m.def(
      "align",
      [](const Matrix& pool, const Matrix& reference, std::vector<std::string> ids, const std::string& config_json,
         bool include_timings) {
        AlignmentConfig config = parse_config(config_json);
        AlignmentResult r;
        {
          py::gil_scoped_release release;
          r = run_alignment(responses(pool, std::move(ids)), responses(reference), {}, config);
        }
        return py::make_tuple(r.selected_ids, report_to_json(r.report, include_timings).dump());
      },
      py::arg("pool"), py::arg("reference"), py::arg("ids") = std::vector<std::string>{},
      py::arg("config_json") = "", py::arg("include_timings") = false);

  m.def("default_config_json", [] { return io::config_to_json(AlignmentConfig{}).dump(); });

  m.def(
      "importance_weights",
      [](const Matrix& reference, const Matrix& pool, double bandwidth, double log_cap) {
        DensityModel human = fit_kde(responses(reference), bandwidth);
        DensityModel persona = fit_kde(responses(pool), bandwidth);
        return importance_weights(human, persona, responses(pool), log_cap);
      },
      py::arg("reference"), py::arg("pool"), py::arg("bandwidth") = 0.2, py::arg("log_cap") = kDefaultLogWeightCap);

  m.def(
      "cost_matrix",
      [](const Matrix& x, const Matrix& y, std::optional<std::vector<double>> weights) {
        std::optional<ItemWeights> w;
        if (weights) w = ItemWeights(*weights);
        return cost_matrix(responses(x), responses(y), w).values();
      },
      py::arg("x"), py::arg("y"), py::arg("item_weights") = std::nullopt);

  m.def(
      "sinkhorn",
      [](const Matrix& cost, std::vector<double> a, std::vector<double> b, double epsilon, std::size_t max_iters,
         double tol) {
        TransportPlan p = sinkhorn(CostMatrix(cost), a, b, epsilon, {max_iters, tol});
        py::dict out;
        out["gamma"] = p.gamma;
        out["converged"] = p.converged;
        out["iterations"] = p.iterations;
        out["row_residual"] = p.row_residual;
        out["col_residual"] = p.col_residual;
        return out;
      },
      py::arg("cost"), py::arg("a") = std::vector<double>{}, py::arg("b") = std::vector<double>{},
      py::arg("epsilon"), py::arg("max_iters") = 250, py::arg("tol") = 1e-6);

  m.def(
      "exact_ot",
      [](const Matrix& cost, std::vector<double> a, std::vector<double> b) {
        ExactOtResult r = exact_ot_small(CostMatrix(cost), a, b);
        return py::make_tuple(r.cost, r.plan);
      },
      py::arg("cost"), py::arg("a"), py::arg("b"));

  m.def(
      "entropic_gap",
      [](const Matrix& cost, std::vector<double> a, std::vector<double> b, double epsilon) {
        EntropicGap g = entropic_gap(CostMatrix(cost), a, b, epsilon);
        py::dict out;
        out["entropic_cost"] = g.entropic_cost;
        out["exact_cost"] = g.exact_cost;
        out["gap"] = g.gap;
        out["bound"] = g.bound;
        out["holds"] = g.holds;
        return out;
      },
      py::arg("cost"), py::arg("a"), py::arg("b"), py::arg("epsilon"));

  m.def("amw", [](const Matrix& x, const Matrix& y) { return amw(responses(x), responses(y)); });
  m.def("frechet_distance",
        [](const Matrix& x, const Matrix& y) { return frechet_distance(responses(x), responses(y)); });
  m.def(
      "sliced_wasserstein",
      [](const Matrix& x, const Matrix& y, std::size_t n_projections, std::uint64_t seed) {
        return sliced_wasserstein(responses(x), responses(y), n_projections, seed);
      },
      py::arg("x"), py::arg("y"), py::arg("n_projections") = kDefaultSwProjections, py::arg("seed") = 0);
  m.def(
      "mmd_squared",
      [](const Matrix& x, const Matrix& y, std::optional<double> bandwidth) {
        return mmd(responses(x), responses(y), bandwidth);
      },
      py::arg("x"), py::arg("y"), py::arg("bandwidth") = std::nullopt);
  m.def("mae_corr", [](const Matrix& x, const Matrix& y) { return mae_corr(responses(x), responses(y)); });
  m.def(
      "metric_report",
      [](const Matrix& x, const Matrix& y, std::size_t sw_projections, std::uint64_t seed,
         std::optional<double> mmd_bandwidth) {
        return io::metric_report_to_json(
                   compute_metric_report(responses(x), responses(y), sw_projections, seed, mmd_bandwidth))
            .dump();
      },
      py::arg("x"), py::arg("y"), py::arg("sw_projections") = kDefaultSwProjections, py::arg("seed") = 0,
      py::arg("mmd_bandwidth") = std::nullopt);

  m.def("cosine_similarity", [](std::vector<double> a, std::vector<double> b) { return cosine_similarity(a, b); });
  m.def(
      "top_k",
      [](std::vector<double> query, std::vector<std::string> ids, const std::vector<std::vector<double>>& vectors,
         std::size_t k) {
        EmbeddingIndex index(std::move(ids), vectors);
        std::vector<std::pair<std::string, double>> out;
        for (const auto& s : top_k_retrieve(query, index, k)) out.emplace_back(s.id, s.score);
        return out;
      },
      py::arg("query"), py::arg("ids"), py::arg("vectors"), py::arg("k"));
  m.def(
      "contrastive_loss",
      [](std::vector<double> query, std::vector<double> positive, const std::vector<std::vector<double>>& negatives,
         double temperature) { return contrastive_loss(query, positive, negatives, temperature); },
      py::arg("query"), py::arg("positive"), py::arg("negatives"), py::arg("temperature") = 1.0);
}
