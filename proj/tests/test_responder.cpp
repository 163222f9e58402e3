#include <doctest.h>

#include <atomic>

#include "persalign/responder.hpp"
#include "persalign/synthetic.hpp"
#include "support.hpp"

using namespace persalign;

namespace {

class FailingResponder final : public Responder {
 public:
  FailingResponder(std::string persona, std::string item) : persona_(std::move(persona)), item_(std::move(item)) {}
  double respond(std::string_view persona, std::string_view item, std::uint64_t seed) const override {
    ++calls;
    if (persona == persona_ && item == item_) throw std::runtime_error("model refused");
    return static_cast<double>(seed % 7);
  }
  mutable std::atomic<int> calls{0};

 private:
  std::string persona_, item_;
};

// Fails the first `failures` calls per cell.
class FlakyResponder final : public Responder {
 public:
  explicit FlakyResponder(int failures) : failures_(failures) {}
  double respond(std::string_view, std::string_view, std::uint64_t) const override {
    if (attempts_++ % (failures_ + 1) < failures_) throw std::runtime_error("timeout");
    return 1.0;
  }

 private:
  int failures_;
  mutable std::atomic<int> attempts_{0};
};

std::vector<PersonaRecord> trait_personas(testing::Gen& gen, std::size_t n, std::size_t t,
                                          std::vector<std::vector<double>>& thetas) {
  std::vector<PersonaRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    thetas.push_back(gen.normals(t));
    out.push_back({"p" + std::to_string(i), "A persona. " + SyntheticResponder::encode_theta(thetas.back()), {}, {}, {}});
  }
  return out;
}

}  // namespace

TEST_SUITE("responder") {

TEST_CASE("synthetic responder reproduces the loading table") {
  testing::Gen gen(100);
  const std::size_t n = 12, t = 3, d = 5;
  std::vector<std::vector<double>> thetas;
  auto personas = trait_personas(gen, n, t, thetas);
  std::vector<QuestionItem> items;
  std::vector<std::vector<double>> loadings;
  std::vector<double> biases;
  for (std::size_t k = 0; k < d; ++k) {
    loadings.push_back(gen.normals(t));
    biases.push_back(gen.normal());
    items.push_back({"item" + std::to_string(k), "Statement. " + SyntheticResponder::encode_item(loadings[k], biases[k])});
  }
  ResponseMatrix m = collect_responses(personas, items, SyntheticResponder(), 5);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      double expect = biases[k];
      for (std::size_t j = 0; j < t; ++j) expect += thetas[i][j] * loadings[k][j];
      CHECK(m.values()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) == expect);
    }
  }
  CHECK(m.row_ids()[3] == "p3");
  CHECK(m.item_ids()[4] == "item4");
}

TEST_CASE("noise and clipping") {
  SyntheticResponder noisy(0.5, -1.0, 1.0);
  std::string persona = SyntheticResponder::encode_theta({0.2});
  std::string item = SyntheticResponder::encode_item({1.0}, 0.0);
  double a = noisy.respond(persona, item, 1);
  CHECK(a == noisy.respond(persona, item, 1));
  CHECK(a != noisy.respond(persona, item, 2));
  for (std::uint64_t s = 0; s < 200; ++s) {
    double v = noisy.respond(persona, item, s);
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
  CHECK_THROWS(SyntheticResponder().respond("no traits here", item, 0));
  CHECK_THROWS(SyntheticResponder().respond(SyntheticResponder::encode_theta({1, 2}), item, 0));
}

TEST_CASE("collection is deterministic and order free") {
  testing::Gen gen(101);
  std::vector<std::vector<double>> thetas;
  auto personas = trait_personas(gen, 20, 2, thetas);
  std::vector<QuestionItem> items{{"a", SyntheticResponder::encode_item({1, 0}, 0)},
                                  {"b", SyntheticResponder::encode_item({0.5, 0.5}, 1)}};
  SyntheticResponder r(0.3);
  auto first = collect_responses(personas, items, r, 9);
  auto second = collect_responses(personas, items, r, 9);
  CHECK(first.values() == second.values());
  auto parallel = collect_responses(personas, items, r, 9, {0, 4});
  CHECK(parallel.values() == first.values());
  // Recomputing a subset of cells reproduces the full run.
  std::vector<PersonaRecord> subset{personas[7]};
  std::vector<QuestionItem> one_item{items[1]};
  double cell = r.respond(subset[0].narrative, one_item[0].text, cell_seed(9, 7, 1));
  CHECK(cell == first.values()(7, 1));
}

TEST_CASE("failing cells abort with coordinates") {
  std::vector<PersonaRecord> personas;
  for (int i = 0; i < 4; ++i) personas.push_back({"p" + std::to_string(i), "n" + std::to_string(i), {}, {}, {}});
  std::vector<QuestionItem> items;
  for (int k = 0; k < 7; ++k) items.push_back({"i" + std::to_string(k), "t" + std::to_string(k)});
  FailingResponder bad("n2", "t5");
  try {
    collect_responses(personas, items, bad, 0);
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kResponderFailure);
    CHECK(std::string(e.what()).find("ResponderFailure(2, 5)") != std::string::npos);
  }
  CHECK(bad.calls.load() == 2 * 7 + 6);
  FailingResponder bad_parallel("n2", "t5");
  CHECK_ERROR_CODE(collect_responses(personas, items, bad_parallel, 0, {1, 3}), ErrorCode::kResponderFailure);
}

TEST_CASE("retries recover transient failures") {
  std::vector<PersonaRecord> personas{{"p", "n", {}, {}, {}}};
  std::vector<QuestionItem> items{{"i", "t"}, {"j", "u"}};
  CHECK_ERROR_CODE(collect_responses(personas, items, FlakyResponder(2), 0, {1, 1}), ErrorCode::kResponderFailure);
  auto m = collect_responses(personas, items, FlakyResponder(2), 0, {2, 1});
  CHECK(m.values()(0, 1) == 1.0);
}

TEST_CASE("simulation presets") {
  for (const auto& name : simulation_preset_names()) {
    auto data = simulate(simulation_preset(name), {3, 400, 300}, 4);
    CHECK(data.pool.size() == 400);
    CHECK(data.reference.size() == 300);
    CHECK(data.pool.dims() == 3);
    CHECK(data.personas.size() == 400);
    CHECK(data.personas[5].response_row == std::optional<std::size_t>{5});
  }
  CHECK_ERROR_CODE(simulation_preset("nope"), ErrorCode::kInvalidConfig);

  auto shifted = simulate(simulation_preset("shifted-gaussian"), {2, 20000, 20000}, 1);
  Eigen::RowVectorXd pool_mean = shifted.pool.values().colwise().mean();
  Eigen::RowVectorXd ref_mean = shifted.reference.values().colwise().mean();
  CHECK(std::abs(pool_mean(0) - 1.0) < 0.05);
  CHECK(std::abs(ref_mean(1)) < 0.05);

  auto again = simulate(simulation_preset("shifted-gaussian"), {2, 20000, 20000}, 1);
  CHECK(again.pool.values() == shifted.pool.values());
}

}
