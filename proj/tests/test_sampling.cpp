#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "persalign/sampling.hpp"
#include "support.hpp"

using namespace persalign;
using doctest::Approx;

TEST_SUITE("sampling") {

TEST_CASE("normalize_weights") {
  std::vector<double> four{1, 1, 1, 1};
  CHECK(normalize_weights(four).values() == std::vector<double>{0.25, 0.25, 0.25, 0.25});
  std::vector<double> two{3, 1};
  CHECK(normalize_weights(two).values() == std::vector<double>{0.75, 0.25});
  std::vector<double> zeros{0, 0};
  CHECK_ERROR_CODE(normalize_weights(zeros), ErrorCode::kAllZeroWeights);
  std::vector<double> inf{1, std::numeric_limits<double>::infinity()};
  CHECK_ERROR_CODE(normalize_weights(inf), ErrorCode::kNonFiniteWeight);
  std::vector<double> neg{1, -1};
  CHECK_ERROR_CODE(normalize_weights(neg), ErrorCode::kNonFiniteWeight);
  std::vector<double> none;
  CHECK_ERROR_CODE(normalize_weights(none), ErrorCode::kEmptyInput);
}

TEST_CASE("normalized sums stay within 1e-12") {
  testing::Gen gen(20);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> w(gen.size(1, 2000));
    for (auto& x : w) x = std::exp(gen.uniform(-60, 60));
    auto p = normalize_weights(w);
    double s = 0.0, c = 0.0;
    for (double v : p.values()) {  // Kahan sum so the check itself is accurate
      double y = v - c, t = s + y;
      c = (t - s) - y;
      s = t;
    }
    CHECK(std::abs(s - 1.0) <= 1e-12);
  }
  CHECK_ERROR_CODE(SamplingProbabilities({0.5, 0.6}), ErrorCode::kInvalidConfig);
}

TEST_CASE("degenerate distributions") {
  CHECK(multinomial_draw(SamplingProbabilities({1.0}), 5, 99) == std::vector<std::size_t>(5, 0));
  CHECK(multinomial_draw(SamplingProbabilities({0.0, 1.0}), 3, 1) == std::vector<std::size_t>{1, 1, 1});
  CHECK(multinomial_draw(SamplingProbabilities({1.0, 0.0}), 3, 1) == std::vector<std::size_t>{0, 0, 0});
  CHECK_ERROR_CODE(multinomial_draw(SamplingProbabilities({1.0}), 0, 1), ErrorCode::kInvalidConfig);
}

TEST_CASE("fair coin") {
  auto draws = multinomial_draw(SamplingProbabilities({0.5, 0.5}), 100000, 42);
  auto zeros = std::count(draws.begin(), draws.end(), std::size_t{0});
  CHECK(zeros >= 49000);
  CHECK(zeros <= 51000);
}

TEST_CASE("determinism") {
  testing::Gen gen(21);
  std::vector<double> w(50);
  for (auto& x : w) x = gen.uniform();
  auto p = normalize_weights(w);
  CHECK(multinomial_draw(p, 1000, 7) == multinomial_draw(p, 1000, 7));
  CHECK(multinomial_draw(p, 1000, 7) != multinomial_draw(p, 1000, 8));
  // A draw of n is a prefix of a draw of n + m.
  auto longer = multinomial_draw(p, 1500, 7);
  auto shorter = multinomial_draw(p, 1000, 7);
  CHECK(std::equal(shorter.begin(), shorter.end(), longer.begin()));
}

TEST_CASE("zero-probability indices never appear") {
  testing::Gen gen(22);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> w(gen.size(1, 12));
    for (auto& x : w) x = gen.index(3) == 0 ? 0.0 : gen.uniform();
    w[gen.index(w.size())] = 1.0;
    auto draws = multinomial_draw(normalize_weights(w), 500, gen.u64());
    for (auto i : draws) CHECK(w[i] > 0.0);
  }
}

TEST_CASE("boundary ties select the higher index") {
  // The cumulative sums are exact dyadic values, so inversion must equal
  // floor(4u): a uniform sitting exactly on a boundary goes to the upper cell.
  SamplingProbabilities p({0.25, 0.25, 0.25, 0.25});
  rng::Stream s(0, 0x4D554C54);
  auto draws = multinomial_draw(p, 64, 0);
  for (std::size_t i = 0; i < draws.size(); ++i) {
    double u = s.uniform();
    CHECK(draws[i] == std::min<std::size_t>(3, static_cast<std::size_t>(std::floor(u * 4.0))));
  }
}

TEST_CASE("frequencies converge") {
  testing::Gen gen(23);
  for (int rep = 0; rep < 3; ++rep) {
    std::vector<double> w(gen.size(2, 20));
    for (auto& x : w) x = gen.uniform(0.01, 1.0);
    auto p = normalize_weights(w);
    const std::size_t n = 1'000'000;
    auto draws = multinomial_draw(p, n, gen.u64());
    std::vector<double> freq(w.size(), 0.0);
    for (auto i : draws) freq[i] += 1.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      double pk = p.values()[k];
      CHECK(std::abs(freq[k] / n - pk) <= 5.0 * std::sqrt(pk * (1 - pk) / n));
    }
  }
}

TEST_CASE("top_fraction") {
  std::vector<double> w{0.1, 5.0, 3.0, 3.0, 0.2};
  CHECK(top_fraction(w, 0.4) == std::vector<std::size_t>{1, 2});
  CHECK(top_fraction(w, 0.6) == std::vector<std::size_t>{1, 2, 3});
  CHECK(top_fraction(w, 1.0) == std::vector<std::size_t>{0, 1, 2, 3, 4});
  CHECK(top_fraction(w, 0.01) == std::vector<std::size_t>{1});
  CHECK(top_fraction(w, 0.7).size() == 4);  // ceil(3.5)
  CHECK_ERROR_CODE(top_fraction(w, 0.0), ErrorCode::kInvalidConfig);
}

TEST_CASE("sample_without_replacement") {
  auto s = sample_without_replacement(100, 100, 3);
  CHECK(std::set<std::size_t>(s.begin(), s.end()).size() == 100);
  auto t = sample_without_replacement(1000, 10, 3);
  CHECK(std::set<std::size_t>(t.begin(), t.end()).size() == 10);
  CHECK(t == sample_without_replacement(1000, 10, 3));
  CHECK_ERROR_CODE(sample_without_replacement(3, 4, 0), ErrorCode::kInvalidConfig);
}

}
