#pragma once

// Shared helpers for the test suites: seeded generators for random inputs and
// a macro asserting the code of a thrown persalign::Error.

#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "persalign/core.hpp"
#include "persalign/rng.hpp"

namespace testing {

using persalign::Matrix;
using persalign::ResponseMatrix;

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : stream_(seed, 0x54455354) {}

  double uniform(double lo = 0.0, double hi = 1.0) { return lo + (hi - lo) * stream_.uniform(); }
  double normal(double mean = 0.0, double sd = 1.0) { return mean + sd * stream_.normal(); }
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(stream_.below(n)); }
  std::size_t size(std::size_t lo, std::size_t hi) { return lo + index(hi - lo + 1); }
  std::uint64_t u64() { return stream_.next_u64(); }

  std::vector<double> normals(std::size_t n, double mean = 0.0, double sd = 1.0) {
    std::vector<double> out(n);
    for (auto& v : out) v = normal(mean, sd);
    return out;
  }

  Matrix matrix(std::size_t rows, std::size_t cols, double mean = 0.0, double sd = 1.0) {
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = normal(mean, sd);
    }
    return m;
  }

  ResponseMatrix responses(std::size_t rows, std::size_t cols, double mean = 0.0, double sd = 1.0) {
    return ResponseMatrix(matrix(rows, cols, mean, sd));
  }

  // Doubles spread over many binades, including awkward decimal expansions.
  double wild() {
    switch (index(5)) {
      case 0: return normal();
      case 1: return normal() * std::pow(10.0, uniform(-300.0, 300.0));
      case 2: return std::ldexp(uniform(), -1070);  // subnormal range
      case 3: return static_cast<double>(static_cast<std::int64_t>(u64() >> 12)) * (index(2) ? 1.0 : -1.0);
      default: return std::nextafter(uniform(), 2.0);
    }
  }

  std::string text(std::size_t max_len = 24) {
    static constexpr std::string_view alphabet =
        "abcdefghijklmnopqrstuvwxyz ABCXYZ0123456789\"\\/\t\n{}[]:,é中";
    std::string s;
    std::size_t len = index(max_len + 1);
    for (std::size_t i = 0; i < len; ++i) {
      // Multi-byte characters are copied whole so the result stays valid UTF-8.
      std::size_t pos = index(alphabet.size());
      while (pos > 0 && (static_cast<unsigned char>(alphabet[pos]) & 0xC0) == 0x80) --pos;
      std::size_t end = pos + 1;
      while (end < alphabet.size() && (static_cast<unsigned char>(alphabet[end]) & 0xC0) == 0x80) ++end;
      s.append(alphabet.substr(pos, end - pos));
    }
    return s;
  }

 private:
  persalign::rng::Stream stream_;
};

}  // namespace testing

#define CHECK_ERROR_CODE(expr, expected_code)                                                  \
  do {                                                                                        \
    bool thrown_ = false;                                                                     \
    try {                                                                                     \
      (void)(expr);                                                                           \
    } catch (const persalign::Error& e_) {                                                    \
      thrown_ = true;                                                                         \
      CHECK_MESSAGE(e_.code() == (expected_code), "got ", persalign::error_code_name(e_.code()), \
                    ": ", e_.what());                                                         \
    }                                                                                         \
    CHECK_MESSAGE(thrown_, "expected ", persalign::error_code_name(expected_code));            \
  } while (false)
