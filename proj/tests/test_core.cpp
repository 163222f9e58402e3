#include <doctest.h>

#include <limits>

#include "persalign/core.hpp"
#include "support.hpp"

using namespace persalign;

namespace {

std::vector<PersonaRecord> personas(std::initializer_list<const char*> ids) {
  std::vector<PersonaRecord> out;
  std::size_t row = 0;
  for (const char* id : ids) out.push_back({id, "", std::nullopt, row++, std::nullopt});
  return out;
}

}  // namespace

TEST_SUITE("core") {

TEST_CASE("response matrix defaults and validation") {
  ResponseMatrix m(Matrix::Zero(2, 3));
  CHECK(m.item_ids() == std::vector<std::string>{"q0", "q1", "q2"});
  CHECK(m.row_ids() == std::vector<std::string>{"r0", "r1"});
  CHECK_ERROR_CODE(ResponseMatrix(Matrix(0, 3)), ErrorCode::kDimensionMismatch);
  CHECK_ERROR_CODE(ResponseMatrix(Matrix::Zero(2, 3), {"a", "b"}), ErrorCode::kDimensionMismatch);
  CHECK_ERROR_CODE(ResponseMatrix(Matrix::Zero(2, 1), {"a"}, {"x", "x"}), ErrorCode::kDuplicateId);
  Matrix bad = Matrix::Zero(2, 2);
  bad(1, 0) = std::numeric_limits<double>::infinity();
  CHECK_ERROR_CODE(ResponseMatrix(bad), ErrorCode::kNonFiniteValue);
}

TEST_CASE("select_rows keeps repeated rows distinct") {
  Matrix v(3, 1);
  v << 1, 2, 3;
  ResponseMatrix m(v, {"q"}, {"a", "b", "c"});
  std::vector<std::size_t> rows{2, 0, 2};
  ResponseMatrix s = m.select_rows(rows);
  CHECK(s.values()(0, 0) == 3);
  CHECK(s.values()(1, 0) == 1);
  CHECK(s.row_ids()[0] != s.row_ids()[2]);
  std::vector<std::size_t> out_of_range{3};
  CHECK_ERROR_CODE(m.select_rows(out_of_range), ErrorCode::kIndexOutOfRange);
}

TEST_CASE("validate_pool accepts a well-formed pool") {
  testing::Gen gen(1);
  auto pool = validate_pool(personas({"u0", "u1", "u2"}), gen.responses(3, 5));
  CHECK(pool.personas().size() == 3);
  CHECK(pool.persona_rows() == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("NaN is reported with its position") {
  Matrix v = Matrix::Zero(3, 5);
  v(1, 3) = std::numeric_limits<double>::quiet_NaN();
  try {
    ResponseMatrix m(v);
    FAIL("accepted NaN");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNonFiniteValue);
    CHECK(std::string(e.what()).find("(1, 3)") != std::string::npos);
  }
}

TEST_CASE("duplicate persona ids are named") {
  testing::Gen gen(2);
  try {
    validate_pool(personas({"u1", "u1"}), gen.responses(2, 2));
    FAIL("accepted duplicate");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDuplicateId);
    CHECK(std::string(e.what()).find("u1") != std::string::npos);
  }
}

TEST_CASE("every invariant violation is rejected") {
  testing::Gen gen(3);
  ResponseMatrix m = gen.responses(3, 2);
  auto base = personas({"a", "b", "c"});

  auto shared_row = base;
  shared_row[2].response_row = 0;
  CHECK_ERROR_CODE(validate_pool(shared_row, m), ErrorCode::kDuplicateId);

  auto out_of_range = base;
  out_of_range[1].response_row = 3;
  CHECK_ERROR_CODE(validate_pool(out_of_range, m), ErrorCode::kIndexOutOfRange);

  auto ragged = base;
  ragged[0].embedding = std::vector<double>{1, 2};
  ragged[1].embedding = std::vector<double>{1, 2, 3};
  CHECK_ERROR_CODE(validate_pool(ragged, m), ErrorCode::kDimensionMismatch);

  auto nan_embedding = base;
  nan_embedding[0].embedding = std::vector<double>{std::numeric_limits<double>::quiet_NaN()};
  CHECK_ERROR_CODE(validate_pool(nan_embedding, m), ErrorCode::kNonFiniteValue);
}

TEST_CASE("validate_pool is idempotent") {
  testing::Gen gen(4);
  auto base = personas({"a", "b", "c"});
  base[1].embedding = std::vector<double>{0.5, -1.0};
  auto first = validate_pool(base, gen.responses(3, 4));
  auto second = validate_pool(first);
  CHECK(second.personas() == first.personas());
  CHECK(second.responses().values() == first.responses().values());
  CHECK(second.embedding_dim() == first.embedding_dim());
}

TEST_CASE("personas without response_row map by id") {
  Matrix v = Matrix::Zero(2, 1);
  ResponseMatrix m(v, {}, {"x", "y"});
  std::vector<PersonaRecord> ps{{"y", "", {}, {}, {}}, {"x", "", {}, {}, {}}};
  CHECK(validate_pool(ps, m).persona_rows() == std::vector<std::size_t>{1, 0});
  ps[0].id = "z";
  CHECK_ERROR_CODE(validate_pool(ps, m).persona_rows(), ErrorCode::kIndexOutOfRange);
}

TEST_CASE("config validation") {
  AlignmentConfig c;
  CHECK_NOTHROW(validate_config(c));
  CHECK_NOTHROW(validate_config(c, 50'000, 5));

  auto bad = [](auto mutate) {
    AlignmentConfig x;
    mutate(x);
    CHECK_ERROR_CODE(validate_config(x), ErrorCode::kInvalidConfig);
  };
  bad([](AlignmentConfig& x) { x.bandwidth = 0.0; });
  bad([](AlignmentConfig& x) { x.retain_fraction = 0.0; });
  bad([](AlignmentConfig& x) { x.retain_fraction = 1.5; });
  bad([](AlignmentConfig& x) { x.ot_batch_size = 0; });
  bad([](AlignmentConfig& x) { x.sinkhorn_iters = 0; });
  bad([](AlignmentConfig& x) { x.sinkhorn_tol = 0.0; });
  bad([](AlignmentConfig& x) { x.epsilon = -1.0; });
  bad([](AlignmentConfig& x) { x.n_final = 20'000; });

  CHECK_ERROR_CODE(validate_config(c, 9'999, 5), ErrorCode::kInvalidConfig);
  c.item_weights = ItemWeights::ones(4);
  CHECK_ERROR_CODE(validate_config(c, 50'000, 5), ErrorCode::kDimensionMismatch);
  CHECK_ERROR_CODE(ItemWeights({1.0, 0.0}), ErrorCode::kInvalidConfig);
}

}
