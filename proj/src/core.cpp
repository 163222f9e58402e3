#include "persalign/core.hpp"

#include <cmath>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace persalign {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNonFiniteValue: return "NonFiniteValue";
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kNonPositiveBandwidth: return "NonPositiveBandwidth";
    case ErrorCode::kAllZeroWeights: return "AllZeroWeights";
    case ErrorCode::kNonFiniteWeight: return "NonFiniteWeight";
    case ErrorCode::kNonPositiveEpsilon: return "NonPositiveEpsilon";
    case ErrorCode::kNumericalCollapse: return "NumericalCollapse";
    case ErrorCode::kUnconvergedPlan: return "UnconvergedPlan";
    case ErrorCode::kInstanceTooLarge: return "InstanceTooLarge";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kInsufficientSamples: return "InsufficientSamples";
    case ErrorCode::kDegenerateBandwidth: return "DegenerateBandwidth";
    case ErrorCode::kConstantColumn: return "ConstantColumn";
    case ErrorCode::kZeroVector: return "ZeroVector";
    case ErrorCode::kKOutOfRange: return "KOutOfRange";
    case ErrorCode::kEmptyNegativePool: return "EmptyNegativePool";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kSchemaError: return "SchemaError";
    case ErrorCode::kResponderFailure: return "ResponderFailure";
    case ErrorCode::kExternalServiceError: return "ExternalServiceError";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

void rethrow_with_context(const Error& err, std::string_view context) {
  throw Error(err.code(), std::string(context) + ": " + err.what());
}

namespace {

std::vector<std::string> default_ids(std::string_view prefix, std::size_t n) {
  std::vector<std::string> ids;
  ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) ids.push_back(std::string(prefix) + std::to_string(i));
  return ids;
}

void check_unique(const std::vector<std::string>& ids, std::string_view what) {
  std::unordered_set<std::string_view> seen;
  seen.reserve(ids.size());
  for (const auto& id : ids) {
    if (!seen.insert(id).second) {
      throw Error(ErrorCode::kDuplicateId,
                  "duplicate " + std::string(what) + " id \"" + id + "\"");
    }
  }
}

}  // namespace

ResponseMatrix::ResponseMatrix(Matrix values, std::vector<std::string> item_ids,
                               std::vector<std::string> row_ids)
    : values_(std::move(values)), item_ids_(std::move(item_ids)), row_ids_(std::move(row_ids)) {
  if (values_.rows() < 1 || values_.cols() < 1) {
    throw Error(ErrorCode::kDimensionMismatch, "response matrix must be at least 1x1");
  }
  if (item_ids_.empty()) item_ids_ = default_ids("q", static_cast<std::size_t>(values_.cols()));
  if (row_ids_.empty()) row_ids_ = default_ids("r", static_cast<std::size_t>(values_.rows()));
  if (static_cast<Eigen::Index>(item_ids_.size()) != values_.cols()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "item_ids has " + std::to_string(item_ids_.size()) + " entries, matrix has " +
                    std::to_string(values_.cols()) + " columns");
  }
  if (static_cast<Eigen::Index>(row_ids_.size()) != values_.rows()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "row_ids has " + std::to_string(row_ids_.size()) + " entries, matrix has " +
                    std::to_string(values_.rows()) + " rows");
  }
  for (Eigen::Index i = 0; i < values_.rows(); ++i) {
    for (Eigen::Index k = 0; k < values_.cols(); ++k) {
      if (!std::isfinite(values_(i, k))) {
        throw Error(ErrorCode::kNonFiniteValue, "non-finite value at (" + std::to_string(i) +
                                                    ", " + std::to_string(k) + ")");
      }
    }
  }
  check_unique(item_ids_, "item");
  check_unique(row_ids_, "row");
}

ResponseMatrix ResponseMatrix::select_rows(std::span<const std::size_t> rows) const {
  Matrix out(static_cast<Eigen::Index>(rows.size()), dims());
  std::vector<std::string> ids;
  ids.reserve(rows.size());
  std::unordered_map<std::string, int> repeat;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= size()) {
      throw Error(ErrorCode::kIndexOutOfRange, "row index " + std::to_string(rows[r]) +
                                                   " out of range for " + std::to_string(size()) +
                                                   " rows");
    }
    out.row(static_cast<Eigen::Index>(r)) = values_.row(static_cast<Eigen::Index>(rows[r]));
    const std::string& base = row_ids_[rows[r]];
    const int k = repeat[base]++;
    ids.push_back(k == 0 ? base : base + "#" + std::to_string(k));
  }
  return ResponseMatrix(std::move(out), item_ids_, std::move(ids));
}

ItemWeights::ItemWeights(std::vector<double> weights) : weights_(std::move(weights)) {
  if (weights_.empty()) throw Error(ErrorCode::kDimensionMismatch, "item weights are empty");
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    if (!std::isfinite(weights_[k]) || weights_[k] <= 0.0) {
      throw Error(ErrorCode::kInvalidConfig,
                  "item weight " + std::to_string(k) + " must be finite and > 0");
    }
  }
}

ItemWeights ItemWeights::ones(std::size_t d) { return ItemWeights(std::vector<double>(d, 1.0)); }

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw Error(ErrorCode::kInvalidConfig, message);
}

}  // namespace

void validate_config(const AlignmentConfig& c) {
  require(std::isfinite(c.bandwidth) && c.bandwidth > 0.0, "bandwidth must be > 0");
  require(c.retain_fraction > 0.0 && c.retain_fraction <= 1.0, "retain_fraction must be in (0, 1]");
  require(c.n_is_candidates >= 1, "n_is_candidates must be >= 1");
  require(std::isfinite(c.epsilon) && c.epsilon > 0.0, "epsilon must be > 0");
  require(c.sinkhorn_iters >= 1, "sinkhorn_iters must be >= 1");
  require(std::isfinite(c.sinkhorn_tol) && c.sinkhorn_tol > 0.0, "sinkhorn_tol must be > 0");
  require(c.n_final >= 1, "n_final must be >= 1");
  require(c.ot_batch_size >= 1, "ot_batch_size must be >= 1");
  require(std::isfinite(c.log_weight_cap) && c.log_weight_cap > 0.0, "log_weight_cap must be > 0");
  require(c.sw_projections >= 1, "sw_projections must be >= 1");
  require(!c.mmd_bandwidth || (std::isfinite(*c.mmd_bandwidth) && *c.mmd_bandwidth > 0.0),
          "mmd_bandwidth must be > 0 when set");
  require(c.n_final <= c.n_is_candidates, "n_final (" + std::to_string(c.n_final) +
                                              ") must not exceed n_is_candidates (" +
                                              std::to_string(c.n_is_candidates) + ")");
}

void validate_config(const AlignmentConfig& c, std::size_t pool_size, std::size_t dims) {
  validate_config(c);
  require(c.n_is_candidates <= pool_size, "n_is_candidates (" + std::to_string(c.n_is_candidates) +
                                              ") must not exceed pool size (" +
                                              std::to_string(pool_size) + ")");
  if (c.item_weights && c.item_weights->size() != dims) {
    throw Error(ErrorCode::kDimensionMismatch,
                "item_weights has " + std::to_string(c.item_weights->size()) +
                    " entries, responses have " + std::to_string(dims) + " items");
  }
}

ValidatedPool validate_pool(std::vector<PersonaRecord> personas, ResponseMatrix responses) {
  std::unordered_set<std::string_view> ids;
  std::unordered_map<std::size_t, std::string_view> rows_taken;
  std::optional<std::size_t> embedding_dim;
  for (const auto& p : personas) {
    if (!ids.insert(p.id).second) {
      throw Error(ErrorCode::kDuplicateId, "duplicate persona id \"" + p.id + "\"");
    }
    if (p.embedding) {
      if (!embedding_dim) embedding_dim = p.embedding->size();
      if (p.embedding->size() != *embedding_dim || p.embedding->empty()) {
        throw Error(ErrorCode::kDimensionMismatch,
                    "persona \"" + p.id + "\" has embedding of length " +
                        std::to_string(p.embedding->size()) + ", expected " +
                        std::to_string(*embedding_dim));
      }
      for (double v : *p.embedding) {
        if (!std::isfinite(v)) {
          throw Error(ErrorCode::kNonFiniteValue, "persona \"" + p.id + "\" has a non-finite embedding");
        }
      }
    }
    if (p.response_row) {
      if (*p.response_row >= responses.size()) {
        throw Error(ErrorCode::kIndexOutOfRange,
                    "persona \"" + p.id + "\" response_row " + std::to_string(*p.response_row) +
                        " out of range for " + std::to_string(responses.size()) + " rows");
      }
      auto [it, fresh] = rows_taken.emplace(*p.response_row, p.id);
      if (!fresh) {
        throw Error(ErrorCode::kDuplicateId, "personas \"" + std::string(it->second) + "\" and \"" +
                                                 p.id + "\" share response_row " +
                                                 std::to_string(*p.response_row));
      }
    }
  }
  return ValidatedPool(std::move(personas), std::move(responses), embedding_dim);
}

ValidatedPool validate_pool(const ValidatedPool& pool) {
  return validate_pool(pool.personas(), pool.responses());
}

std::vector<std::size_t> ValidatedPool::persona_rows() const {
  std::unordered_map<std::string_view, std::size_t> by_row_id;
  for (std::size_t r = 0; r < responses_.size(); ++r) by_row_id.emplace(responses_.row_ids()[r], r);
  std::vector<std::size_t> rows;
  rows.reserve(personas_.size());
  std::unordered_set<std::size_t> taken;
  for (const auto& p : personas_) {
    std::size_t row = 0;
    if (p.response_row) {
      row = *p.response_row;
    } else {
      auto it = by_row_id.find(p.id);
      if (it == by_row_id.end()) {
        throw Error(ErrorCode::kIndexOutOfRange,
                    "persona \"" + p.id + "\" has no response_row and no response record with its id");
      }
      row = it->second;
    }
    if (!taken.insert(row).second) {
      throw Error(ErrorCode::kDuplicateId,
                  "persona \"" + p.id + "\" maps to response row " + std::to_string(row) +
                      " already claimed by another persona");
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace persalign
