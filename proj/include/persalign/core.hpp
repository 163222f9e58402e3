#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "persalign/error.hpp"

namespace persalign {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// N x d questionnaire responses, one row per respondent (persona or human).
// Immutable once constructed; the constructor enforces finiteness and shape.
class ResponseMatrix {
 public:
  // Empty id lists are filled with "q0.." / "r0..".
  explicit ResponseMatrix(Matrix values, std::vector<std::string> item_ids = {},
                          std::vector<std::string> row_ids = {});

  const Matrix& values() const noexcept { return values_; }
  const std::vector<std::string>& item_ids() const noexcept { return item_ids_; }
  const std::vector<std::string>& row_ids() const noexcept { return row_ids_; }

  std::size_t size() const noexcept { return static_cast<std::size_t>(values_.rows()); }
  Eigen::Index dims() const noexcept { return values_.cols(); }
  auto row(std::size_t i) const { return values_.row(static_cast<Eigen::Index>(i)); }

  // Rows may repeat; repeated row ids get a "#k" suffix to stay unique.
  ResponseMatrix select_rows(std::span<const std::size_t> rows) const;

 private:
  Matrix values_;
  std::vector<std::string> item_ids_;
  std::vector<std::string> row_ids_;
};

struct PersonaRecord {
  std::string id;
  std::string narrative;
  std::optional<std::vector<double>> embedding;
  std::optional<std::size_t> response_row;
  // Id of the persona this one was derived from (group revision).
  std::optional<std::string> source_id;

  bool operator==(const PersonaRecord&) const = default;
};

class ItemWeights {
 public:
  explicit ItemWeights(std::vector<double> weights);
  static ItemWeights ones(std::size_t d);

  const std::vector<double>& values() const noexcept { return weights_; }
  std::size_t size() const noexcept { return weights_.size(); }

 private:
  std::vector<double> weights_;
};

struct AlignmentConfig {
  double bandwidth = 0.20;
  double retain_fraction = 0.70;
  std::size_t n_is_candidates = 10'000;
  // Multiplier on the median cost unless epsilon_absolute is set.
  double epsilon = 0.08;
  bool epsilon_absolute = false;
  std::size_t sinkhorn_iters = 250;
  double sinkhorn_tol = 1e-6;
  std::size_t n_final = 5'000;
  std::optional<ItemWeights> item_weights;
  std::size_t ot_batch_size = 10'000;
  std::uint64_t seed = 0;

  // Importance log-weights are clamped to [-cap, cap].
  double log_weight_cap = 30.0;
  // 0 fits the persona density on the whole pool.
  std::size_t persona_fit_subsample = 0;
  bool allow_unconverged = false;
  std::size_t sw_projections = 512;
  std::optional<double> mmd_bandwidth;
};

// Checks the pool-independent invariants.
void validate_config(const AlignmentConfig& config);
void validate_config(const AlignmentConfig& config, std::size_t pool_size, std::size_t dims);

class ValidatedPool {
 public:
  const std::vector<PersonaRecord>& personas() const noexcept { return personas_; }
  const ResponseMatrix& responses() const noexcept { return responses_; }
  std::optional<std::size_t> embedding_dim() const noexcept { return embedding_dim_; }

  // Response row of each persona: response_row when set, else the row whose id
  // equals the persona id.
  std::vector<std::size_t> persona_rows() const;

 private:
  friend ValidatedPool validate_pool(std::vector<PersonaRecord>, ResponseMatrix);
  ValidatedPool(std::vector<PersonaRecord> personas, ResponseMatrix responses,
                std::optional<std::size_t> embedding_dim)
      : personas_(std::move(personas)), responses_(std::move(responses)), embedding_dim_(embedding_dim) {}

  std::vector<PersonaRecord> personas_;
  ResponseMatrix responses_;
  std::optional<std::size_t> embedding_dim_;
};

ValidatedPool validate_pool(std::vector<PersonaRecord> personas, ResponseMatrix responses);
ValidatedPool validate_pool(const ValidatedPool& pool);

}  // namespace persalign
