#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "persalign/core.hpp"

namespace persalign {

// Persona embeddings, L2-normalized on construction.
class EmbeddingIndex {
 public:
  EmbeddingIndex(std::vector<std::string> ids, const std::vector<std::vector<double>>& vectors);

  const std::vector<std::string>& ids() const noexcept { return ids_; }
  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t dims() const noexcept { return dims_; }
  std::span<const double> vector(std::size_t i) const {
    return {data_.data() + i * dims_, dims_};
  }
  // Position of an id, if present.
  std::optional<std::size_t> find(const std::string& id) const;

 private:
  std::vector<std::string> ids_;
  std::size_t dims_ = 0;
  std::vector<double> data_;  // row-major size() x dims()
};

// Plain sequential sums; results are reproducible bit-for-bit.
double dot(std::span<const double> a, std::span<const double> b);
std::vector<double> l2_normalized(std::span<const double> v);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

struct ScoredId {
  std::string id;
  double score = 0.0;
  bool operator==(const ScoredId&) const = default;
};

// Descending score, ties by ascending id.
std::vector<ScoredId> top_k_retrieve(std::span<const double> query, const EmbeddingIndex& index,
                                     std::size_t k);

// -log softmax of the positive among {positive} U negatives, logits sim / tau.
double contrastive_loss(std::span<const double> query, std::span<const double> positive,
                        const std::vector<std::vector<double>>& negatives, double temperature = 1.0);

struct TrainingQuery {
  std::string query_id;
  std::vector<double> embedding;
  std::string source_id;  // the persona the query was written from
  bool operator==(const TrainingQuery&) const = default;
};

struct TrainingPair {
  std::string query_id;
  std::string positive_id;
  std::vector<std::string> negative_ids;
  // Fewer negatives than requested because the pool ran out.
  bool short_of_negatives = false;

  bool operator==(const TrainingPair&) const = default;
};

struct PairIssue {
  std::string query_id;
  ErrorCode code;
  std::string message;
};

struct TrainingPairSet {
  std::vector<TrainingPair> pairs;
  std::vector<PairIssue> issues;
};

// Returns true when the candidate actually matches the query and must not be
// used as a negative.
using FalseNegativeFilter = std::function<bool(const std::string& query_id, const std::string& candidate_id)>;

// Hard negatives are taken down the similarity ranking, random negatives from
// a seeded shuffle of the remainder; filtered candidates are replaced from the
// same source until the counts are met or the pool is exhausted. Queries that
// end with no negatives at all produce an EmptyNegativePool issue and no pair.
TrainingPairSet build_training_pairs(const EmbeddingIndex& index, const std::vector<TrainingQuery>& queries,
                                     std::size_t n_hard, std::size_t n_random, std::uint64_t seed,
                                     const FalseNegativeFilter& is_false_negative);

// Rewrites a seed persona narrative for a target group; throws on failure.
using PersonaReviser = std::function<std::string(const std::string& query, const std::string& narrative)>;

struct GroupWarning {
  std::string seed_id;
  std::string message;
};

struct GroupSubset {
  std::vector<PersonaRecord> personas;
  std::vector<GroupWarning> warnings;
};

// Retrieves the k nearest seed personas and revises each one. New ids are
// "<group_prefix><rank>" with source_id pointing at the seed.
GroupSubset group_subset(const std::string& query_text, std::span<const double> query_embedding,
                         const EmbeddingIndex& index, const std::vector<PersonaRecord>& personas,
                         std::size_t k, const PersonaReviser& reviser,
                         const std::string& group_prefix = "group-");

}  // namespace persalign
