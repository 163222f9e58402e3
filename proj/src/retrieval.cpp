#include "persalign/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "persalign/rng.hpp"

namespace persalign {

namespace {

void require_same_length(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "vectors have lengths " + std::to_string(a.size()) +
                                                   " and " + std::to_string(b.size()));
  }
}

bool ranks_before(const ScoredId& a, const ScoredId& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.id < b.id;
}

}  // namespace

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<double> l2_normalized(std::span<const double> v) {
  const double norm = std::sqrt(dot(v, v));
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw Error(ErrorCode::kZeroVector, "cannot normalize a zero or non-finite vector");
  }
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / norm;
  return out;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  require_same_length(a, b);
  const double na = std::sqrt(dot(a, a));
  const double nb = std::sqrt(dot(b, b));
  if (!(na > 0.0) || !(nb > 0.0)) throw Error(ErrorCode::kZeroVector, "cosine similarity of a zero vector");
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

EmbeddingIndex::EmbeddingIndex(std::vector<std::string> ids, const std::vector<std::vector<double>>& vectors)
    : ids_(std::move(ids)) {
  if (ids_.size() != vectors.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "index has " + std::to_string(ids_.size()) + " ids and " +
                                                   std::to_string(vectors.size()) + " vectors");
  }
  if (ids_.empty()) throw Error(ErrorCode::kEmptyInput, "embedding index is empty");
  dims_ = vectors.front().size();
  if (dims_ == 0) throw Error(ErrorCode::kDimensionMismatch, "embeddings have length 0");
  std::unordered_set<std::string_view> seen;
  data_.reserve(ids_.size() * dims_);
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!seen.insert(ids_[i]).second) {
      throw Error(ErrorCode::kDuplicateId, "duplicate embedding id \"" + ids_[i] + "\"");
    }
    if (vectors[i].size() != dims_) {
      throw Error(ErrorCode::kDimensionMismatch, "embedding \"" + ids_[i] + "\" has length " +
                                                     std::to_string(vectors[i].size()) + ", expected " +
                                                     std::to_string(dims_));
    }
    try {
      const std::vector<double> unit = l2_normalized(vectors[i]);
      data_.insert(data_.end(), unit.begin(), unit.end());
    } catch (const Error& e) {
      rethrow_with_context(e, "embedding \"" + ids_[i] + "\"");
    }
  }
}

std::optional<std::size_t> EmbeddingIndex::find(const std::string& id) const {
  auto it = std::find(ids_.begin(), ids_.end(), id);
  if (it == ids_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - ids_.begin());
}

std::vector<ScoredId> top_k_retrieve(std::span<const double> query, const EmbeddingIndex& index,
                                     std::size_t k) {
  if (k < 1 || k > index.size()) {
    throw Error(ErrorCode::kKOutOfRange, "k = " + std::to_string(k) + " outside [1, " +
                                             std::to_string(index.size()) + "]");
  }
  if (query.size() != index.dims()) {
    throw Error(ErrorCode::kDimensionMismatch, "query has length " + std::to_string(query.size()) +
                                                   ", index has " + std::to_string(index.dims()));
  }
  const std::vector<double> q = l2_normalized(query);
  std::vector<ScoredId> scored(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    scored[i] = {index.ids()[i], std::clamp(dot(q, index.vector(i)), -1.0, 1.0)};
  }
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(),
                    ranks_before);
  scored.resize(k);
  return scored;
}

double contrastive_loss(std::span<const double> query, std::span<const double> positive,
                        const std::vector<std::vector<double>>& negatives, double temperature) {
  if (negatives.empty()) throw Error(ErrorCode::kEmptyNegativePool, "contrastive loss needs a negative");
  if (!(temperature > 0.0)) throw Error(ErrorCode::kInvalidConfig, "temperature must be > 0");
  std::vector<double> logits;
  logits.reserve(negatives.size() + 1);
  logits.push_back(cosine_similarity(query, positive) / temperature);
  for (const auto& n : negatives) logits.push_back(cosine_similarity(query, n) / temperature);
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - mx);
  return std::max(0.0, mx + std::log(sum) - logits.front());
}

TrainingPairSet build_training_pairs(const EmbeddingIndex& index, const std::vector<TrainingQuery>& queries,
                                     std::size_t n_hard, std::size_t n_random, std::uint64_t seed,
                                     const FalseNegativeFilter& is_false_negative) {
  if (n_hard + n_random < 1) {
    throw Error(ErrorCode::kInvalidConfig, "n_hard + n_random must be >= 1");
  }
  TrainingPairSet out;
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    const TrainingQuery& q = queries[qi];
    if (!index.find(q.source_id)) {
      throw Error(ErrorCode::kIndexOutOfRange,
                  "query \"" + q.query_id + "\" names unknown positive \"" + q.source_id + "\"");
    }
    const std::vector<ScoredId> ranking = top_k_retrieve(q.embedding, index, index.size());
    std::unordered_set<std::string> used{q.source_id};
    auto accept = [&](const std::string& id) {
      if (is_false_negative && is_false_negative(q.query_id, id)) return false;
      return true;
    };

    TrainingPair pair{q.query_id, q.source_id, {}, false};
    std::size_t hard = 0;
    for (const auto& cand : ranking) {
      if (hard == n_hard) break;
      if (used.contains(cand.id)) continue;
      used.insert(cand.id);  // rejected candidates are not retried as random negatives
      if (accept(cand.id)) {
        pair.negative_ids.push_back(cand.id);
        ++hard;
      }
    }
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < index.size(); ++i) {
      if (!used.contains(index.ids()[i])) rest.push_back(i);
    }
    rng::Stream stream(rng::derive_seed(seed, {qi}), 0x50414952ULL);
    std::size_t random = 0;
    for (std::size_t t = 0; t < rest.size() && random < n_random; ++t) {
      const auto j = t + static_cast<std::size_t>(stream.below(rest.size() - t));
      std::swap(rest[t], rest[j]);
      const std::string& id = index.ids()[rest[t]];
      if (accept(id)) {
        pair.negative_ids.push_back(id);
        ++random;
      }
    }

    if (pair.negative_ids.empty()) {
      out.issues.push_back({q.query_id, ErrorCode::kEmptyNegativePool,
                            "every candidate negative was filtered out or the pool is empty"});
      continue;
    }
    pair.short_of_negatives = hard < n_hard || random < n_random;
    out.pairs.push_back(std::move(pair));
  }
  return out;
}

GroupSubset group_subset(const std::string& query_text, std::span<const double> query_embedding,
                         const EmbeddingIndex& index, const std::vector<PersonaRecord>& personas,
                         std::size_t k, const PersonaReviser& reviser, const std::string& group_prefix) {
  std::unordered_map<std::string_view, const PersonaRecord*> by_id;
  for (const auto& p : personas) by_id.emplace(p.id, &p);
  const std::vector<ScoredId> seeds = top_k_retrieve(query_embedding, index, k);
  GroupSubset out;
  for (std::size_t rank = 0; rank < seeds.size(); ++rank) {
    const std::string& seed_id = seeds[rank].id;
    auto it = by_id.find(seed_id);
    if (it == by_id.end()) {
      out.warnings.push_back({seed_id, "no persona record for retrieved id"});
      continue;
    }
    try {
      PersonaRecord rec;
      rec.id = group_prefix + std::to_string(rank);
      rec.narrative = reviser(query_text, it->second->narrative);
      rec.source_id = seed_id;
      out.personas.push_back(std::move(rec));
    } catch (const std::exception& e) {
      out.warnings.push_back({seed_id, e.what()});
    }
  }
  return out;
}

}  // namespace persalign
