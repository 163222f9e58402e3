#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "persalign/core.hpp"
#include "persalign/external.hpp"

namespace persalign {

// Produces one scalar answer for a (persona, questionnaire item) pair.
// Implementations must be deterministic in (persona, item, seed) and
// thread-safe for concurrent calls.
class Responder {
 public:
  virtual ~Responder() = default;
  virtual double respond(std::string_view persona, std::string_view item, std::uint64_t seed) const = 0;
};

// Latent-trait test responder. Narratives carry "[theta: t1 t2 ...]" and item
// texts carry "[loading: l1 l2 ... | bias: b]"; the answer is
// clip(theta . loading + bias + noise_sd * z) with z drawn from the cell seed.
class SyntheticResponder final : public Responder {
 public:
  SyntheticResponder(double noise_sd = 0.0, std::optional<double> lower = std::nullopt,
                     std::optional<double> upper = std::nullopt);
  double respond(std::string_view persona, std::string_view item, std::uint64_t seed) const override;

  static std::string encode_theta(const std::vector<double>& theta);
  static std::string encode_item(const std::vector<double>& loading, double bias);

 private:
  double noise_sd_;
  std::optional<double> lower_;
  std::optional<double> upper_;
};

// Responder service: {"persona", "item"} -> {"value": number}.
class HttpResponder final : public Responder {
 public:
  explicit HttpResponder(Endpoint endpoint) : endpoint_(std::move(endpoint)) {}
  double respond(std::string_view persona, std::string_view item, std::uint64_t seed) const override;

 private:
  Endpoint endpoint_;
};

struct QuestionItem {
  std::string id;
  std::string text;
  bool operator==(const QuestionItem&) const = default;
};

struct CollectOptions {
  int retries = 0;
  // Concurrent cells; 1 runs inline.
  std::size_t max_in_flight = 1;
};

// Seed of cell (i, k); recomputing any subset of cells reproduces the full run.
std::uint64_t cell_seed(std::uint64_t seed, std::size_t persona_index, std::size_t item_index);

// x_ik = responder(narrative_i, text_k, cell_seed(seed, i, k)). Rows are
// labelled with persona ids and columns with item ids.
ResponseMatrix collect_responses(const std::vector<PersonaRecord>& personas,
                                 const std::vector<QuestionItem>& items, const Responder& responder,
                                 std::uint64_t seed, const CollectOptions& options = {});

}  // namespace persalign
