#include "persalign/responder.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <mutex>
#include <sstream>
#include <thread>

#include "persalign/rng.hpp"

namespace persalign {

namespace {

// Returns the contents of the first "[tag: ...]" block.
std::string_view bracket_field(std::string_view text, std::string_view tag) {
  const std::string open = "[" + std::string(tag) + ":";
  const auto start = text.find(open);
  if (start == std::string_view::npos) {
    throw Error(ErrorCode::kSchemaError, "text has no \"" + open + " ...]\" block");
  }
  const auto end = text.find(']', start);
  if (end == std::string_view::npos) throw Error(ErrorCode::kSchemaError, "unterminated \"" + open + "\" block");
  return text.substr(start + open.size(), end - start - open.size());
}

std::vector<double> parse_numbers(std::string_view s) {
  std::vector<double> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == ',')) ++i;
    if (i == s.size()) break;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data() + i, s.data() + s.size(), v);
    if (ec != std::errc()) throw Error(ErrorCode::kSchemaError, "bad number in \"" + std::string(s) + "\"");
    out.push_back(v);
    i = static_cast<std::size_t>(ptr - s.data());
  }
  return out;
}

std::string join_numbers(const std::vector<double>& v) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? " " : "") << v[i];
  return os.str();
}

}  // namespace

SyntheticResponder::SyntheticResponder(double noise_sd, std::optional<double> lower,
                                       std::optional<double> upper)
    : noise_sd_(noise_sd), lower_(lower), upper_(upper) {
  if (!(noise_sd >= 0.0)) throw Error(ErrorCode::kInvalidConfig, "noise_sd must be >= 0");
}

std::string SyntheticResponder::encode_theta(const std::vector<double>& theta) {
  return "[theta: " + join_numbers(theta) + "]";
}

std::string SyntheticResponder::encode_item(const std::vector<double>& loading, double bias) {
  return "[loading: " + join_numbers(loading) + " | bias: " + join_numbers({bias}) + "]";
}

double SyntheticResponder::respond(std::string_view persona, std::string_view item,
                                   std::uint64_t seed) const {
  const std::vector<double> theta = parse_numbers(bracket_field(persona, "theta"));
  const std::string_view spec = bracket_field(item, "loading");
  const auto bar = spec.find('|');
  if (bar == std::string_view::npos) throw Error(ErrorCode::kSchemaError, "item block lacks \"| bias:\"");
  const std::vector<double> loading = parse_numbers(spec.substr(0, bar));
  std::string_view rest = spec.substr(bar + 1);
  const auto colon = rest.find(':');
  if (colon == std::string_view::npos) throw Error(ErrorCode::kSchemaError, "item block lacks a bias value");
  const std::vector<double> bias = parse_numbers(rest.substr(colon + 1));
  if (theta.size() != loading.size() || bias.size() != 1) {
    throw Error(ErrorCode::kDimensionMismatch, "theta has " + std::to_string(theta.size()) +
                                                   " traits, item loading has " +
                                                   std::to_string(loading.size()));
  }
  double value = bias[0];
  for (std::size_t t = 0; t < theta.size(); ++t) value += theta[t] * loading[t];
  if (noise_sd_ > 0.0) {
    rng::Stream stream(seed, 0x4E4F4953ULL);
    value += noise_sd_ * stream.normal();
  }
  if (lower_) value = std::max(value, *lower_);
  if (upper_) value = std::min(value, *upper_);
  return value;
}

double HttpResponder::respond(std::string_view persona, std::string_view item, std::uint64_t) const {
  const nlohmann::json req = {{"persona", std::string(persona)}, {"item", std::string(item)}};
  return parse_responder_body(post_json(endpoint_, req.dump()));
}

std::uint64_t cell_seed(std::uint64_t seed, std::size_t persona_index, std::size_t item_index) {
  return rng::derive_seed(seed, {0x43454C4CULL, persona_index, item_index});
}

ResponseMatrix collect_responses(const std::vector<PersonaRecord>& personas,
                                 const std::vector<QuestionItem>& items, const Responder& responder,
                                 std::uint64_t seed, const CollectOptions& options) {
  const std::size_t n = personas.size();
  const std::size_t d = items.size();
  if (n == 0 || d == 0) throw Error(ErrorCode::kEmptyInput, "need at least one persona and one item");
  Matrix values(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  const std::size_t cells = n * d;

  // First failure in row-major order wins so the reported cell is deterministic.
  std::mutex failure_mutex;
  std::size_t failed_cell = cells;
  std::string failure_message;

  auto run_cell = [&](std::size_t cell) {
    const std::size_t i = cell / d;
    const std::size_t k = cell % d;
    std::string last;
    for (int attempt = 0; attempt <= std::max(0, options.retries); ++attempt) {
      try {
        const double v = responder.respond(personas[i].narrative, items[k].text, cell_seed(seed, i, k));
        if (!std::isfinite(v)) throw Error(ErrorCode::kNonFiniteValue, "responder returned a non-finite value");
        values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = v;
        return;
      } catch (const std::exception& e) {
        last = e.what();
      }
    }
    std::lock_guard lock(failure_mutex);
    if (cell < failed_cell) {
      failed_cell = cell;
      failure_message = last;
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(options.max_in_flight, 1, cells);
  if (workers == 1) {
    for (std::size_t cell = 0; cell < cells && failed_cell == cells; ++cell) run_cell(cell);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t cell = next++; cell < cells; cell = next++) run_cell(cell);
      });
    }
  }
  if (failed_cell < cells) {
    throw Error(ErrorCode::kResponderFailure,
                "ResponderFailure(" + std::to_string(failed_cell / d) + ", " + std::to_string(failed_cell % d) +
                    "): " + failure_message);
  }
  std::vector<std::string> row_ids, item_ids;
  for (const auto& p : personas) row_ids.push_back(p.id);
  for (const auto& q : items) item_ids.push_back(q.id);
  return ResponseMatrix(std::move(values), std::move(item_ids), std::move(row_ids));
}

}  // namespace persalign
