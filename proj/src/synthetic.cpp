#include "persalign/synthetic.hpp"

#include <cmath>

#include "persalign/rng.hpp"

namespace persalign {

namespace {

constexpr std::uint64_t kPoolTag = 0x504F4F4CULL;
constexpr std::uint64_t kReferenceTag = 0x48554D41ULL;

std::vector<std::string> numbered(const std::string& prefix, std::size_t n) {
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

}  // namespace

SimulationPreset simulation_preset(const std::string& name) {
  const Population standard{PopulationKind::kGaussian, 0.0, 1.0, 3.0};
  if (name == "shifted-gaussian") return {name, {PopulationKind::kGaussian, 1.0, 1.0, 3.0}, standard};
  if (name == "mixture-skew") return {name, {PopulationKind::kMixtureSkew, 0.0, 1.0, 3.0}, standard};
  if (name == "heavy-tail") return {name, {PopulationKind::kHeavyTail, 0.0, 1.0, 3.0}, standard};
  if (name == "matched-gaussian") return {name, standard, standard};
  throw Error(ErrorCode::kInvalidConfig, "unknown simulation preset \"" + name + "\"");
}

std::vector<std::string> simulation_preset_names() {
  return {"shifted-gaussian", "mixture-skew", "heavy-tail", "matched-gaussian"};
}

std::vector<double> draw_traits(const Population& pop, std::size_t dims, std::uint64_t seed) {
  rng::Stream s(seed, 0x54524149ULL);
  std::vector<double> theta(dims);
  for (auto& t : theta) {
    double z = 0.0;
    switch (pop.kind) {
      case PopulationKind::kGaussian:
        z = s.normal();
        break;
      case PopulationKind::kMixtureSkew:
        // 70% narrow component left of zero, 30% wide component to the right.
        z = (s.uniform() < 0.7) ? -0.5 + 0.6 * s.normal() : 1.5 + 0.8 * s.normal();
        break;
      case PopulationKind::kHeavyTail: {
        double chi2 = 0.0;
        const int k = static_cast<int>(pop.dof);
        for (int i = 0; i < k; ++i) {
          const double g = s.normal();
          chi2 += g * g;
        }
        z = s.normal() / std::sqrt(chi2 / static_cast<double>(k));
        break;
      }
    }
    t = pop.shift + pop.scale * z;
  }
  return theta;
}

ResponseMatrix draw_population(const Population& pop, std::size_t n, std::size_t dims, std::uint64_t seed,
                               const std::string& id_prefix) {
  Matrix v(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dims));
  for (std::size_t i = 0; i < n; ++i) {
    const std::vector<double> t = draw_traits(pop, dims, rng::derive_seed(seed, {i}));
    for (std::size_t k = 0; k < dims; ++k) v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = t[k];
  }
  return ResponseMatrix(std::move(v), numbered("item", dims), numbered(id_prefix, n));
}

SimulatedData simulate(const SimulationPreset& preset, const SimulationSize& size, std::uint64_t seed) {
  if (size.dims < 1 || size.n_pool < 1 || size.n_reference < 1) {
    throw Error(ErrorCode::kInvalidConfig, "simulation sizes must be >= 1");
  }
  std::vector<QuestionItem> items;
  for (std::size_t k = 0; k < size.dims; ++k) {
    std::vector<double> loading(size.dims, 0.0);
    loading[k] = 1.0;
    items.push_back({"item" + std::to_string(k), "Item " + std::to_string(k) + " " +
                                                     SyntheticResponder::encode_item(loading, 0.0)});
  }
  auto personas_for = [&](const Population& pop, std::uint64_t tag, const std::string& prefix, std::size_t n) {
    std::vector<PersonaRecord> out;
    out.reserve(n);
    const std::uint64_t base = rng::derive_seed(seed, {tag});
    for (std::size_t i = 0; i < n; ++i) {
      const std::vector<double> theta = draw_traits(pop, size.dims, rng::derive_seed(base, {i}));
      PersonaRecord p;
      p.id = prefix + std::to_string(i);
      p.narrative = "Synthetic respondent " + SyntheticResponder::encode_theta(theta);
      p.response_row = i;
      out.push_back(std::move(p));
    }
    return out;
  };
  const SyntheticResponder responder;
  std::vector<PersonaRecord> personas = personas_for(preset.pool, kPoolTag, "p", size.n_pool);
  const std::vector<PersonaRecord> humans = personas_for(preset.reference, kReferenceTag, "h", size.n_reference);
  ResponseMatrix pool = collect_responses(personas, items, responder, seed);
  ResponseMatrix reference = collect_responses(humans, items, responder, seed);
  return {std::move(personas), std::move(items), std::move(pool), std::move(reference)};
}

}  // namespace persalign
