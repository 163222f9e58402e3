#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "persalign/core.hpp"
#include "persalign/responder.hpp"

namespace persalign {

enum class PopulationKind { kGaussian, kMixtureSkew, kHeavyTail };

// Latent-trait population. Traits are independent across dimensions.
struct Population {
  PopulationKind kind = PopulationKind::kGaussian;
  double shift = 0.0;  // added to every trait
  double scale = 1.0;
  double dof = 3.0;    // Student-t degrees of freedom for kHeavyTail
};

struct SimulationPreset {
  std::string name;
  Population pool;
  Population reference;
};

// "shifted-gaussian", "mixture-skew", "heavy-tail", "matched-gaussian".
SimulationPreset simulation_preset(const std::string& name);
std::vector<std::string> simulation_preset_names();

std::vector<double> draw_traits(const Population& pop, std::size_t dims, std::uint64_t seed);

struct SimulatedData {
  std::vector<PersonaRecord> personas;
  std::vector<QuestionItem> items;
  ResponseMatrix pool;
  ResponseMatrix reference;
};

struct SimulationSize {
  std::size_t dims = 5;
  std::size_t n_pool = 50'000;
  std::size_t n_reference = 5'000;
};

// Draws persona traits and reference traits, then answers identity-loaded
// items through SyntheticResponder, so responses equal the latent traits.
SimulatedData simulate(const SimulationPreset& preset, const SimulationSize& size, std::uint64_t seed);

// Reference rows only; cheap path used by sweeps.
ResponseMatrix draw_population(const Population& pop, std::size_t n, std::size_t dims, std::uint64_t seed,
                               const std::string& id_prefix);

}  // namespace persalign
