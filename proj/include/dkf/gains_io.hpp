#pragma once

#include "dkf/gain.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>

namespace dkf {

class GainsFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A stored gain schedule plus the hash of the scenario it was computed for.
struct GainArtifact {
  std::string scenario_hash;
  GainSchedule schedule;
};

/// Per-step per-agent K, Σ_xy, Σ_y, the diagonal P⁺ blocks when known, and
/// the steady-state section when present. Doubles round-trip exactly.
nlohmann::json gains_to_json(const GainArtifact& artifact);
GainArtifact gains_from_json(const nlohmann::json& doc);

void save_gains(const std::filesystem::path& path, const GainArtifact& artifact);
GainArtifact load_gains(const std::filesystem::path& path);

/// Rebuilds innovation structures from the model and checks every stored
/// gain has the matching shape. Throws GainsFormatError otherwise.
void attach_model(GainSchedule& schedule, const StateSpaceNetwork& model);

}  // namespace dkf
