#pragma once

#include "dkf/model.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dkf {

/// Malformed scenario document. what() carries line/column for syntax errors
/// and the JSON path for structural ones.
class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses the scenario JSON:
///   { "n", "m", "F", "Q", "x0_mean", "P0",
///     "agents": [{"id", "H", "R"}], "edges": [[from, to], ...] }
/// Matrices are lists of rows. The result is not validated; call validate().
StateSpaceNetwork parse_scenario(std::string_view text);
StateSpaceNetwork load_scenario(const std::filesystem::path& path);

nlohmann::json scenario_to_json(const StateSpaceNetwork& model);

/// SHA-256 (hex) of the canonical serialization of the model.
std::string scenario_hash(const StateSpaceNetwork& model);

nlohmann::json matrix_to_json(const Matrix& x);
Matrix matrix_from_json(const nlohmann::json& j, const std::string& path);
nlohmann::json vector_to_json(const Vector& x);

}  // namespace dkf
