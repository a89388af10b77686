#ifndef COHFLOW_CONFIG_HPP
#define COHFLOW_CONFIG_HPP

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

#include "cohflow/generator.hpp"
#include "cohflow/optimize.hpp"
#include "cohflow/spectral.hpp"

namespace cohflow {

using Json = nlohmann::json;

Json load_config(const std::filesystem::path& path);

// Known experiment presets, as fully resolved configurations.
struct PresetInfo {
  std::string name;
  std::string description;
};
std::vector<PresetInfo> list_presets();
Json preset_config(const std::string& name, const std::string& scale = "full");

// Typed views over the configuration document; errors name the offending key.
GridConfig parse_grid(const Json& config);
VelocityField parse_field(const Json& config);
double parse_epsilon(const Json& config);
SpectrumOptions parse_solver(const Json& config);
AssemblyOptions parse_assembly(const Json& config);
DictionarySpec parse_dictionary(const Json& config);
std::uint64_t parse_seed(const Json& config);

// "--set key=value" style overrides on top-level (dotted) keys.
void apply_override(Json& config, const std::string& dotted_key, const std::string& value);

}  // namespace cohflow

#endif
