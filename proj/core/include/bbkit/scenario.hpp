#pragma once

#include <filesystem>
#include <string_view>
#include <vector>

#include "bbkit/synth.hpp"

namespace bbkit {

/// Generators and campaign settings read from a scenario file. The schema
/// is described in docs/scenario.md.
struct scenario {
  std::vector<generator_spec> specs;
  campaign_config campaign;
};

/// Throws validation_error naming the offending key.
scenario parse_scenario(std::string_view toml_text);
scenario load_scenario(const std::filesystem::path& path);

} // namespace bbkit
