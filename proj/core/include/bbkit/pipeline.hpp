#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bbkit/classifier.hpp"
#include "bbkit/matcher.hpp"

namespace bbkit {

struct round_inputs {
  int id = 0;
  std::vector<std::filesystem::path> ledgers;
  std::vector<std::filesystem::path> traces;
};

/// Everything `bbkit run` needs. Either a synthetic scenario or explicit
/// per-round inputs supply the ledgers and traces.
struct pipeline_config {
  std::filesystem::path output_dir;
  match_config match;
  std::uint64_t blowback_threshold = default_blowback_threshold;
  std::vector<round_inputs> rounds;

  std::optional<std::filesystem::path> scenario;
  std::optional<int> synth_rescans;
  std::optional<double> synth_noise_pps;
  std::optional<std::uint64_t> synth_seed;

  std::optional<std::filesystem::path> asn_dataset;
  std::optional<std::filesystem::path> geo_dataset;
  std::optional<std::filesystem::path> traceroutes;

  int attack_round = 1;       // falls back to round 0 when absent
  std::size_t timing_top = 8; // generators in the timing data file
  std::string log_level = "info";
  std::size_t jobs = 1;

  /// Throws validation_error naming the first missing input path.
  void validate() const;
};

/// Relative paths resolve against base_dir.
pipeline_config parse_pipeline_config(std::string_view toml_text, const std::filesystem::path& base_dir);
pipeline_config load_pipeline_config(const std::filesystem::path& path);

struct manifest_entry {
  std::string path; // relative to the output directory
  std::uint64_t bytes = 0;
  std::string sha256;
};

struct pipeline_result {
  std::vector<manifest_entry> outputs;
  std::filesystem::path manifest;
};

inline constexpr std::string_view partial_marker = ".partial";
inline constexpr std::string_view manifest_name = "manifest.tsv";

using log_sink = std::function<void(std::string_view)>;

/// Runs synth (optional), match, classify, the analyses and the attack
/// simulation. A `.partial` marker stays in the output directory unless
/// every stage succeeds.
pipeline_result run_pipeline(const pipeline_config& config, const log_sink& log = {});

} // namespace bbkit
