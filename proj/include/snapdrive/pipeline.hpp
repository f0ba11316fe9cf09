#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "snapdrive/aggregate.hpp"
#include "snapdrive/demographics.hpp"
#include "snapdrive/geo_grid.hpp"
#include "snapdrive/ingest.hpp"
#include "snapdrive/synth.hpp"
#include "snapdrive/temporal.hpp"

namespace snapdrive {

struct CityConfig {
  std::string id;
  std::string tz_id;
  Region region;
  std::optional<CityStats> census;
};

/// Input files; empty paths are absent. Relative paths in the config
/// document resolve against the document's directory.
struct InputPaths {
  std::filesystem::path snaps;
  RecordFormat snaps_format = RecordFormat::kJsonl;
  std::filesystem::path deleted_ids;
  std::filesystem::path annotations;
  std::filesystem::path truth;
  std::filesystem::path city_stats;
  std::filesystem::path frame_scores;
};

/// Knobs for the `synth` subcommand.
struct SynthSettings {
  std::size_t n_cities = 10;
  std::size_t records_per_city = 20000;
  double driving_fraction = 0.2356;
  double night_uplift_pct = 75.0;
  SpatialModel spatial = SpatialModel::kPowerLaw;
  double alpha = 2.5;
  double frame_noise = 0.03;
  double deletion_rate = 0.0298;
  std::size_t annotated_items = 3000;
  double annotation_flip_prob = 0.1;
  std::size_t regression_cities = 130;
  double regression_sigma = 0.1;
};

struct PipelineConfig {
  std::filesystem::path base_dir;
  std::vector<CityConfig> cities;
  double tile_size_m = kDefaultTileSizeM;
  VotingRule rule = VotingRule::majority();
  double frame_cutoff = kDefaultFrameCutoff;
  NightWindow night;
  int k = 3;
  int restarts = 10;
  std::uint64_t seed = 42;
  int jobs = 1;
  std::optional<CollectionWindow> window;
  InputPaths inputs;
  std::filesystem::path out_dir = "results";
  SynthSettings synth;
};

/// Parses a JSON config document. Unknown keys and invalid values raise kConfig.
PipelineConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir);
/// Throws kIo when the file cannot be read.
PipelineConfig load_config(const std::filesystem::path& path);

const std::vector<std::string>& subcommand_names();

/// Runs one stage, computing upstream stages in memory, and writes the
/// stage's outputs under cfg.out_dir. Returns the written files in order.
/// Unknown names raise kUsage.
std::vector<std::filesystem::path> run_subcommand(const std::string& name, const PipelineConfig& cfg);

}  // namespace snapdrive
