#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "windscale/grid.hpp"

namespace windscale {

/// Parameters of the procedural weather oracle that stands in for paired
/// coarse/fine forecast archives.
struct SynthConfig {
  std::uint64_t seed = 7;
  std::int64_t height = 64;
  std::int64_t width = 64;
  std::int64_t n_hours = 80;
  /// Spectral slope of the orography: power ~ k^-terrain_roughness.
  double terrain_roughness = 3.0;
  /// Typical large-scale 10 m wind speed in m/s.
  double background_wind_scale = 8.0;
  double spacing_km = 2.5;
  double train_fraction = 0.75;
  double val_fraction = 0.125;
  /// Fraction of the upslope wind component removed on the steepest slopes.
  double channeling_strength = 0.8;
  /// RMS amplitude (m/s) of the unpredictable small-scale detail.
  double detail_amplitude = 0.5;
  /// Fraction of the domain covered by water.
  double water_fraction = 0.3;

  bool operator==(const SynthConfig&) const = default;
};

/// Throws ConfigError when the domain is smaller than 64 or not a multiple of 8,
/// or when n_hours < 1.
void check_config(const SynthConfig& cfg);

enum class Split { Train, Val, Test };
std::string_view split_name(Split s);
Split parse_split(std::string_view name);

struct SplitEntry {
  std::int64_t hour = 0;
  Split split = Split::Train;
  std::string timestamp;
};

/// (me, mg, z0) on the fine grid; a pure function of cfg.
FieldGrid make_covariates(const SynthConfig& cfg);

/// Fine truth and coarse predictors for one hour; a pure function of (cfg, hour)
/// and the covariates. Safe to call concurrently for different hours.
SamplePair make_hour(const SynthConfig& cfg, const FieldGrid& covariates, std::int64_t hour);

/// Hour-to-split assignment: the last hours form a disjoint test period and the
/// rest is randomly divided into train and validation. Throws ConfigError when
/// n_hours < 10 or a split would be empty.
std::vector<SplitEntry> plan_split(const SynthConfig& cfg);

/// Simulated valid time of an hour index, "YYYY-MM-DDTHH".
std::string synthetic_timestamp(const SynthConfig& cfg, std::int64_t hour);
/// "YYYY-MM" part of a timestamp; used to group test metrics by month.
std::string month_of(const std::string& timestamp);

struct Dataset {
  SynthConfig config;
  FieldGrid covariates;
  std::vector<SplitEntry> manifest;
  std::vector<SamplePair> train;
  std::vector<SamplePair> val;
  std::vector<SamplePair> test;
};

Dataset make_dataset(const SynthConfig& cfg);

/// Writes covariates.wsf, one hour_NNNN.wsf per hour and splits.txt.
/// Returns the list of files written, relative to `dir`.
std::vector<std::string> write_dataset(const std::filesystem::path& dir, const Dataset& data);
/// Reads what write_dataset produced. The config is not stored in the data
/// directory and is left default-constructed.
Dataset read_dataset(const std::filesystem::path& dir);

// Exposed for tests and the metrics module.

/// Zero-mean, unit-variance periodic random field with power ~ k^-slope.
torch::Tensor power_law_field(std::int64_t height, std::int64_t width, double slope,
                              std::mt19937_64& rng);
/// Deterministic engine for a (seed, stream, index) triple.
std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0);

}  // namespace windscale
