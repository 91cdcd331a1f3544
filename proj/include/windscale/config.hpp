#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "windscale/losses.hpp"
#include "windscale/metrics.hpp"
#include "windscale/networks.hpp"
#include "windscale/synth.hpp"
#include "windscale/training.hpp"

namespace windscale {

struct EvalConfig {
  /// "model", "bilinear", "nearest" or a checkpoint path.
  std::vector<std::string> methods{"model", "bilinear", "nearest"};
  std::vector<Region> regions;
  std::int64_t workers = 1;
  /// Power floor for LSD. 0 leaves zero bins as errors.
  double lsd_floor = 0.0;
  /// Tile edge in coarse cells for tiled inference; 0 runs the whole domain.
  std::int64_t tile = 0;
  bool operator==(const EvalConfig&) const = default;
};

struct PlotConfig {
  /// Steps per averaging interval of validation curves.
  std::int64_t interval = 10;
  std::int64_t width = 960;
  std::int64_t height = 600;
  bool operator==(const PlotConfig&) const = default;
};

struct RunConfig {
  SynthConfig synth;
  TrainConfig train;
  EvalConfig eval;
  PlotConfig plot;
  bool operator==(const RunConfig&) const = default;
};

/// Parses JSON. Every field is optional; unknown keys and wrongly typed values
/// throw ConfigError naming the key path.
RunConfig parse_run_config(const std::string& text);
/// Pretty-printed JSON containing every field.
std::string emit_run_config(const RunConfig& cfg);
RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const std::filesystem::path& path, const RunConfig& cfg);

/// Merges a JSON document over `base`: keys present in `text` replace the
/// corresponding fields, everything else is kept.
RunConfig merge_run_config(RunConfig base, const std::string& text);

std::string emit_train_config(const TrainConfig& cfg);
TrainConfig parse_train_config(const std::string& text);

const std::vector<std::string>& preset_names();
/// Desk-scale experiment presets. Throws ConfigError for unknown names.
RunConfig preset(std::string_view name);

}  // namespace windscale
