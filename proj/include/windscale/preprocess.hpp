#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "windscale/grid.hpp"

namespace windscale {

/// Nearest-neighbour regrid under uniform index mapping: destination cell i
/// reads source cell floor((i + 0.5) * src / dst).
FieldGrid regrid_nearest(const FieldGrid& src, std::int64_t dst_height, std::int64_t dst_width);

enum class ReduceMode { BlockMean, Strided };

/// Factor-k coarsening. BlockMean averages each k x k block; Strided picks the
/// cell at offset k/2 inside each block.
FieldGrid reduce_by_factor(const FieldGrid& src, std::int64_t k,
                           ReduceMode mode = ReduceMode::BlockMean);

/// Replicates each cell into a k x k block.
FieldGrid upsample_nearest(const FieldGrid& src, std::int64_t k);

/// Bilinear interpolation with cell-centre alignment (fine centre (j + 0.5)/k - 0.5
/// in coarse index units), clamped at the borders.
FieldGrid upsample_bilinear(const FieldGrid& src, std::int64_t k);

// Tensor-level kernels shared with the training pipeline. All operate on the
// trailing two dimensions of a float64 tensor.
torch::Tensor block_mean(const torch::Tensor& x, std::int64_t k);
torch::Tensor replicate_blocks(const torch::Tensor& x, std::int64_t k);
torch::Tensor bilinear_cell_centre(const torch::Tensor& x, std::int64_t k);

// ----------------------------------------------------------------------------
// Normalization
// ----------------------------------------------------------------------------

enum class NormTransform { Identity, Log1p };

struct ChannelStats {
  Variable channel;
  NormTransform transform = NormTransform::Identity;
  double mean = 0.0;
  double std = 1.0;

  bool operator==(const ChannelStats&) const = default;
};

/// Per-channel standardization statistics fitted on the training split.
struct NormStats {
  std::vector<ChannelStats> channels;

  const ChannelStats& at(Variable v) const;
  bool operator==(const NormStats&) const = default;
};

/// Orography and roughness length are log1p-transformed before standardizing.
NormTransform default_transform(Variable v);

/// Statistics over every predictor, predictand and covariate channel of the
/// given training pairs. Throws ConfigError naming any zero-variance channel.
NormStats fit_norm(std::span<const SamplePair> train);

FieldGrid apply_norm(const FieldGrid& grid, const NormStats& stats);
FieldGrid invert_norm(const FieldGrid& grid, const NormStats& stats);

/// Tensor variants for (..., C, H, W) arrays whose channel order is `channels`.
torch::Tensor apply_norm(const torch::Tensor& x, std::span<const Variable> channels,
                         const NormStats& stats);
torch::Tensor invert_norm(const torch::Tensor& x, std::span<const Variable> channels,
                          const NormStats& stats);

SamplePair normalize_pair(const SamplePair& pair, const NormStats& stats);

/// Plain text, one line per channel: `name transform mean std`.
std::string format_norm_stats(const NormStats& stats);
NormStats parse_norm_stats(const std::string& text);
void save_norm_stats(const std::filesystem::path& path, const NormStats& stats);
NormStats load_norm_stats(const std::filesystem::path& path);

}  // namespace windscale
