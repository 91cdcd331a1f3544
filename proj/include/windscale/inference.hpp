#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <utility>

#include <torch/torch.h>

#include "windscale/grid.hpp"
#include "windscale/networks.hpp"
#include "windscale/preprocess.hpp"

namespace windscale {

using Extent = std::pair<std::int64_t, std::int64_t>;  // (H, W)

/// (k * floor(H / k), k * floor(W / k)). Throws BoundsError when H or W < k.
Extent trim_to_multiple(Extent hw, std::int64_t k = kScaleFactor);

enum class TrimEdge { Trailing, Symmetric };

/// Windows that make the coarse input and the fine reference agree on the
/// factor-8 relation.
struct TrimPlan {
  Extent high;  // reference extent, a multiple of k
  Extent low;   // high / k
  std::int64_t high_top = 0, high_left = 0;
  std::int64_t low_top = 0, low_left = 0;
};

/// The reference is trimmed to a multiple of k and the coarse grid to
/// reference / k. Trailing trimming drops the last rows and columns;
/// symmetric trimming splits the excess of each grid between both edges.
/// Throws ShapeError when the coarse grid is too small for the reference.
TrimPlan plan_trim(Extent low, Extent high, std::int64_t k = kScaleFactor,
                   TrimEdge edge = TrimEdge::Trailing);

/// Frozen generator plus the normalization it was trained with.
class Downscaler {
 public:
  Downscaler(Generator generator, NormStats norm);
  static Downscaler from_checkpoint(const std::filesystem::path& path);

  /// Whole-domain downscaling: trims, normalizes, one forward pass, inverts
  /// normalization. Returns (u10, v10) on the trimmed covariate grid.
  FieldGrid operator()(const FieldGrid& low, const FieldGrid& covariates,
                       TrimEdge edge = TrimEdge::Trailing) const;

  /// Same result assembled from overlapping windows. Each core tile of
  /// `tile` coarse cells is computed with `halo` coarse cells of context
  /// (clamped at the domain edge). halo < 0 selects the receptive radius.
  FieldGrid tiled(const FieldGrid& low, const FieldGrid& covariates, std::int64_t tile,
                  std::int64_t halo = -1) const;

  const Generator& generator() const { return generator_; }
  const NormStats& norm() const { return norm_; }

 private:
  torch::Tensor forward_normalized(const torch::Tensor& low, const torch::Tensor& cov) const;

  Generator generator_;
  NormStats norm_;
};

/// Bilinear or nearest upsampling of the coarse surface winds, relabelled as
/// (u10, v10). With a reference extent, the coarse grid is trimmed first.
enum class BaselineMethod { Bilinear, Nearest };
BaselineMethod parse_baseline(std::string_view name);
FieldGrid downscale_baseline(const FieldGrid& low, BaselineMethod method,
                             std::optional<Extent> reference = std::nullopt);

}  // namespace windscale
