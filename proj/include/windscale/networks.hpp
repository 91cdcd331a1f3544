#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace windscale {

/// VGG-style critic: pairs of 3x3 convolutions (stride 1 then stride 2) whose
/// width doubles per stage, followed by a pooled dense scoring head.
struct CriticSpec {
  std::int64_t in_channels = 2;
  std::int64_t base_width = 64;
  std::int64_t n_stride2_stages = 4;
  std::int64_t head_width = 1024;
  double leaky_slope = 0.2;

  bool operator==(const CriticSpec&) const = default;
  /// Smallest spatial extent the stride-2 stages accept.
  std::int64_t min_extent() const { return std::int64_t{1} << n_stride2_stages; }
};

/// Covariate-conditioned UNET generator around a stack of residual-in-residual
/// dense blocks. `cov_channels == 0` removes the covariate encoder and all
/// skip connections (unconditional baseline).
struct GeneratorSpec {
  std::int64_t lr_channels = 7;
  std::int64_t cov_channels = 3;
  std::int64_t out_channels = 2;
  std::int64_t n_rrdb = 16;
  std::int64_t trunk_width = 64;
  std::int64_t growth = 32;
  std::int64_t dense_layers = 5;
  std::int64_t dense_blocks = 3;
  double residual_scale = 0.2;
  std::array<std::int64_t, 3> cov_widths{16, 32, 64};
  double leaky_slope = 0.2;

  bool operator==(const GeneratorSpec&) const = default;
  bool conditional() const { return cov_channels > 0; }
};

/// Throws ConfigError on inconsistent widths.
void check_spec(const CriticSpec& spec);
void check_spec(const GeneratorSpec& spec);

// ----------------------------------------------------------------------------
// Channel/space rearrangement
// ----------------------------------------------------------------------------

/// (B, C*r*r, H, W) -> (B, C, r*H, r*W) with
/// out[b, c, r*i + di, r*j + dj] = in[b, c*r*r + di*r + dj, i, j].
torch::Tensor pixel_shuffle(const torch::Tensor& x, std::int64_t r = 2);
/// Exact inverse of pixel_shuffle.
torch::Tensor pixel_unshuffle(const torch::Tensor& x, std::int64_t r = 2);

// ----------------------------------------------------------------------------
// Building blocks
// ----------------------------------------------------------------------------

class DenseBlockImpl : public torch::nn::Module {
 public:
  DenseBlockImpl(std::int64_t width, std::int64_t growth, std::int64_t layers, double slope,
                 double residual_scale);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  std::vector<torch::nn::Conv2d> convs_;
  double slope_;
  double scale_;
};
TORCH_MODULE(DenseBlock);

/// Residual-in-residual dense block: dense blocks chained inside an outer
/// scaled residual. Output shape equals input shape.
class RRDBImpl : public torch::nn::Module {
 public:
  RRDBImpl(std::int64_t width, std::int64_t growth, std::int64_t layers, std::int64_t blocks,
           double slope, double residual_scale);
  torch::Tensor forward(const torch::Tensor& x);
  std::int64_t width() const { return width_; }

 private:
  torch::nn::Sequential blocks_{nullptr};
  std::int64_t width_;
  double scale_;
};
TORCH_MODULE(RRDB);

// ----------------------------------------------------------------------------
// Critic
// ----------------------------------------------------------------------------

class CriticImpl : public torch::nn::Module {
 public:
  explicit CriticImpl(CriticSpec spec = {});
  /// (B, C, H, W) -> (B,) unbounded scores. H, W >= spec.min_extent().
  torch::Tensor forward(const torch::Tensor& fields);
  const CriticSpec& spec() const { return spec_; }

 private:
  CriticSpec spec_;
  std::vector<torch::nn::Conv2d> convs_;
  torch::nn::Linear dense1_{nullptr};
  torch::nn::Linear dense2_{nullptr};
};
TORCH_MODULE(Critic);

// ----------------------------------------------------------------------------
// Generator
// ----------------------------------------------------------------------------

class GeneratorImpl : public torch::nn::Module {
 public:
  explicit GeneratorImpl(GeneratorSpec spec = {});

  /// low (B, lr_channels, h, w); cov (cov_channels, 8h, 8w) shared by the
  /// batch, or (B, cov_channels, 8h, 8w) per item. Returns (B, out, 8h, 8w).
  /// `cov` is ignored (may be undefined) for an unconditional spec.
  torch::Tensor forward(const torch::Tensor& low, const torch::Tensor& cov);
  const GeneratorSpec& spec() const { return spec_; }

  /// Upper bound, in coarse cells, on how far from an output cell an input can
  /// influence it. Tiled inference with at least this halo reproduces
  /// whole-domain inference.
  std::int64_t receptive_radius() const;

 private:
  struct EncoderStage {
    torch::nn::Conv2d down{nullptr};
    torch::nn::Conv2d conv{nullptr};
  };
  struct UpStage {
    torch::nn::Conv2d expand{nullptr};
    torch::nn::Conv2d refine{nullptr};
  };

  torch::Tensor act(const torch::Tensor& x) const;

  GeneratorSpec spec_;
  std::vector<EncoderStage> encoder_;
  torch::nn::Conv2d head_{nullptr};
  torch::nn::Conv2d fuse_{nullptr};
  torch::nn::Sequential trunk_{nullptr};
  torch::nn::Conv2d trunk_conv_{nullptr};
  std::vector<UpStage> up_;
  torch::nn::Conv2d out1_{nullptr};
  torch::nn::Conv2d out2_{nullptr};
};
TORCH_MODULE(Generator);

// ----------------------------------------------------------------------------
// Parameter utilities
// ----------------------------------------------------------------------------

/// Kaiming fan-in initialization for LeakyReLU stacks, zero biases. The parameter
/// named "out2.weight" (the generator's final conv) use N(0, 0.01).
void initialize_parameters(torch::nn::Module& module, std::uint64_t seed, double leaky_slope = 0.2);

std::int64_t parameter_count(const torch::nn::Module& module);
/// FNV-1a over the raw bytes of every parameter, in registration order.
std::uint64_t parameter_hash(const torch::nn::Module& module);
/// Top-level parameter groups (first path component of the parameter name).
std::vector<std::string> parameter_groups(const torch::nn::Module& module);

}  // namespace windscale
