#include "windscale/networks.hpp"

#include <cmath>
#include <cstring>
#include <ATen/CPUGeneratorImpl.h>
#include <set>
#include <sstream>

#include "windscale/error.hpp"

namespace windscale {

namespace F = torch::nn::functional;

namespace {

torch::nn::Conv2d conv3x3(std::int64_t in, std::int64_t out, std::int64_t stride = 1) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).stride(stride).padding(1));
}

torch::nn::Conv2d conv1x1(std::int64_t in, std::int64_t out) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 1));
}

std::string shape_of(const torch::Tensor& t) {
  std::ostringstream s;
  s << t.sizes();
  return s.str();
}

}  // namespace

void check_spec(const CriticSpec& spec) {
  if (spec.in_channels < 1 || spec.base_width < 1 || spec.n_stride2_stages < 1 ||
      spec.head_width < 1) {
    throw ConfigError("critic widths and stage count must be positive");
  }
}

void check_spec(const GeneratorSpec& spec) {
  if (spec.lr_channels < 1 || spec.out_channels < 1 || spec.cov_channels < 0 ||
      spec.n_rrdb < 0 || spec.growth < 1 || spec.dense_layers < 2 || spec.dense_blocks < 1) {
    throw ConfigError("generator channel counts and block counts must be positive");
  }
  if (spec.trunk_width < 4 || spec.trunk_width % 4 != 0) {
    throw ConfigError("generator trunk width must be a positive multiple of 4 (pixel shuffle)");
  }
  for (auto w : spec.cov_widths) {
    if (w < 1) throw ConfigError("covariate encoder widths must be positive");
  }
}

// ----------------------------------------------------------------------------

torch::Tensor pixel_shuffle(const torch::Tensor& x, std::int64_t r) {
  if (x.dim() != 4) throw ShapeError("pixel_shuffle expects (B, C, H, W), got " + shape_of(x));
  const auto b = x.size(0), c = x.size(1), h = x.size(2), w = x.size(3);
  if (r < 1 || c % (r * r) != 0) {
    throw ShapeError("pixel_shuffle: " + std::to_string(c) + " channels not divisible by " +
                     std::to_string(r * r));
  }
  const auto oc = c / (r * r);
  return x.reshape({b, oc, r, r, h, w}).permute({0, 1, 4, 2, 5, 3}).reshape({b, oc, h * r, w * r});
}

torch::Tensor pixel_unshuffle(const torch::Tensor& x, std::int64_t r) {
  if (x.dim() != 4) throw ShapeError("pixel_unshuffle expects (B, C, H, W), got " + shape_of(x));
  const auto b = x.size(0), c = x.size(1), h = x.size(2), w = x.size(3);
  if (r < 1 || h % r != 0 || w % r != 0) {
    throw ShapeError("pixel_unshuffle: spatial size not divisible by " + std::to_string(r));
  }
  return x.reshape({b, c, h / r, r, w / r, r})
      .permute({0, 1, 3, 5, 2, 4})
      .reshape({b, c * r * r, h / r, w / r});
}

// ----------------------------------------------------------------------------

DenseBlockImpl::DenseBlockImpl(std::int64_t width, std::int64_t growth, std::int64_t layers,
                               double slope, double residual_scale)
    : slope_(slope), scale_(residual_scale) {
  for (std::int64_t i = 0; i < layers; ++i) {
    const auto in = width + i * growth;
    const auto out = (i + 1 == layers) ? width : growth;
    convs_.push_back(register_module("conv" + std::to_string(i), conv3x3(in, out)));
  }
}

torch::Tensor DenseBlockImpl::forward(const torch::Tensor& x) {
  std::vector<torch::Tensor> features{x};
  for (std::size_t i = 0; i + 1 < convs_.size(); ++i) {
    auto y = F::leaky_relu(convs_[i]->forward(torch::cat(features, 1)),
                           F::LeakyReLUFuncOptions().negative_slope(slope_));
    features.push_back(y);
  }
  return x + scale_ * convs_.back()->forward(torch::cat(features, 1));
}

RRDBImpl::RRDBImpl(std::int64_t width, std::int64_t growth, std::int64_t layers,
                   std::int64_t blocks, double slope, double residual_scale)
    : width_(width), scale_(residual_scale) {
  blocks_ = register_module("blocks", torch::nn::Sequential());
  for (std::int64_t i = 0; i < blocks; ++i) {
    blocks_->push_back(DenseBlock(width, growth, layers, slope, residual_scale));
  }
}

torch::Tensor RRDBImpl::forward(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(1) != width_) {
    throw ShapeError("RRDB expects " + std::to_string(width_) + " channels, got " + shape_of(x));
  }
  return x + scale_ * blocks_->forward(x);
}

// ----------------------------------------------------------------------------

CriticImpl::CriticImpl(CriticSpec spec) : spec_(spec) {
  check_spec(spec_);
  std::int64_t in = spec_.in_channels;
  std::int64_t width = spec_.base_width;
  for (std::int64_t stage = 0; stage < spec_.n_stride2_stages; ++stage) {
    convs_.push_back(register_module("conv" + std::to_string(2 * stage), conv3x3(in, width, 1)));
    convs_.push_back(
        register_module("conv" + std::to_string(2 * stage + 1), conv3x3(width, width, 2)));
    in = width;
    if (stage + 1 < spec_.n_stride2_stages) width *= 2;
  }
  dense1_ = register_module("dense1", torch::nn::Linear(in, spec_.head_width));
  dense2_ = register_module("dense2", torch::nn::Linear(spec_.head_width, 1));
}

torch::Tensor CriticImpl::forward(const torch::Tensor& fields) {
  if (fields.dim() != 4 || fields.size(1) != spec_.in_channels) {
    throw ShapeError("critic expects (B, " + std::to_string(spec_.in_channels) +
                     ", H, W) input, got " + shape_of(fields));
  }
  if (fields.size(2) < spec_.min_extent() || fields.size(3) < spec_.min_extent()) {
    throw ShapeError("critic input must be at least " + std::to_string(spec_.min_extent()) +
                     " cells on each side, got " + shape_of(fields));
  }
  const auto lrelu = F::LeakyReLUFuncOptions().negative_slope(spec_.leaky_slope);
  auto x = fields;
  for (auto& conv : convs_) x = F::leaky_relu(conv->forward(x), lrelu);
  x = x.mean({2, 3});
  x = F::leaky_relu(dense1_->forward(x), lrelu);
  return dense2_->forward(x).squeeze(1);
}

// ----------------------------------------------------------------------------

GeneratorImpl::GeneratorImpl(GeneratorSpec spec) : spec_(spec) {
  check_spec(spec_);
  const auto width = spec_.trunk_width;
  const bool cond = spec_.conditional();

  if (cond) {
    std::int64_t in = spec_.cov_channels;
    for (std::size_t i = 0; i < spec_.cov_widths.size(); ++i) {
      EncoderStage stage;
      const auto w = spec_.cov_widths[i];
      stage.down = register_module("encoder" + std::to_string(i) + "_down", conv3x3(in, w, 2));
      stage.conv = register_module("encoder" + std::to_string(i) + "_conv", conv3x3(w, w, 1));
      encoder_.push_back(stage);
      in = w;
    }
  }
  head_ = register_module("head", conv3x3(spec_.lr_channels, width));
  fuse_ = register_module("fuse", conv1x1(width + (cond ? spec_.cov_widths[2] : 0), width));
  trunk_ = register_module("trunk", torch::nn::Sequential());
  for (std::int64_t i = 0; i < spec_.n_rrdb; ++i) {
    trunk_->push_back(RRDB(width, spec_.growth, spec_.dense_layers, spec_.dense_blocks,
                           spec_.leaky_slope, spec_.residual_scale));
  }
  trunk_conv_ = register_module("trunk_conv", conv3x3(width, width));
  for (std::size_t s = 0; s < 3; ++s) {
    // Upsampling stage s runs at 2^s times the coarse resolution and receives
    // the encoder output of the same resolution (encoder stage 2 - s).
    const auto skip = cond ? spec_.cov_widths[2 - s] : 0;
    UpStage stage;
    stage.expand = register_module("up" + std::to_string(s) + "_expand", conv3x3(width + skip, width));
    stage.refine = register_module("up" + std::to_string(s) + "_refine", conv3x3(width / 4, width));
    up_.push_back(stage);
  }
  out1_ = register_module("out1", conv3x3(width, width));
  out2_ = register_module("out2", conv3x3(width, spec_.out_channels));
}

torch::Tensor GeneratorImpl::act(const torch::Tensor& x) const {
  return F::leaky_relu(x, F::LeakyReLUFuncOptions().negative_slope(spec_.leaky_slope));
}

torch::Tensor GeneratorImpl::forward(const torch::Tensor& low, const torch::Tensor& cov) {
  if (low.dim() != 4 || low.size(1) != spec_.lr_channels) {
    throw ShapeError("generator expects low-resolution input (B, " +
                     std::to_string(spec_.lr_channels) + ", h, w), got " + shape_of(low));
  }
  const auto batch = low.size(0), h = low.size(2), w = low.size(3);
  if (h < 2 || w < 2) throw ShapeError("generator input must be at least 2x2, got " + shape_of(low));

  std::array<torch::Tensor, 3> skips;
  if (spec_.conditional()) {
    if (!cov.defined()) throw ShapeError("conditional generator requires covariates");
    auto c = cov.dim() == 3 ? cov.unsqueeze(0) : cov;
    if (c.dim() != 4 || c.size(1) != spec_.cov_channels) {
      throw ShapeError("covariates must be (" + std::to_string(spec_.cov_channels) +
                       ", H, W) or (B, " + std::to_string(spec_.cov_channels) + ", H, W), got " +
                       shape_of(cov));
    }
    if (c.size(2) != 8 * h) {
      throw ShapeError("covariate height " + std::to_string(c.size(2)) + " != 8 x low height " +
                       std::to_string(h));
    }
    if (c.size(3) != 8 * w) {
      throw ShapeError("covariate width " + std::to_string(c.size(3)) + " != 8 x low width " +
                       std::to_string(w));
    }
    if (c.size(0) != 1 && c.size(0) != batch) {
      throw ShapeError("covariate batch " + std::to_string(c.size(0)) + " != input batch " +
                       std::to_string(batch));
    }
    for (std::size_t i = 0; i < encoder_.size(); ++i) {
      c = act(encoder_[i].conv->forward(act(encoder_[i].down->forward(c))));
      // Static covariates are encoded once and broadcast over the batch.
      skips[i] = c.size(0) == batch ? c : c.expand({batch, -1, -1, -1});
    }
  }

  auto feat = head_->forward(low);
  if (spec_.conditional()) feat = torch::cat({feat, skips[2]}, 1);
  auto fused = fuse_->forward(feat);
  auto x = fused + trunk_conv_->forward(trunk_->forward(fused));

  for (std::size_t s = 0; s < up_.size(); ++s) {
    if (spec_.conditional()) x = torch::cat({x, skips[2 - s]}, 1);
    x = act(up_[s].expand->forward(x));
    x = act(up_[s].refine->forward(windscale::pixel_shuffle(x, 2)));
  }
  return out2_->forward(act(out1_->forward(x)));
}

std::int64_t GeneratorImpl::receptive_radius() const {
  // Each 3x3 convolution adds one cell at its own resolution; express in
  // coarse cells (resolution 2^s has cells of size 1 / 2^s).
  double output = 2.0 / 8.0;                               // out1, out2
  double up = (1.0 + 0.5) + (0.5 + 0.25) + (0.25 + 0.125);  // expand + refine per stage
  double trunk = 1.0 + static_cast<double>(spec_.n_rrdb * spec_.dense_blocks * spec_.dense_layers);
  double head = 1.0;
  double encoder = spec_.conditional() ? (0.125 + 0.25) + (0.25 + 0.5) + (0.5 + 1.0) : 0.0;
  double total = output + up + trunk + std::max(head, encoder);
  return static_cast<std::int64_t>(std::ceil(total)) + 2;
}

// ----------------------------------------------------------------------------

void initialize_parameters(torch::nn::Module& module, std::uint64_t seed, double leaky_slope) {
  torch::NoGradGuard no_grad;
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  const double gain = std::sqrt(2.0 / (1.0 + leaky_slope * leaky_slope));
  for (auto& item : module.named_parameters(true)) {
    const auto& name = item.key();
    auto& p = item.value();
    if (name.size() >= 4 && name.compare(name.size() - 4, 4, "bias") == 0) {
      p.zero_();
      continue;
    }
    if (name == "out2.weight") {
      p.normal_(0.0, 0.01, gen);
      continue;
    }
    const auto fan_in = p.numel() / p.size(0);
    p.normal_(0.0, gain / std::sqrt(static_cast<double>(fan_in)), gen);
  }
}

std::int64_t parameter_count(const torch::nn::Module& module) {
  std::int64_t n = 0;
  for (const auto& p : module.parameters(true)) n += p.numel();
  return n;
}

std::uint64_t parameter_hash(const torch::nn::Module& module) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const auto& p : module.parameters(true)) {
    auto c = p.detach().contiguous();
    const auto* bytes = static_cast<const unsigned char*>(c.data_ptr());
    const auto n = static_cast<std::size_t>(c.numel()) * c.element_size();
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001B3ULL;
    }
  }
  return h;
}

std::vector<std::string> parameter_groups(const torch::nn::Module& module) {
  std::vector<std::string> groups;
  std::set<std::string> seen;
  for (const auto& item : module.named_parameters(true)) {
    auto name = item.key();
    auto dot = name.find('.');
    auto group = name.substr(0, dot);
    if (seen.insert(group).second) groups.push_back(group);
  }
  return groups;
}

}  // namespace windscale
