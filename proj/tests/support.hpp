#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "windscale/grid.hpp"
#include "windscale/networks.hpp"
#include "windscale/synth.hpp"
#include "windscale/training.hpp"

namespace windscale {

/// Lets doctest print Variable vectors in failure messages.
inline std::ostream& operator<<(std::ostream& os, Variable v) { return os << variable_name(v); }

}  // namespace windscale

namespace wt {

using namespace windscale;

/// Networks small enough for per-test construction; still exercise every
/// block type (encoder, RRDB trunk, three shuffle stages, four critic stages).
inline GeneratorSpec tiny_generator(bool conditional = true) {
  GeneratorSpec g;
  g.cov_channels = conditional ? 3 : 0;
  g.n_rrdb = 1;
  g.trunk_width = 8;
  g.growth = 4;
  g.dense_layers = 2;
  g.dense_blocks = 1;
  g.cov_widths = {4, 4, 8};
  return g;
}

inline CriticSpec tiny_critic() {
  CriticSpec c;
  c.base_width = 4;
  c.head_width = 8;
  return c;
}

/// 6 batches per step: one full 5:1 round.
inline TrainConfig tiny_train_config() {
  TrainConfig cfg;
  cfg.generator = tiny_generator();
  cfg.critic = tiny_critic();
  cfg.crop_size_hr = 16;
  cfg.crops_per_pair = 12;
  cfg.batch_size = 2;
  cfg.val_crops_per_pair = 4;
  cfg.max_steps = 4;
  cfg.val_every = 2;
  cfg.fp64 = true;
  cfg.seed = 3;
  return cfg;
}

inline SynthConfig small_synth(std::int64_t hours = 12, std::int64_t side = 64) {
  SynthConfig cfg;
  cfg.height = side;
  cfg.width = side;
  cfg.n_hours = hours;
  return cfg;
}

/// Dataset built once per test binary; generation is deterministic.
inline const Dataset& shared_dataset() {
  static const Dataset data = make_dataset(small_synth());
  return data;
}

inline torch::Tensor randn64(std::vector<std::int64_t> shape, std::uint64_t seed) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  return torch::randn(shape, gen, torch::TensorOptions().dtype(torch::kFloat64));
}

inline double max_abs(const torch::Tensor& x) { return x.abs().max().item<double>(); }

inline double max_rel_diff(const torch::Tensor& a, const torch::Tensor& b) {
  return max_abs(a - b) / std::max(max_abs(a), 1e-300);
}

/// Scratch directory removed on scope exit.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() /
           ("windscale_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

struct GradCheck {
  std::int64_t checked = 0;
  double worst_rel = 0.0;
};

/// Autodiff vs central differences on `samples` scalar parameter entries
/// drawn across every parameter tensor of `module`. `loss` must be a
/// deterministic float64 scalar function of the module's parameters.
/// Relative error is |g_ad - g_fd| / max(|g_ad|, |g_fd|, floor).
template <class LossFn>
GradCheck finite_difference_check(torch::nn::Module& module, LossFn loss, std::int64_t samples,
                                  std::uint64_t seed, double h = 1e-6, double floor = 1e-6) {
  auto params = module.parameters();
  for (auto& p : params) p.mutable_grad() = torch::Tensor();
  auto value = loss();
  value.backward();

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_tensor(0, params.size() - 1);
  GradCheck out;
  torch::NoGradGuard no_grad;
  for (std::int64_t s = 0; s < samples; ++s) {
    auto& p = params[pick_tensor(rng)];
    std::uniform_int_distribution<std::int64_t> pick(0, p.numel() - 1);
    const auto idx = pick(rng);
    auto flat = p.view({-1});
    const double ad = p.grad().view({-1})[idx].item<double>();
    const double orig = flat[idx].item<double>();
    flat[idx] = orig + h;
    const double up = loss().template item<double>();
    flat[idx] = orig - h;
    const double down = loss().template item<double>();
    flat[idx] = orig;
    const double fd = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(ad), std::abs(fd), floor});
    out.worst_rel = std::max(out.worst_rel, std::abs(ad - fd) / denom);
    ++out.checked;
  }
  return out;
}

}  // namespace wt
