#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <utility>

#include <torch/torch.h>

namespace windscale {

enum class FsMode { None, FS, PFS };

std::string_view fs_mode_name(FsMode mode);
FsMode parse_fs_mode(std::string_view name);

/// Weights of the adversarial objective and the frequency-separation setup.
struct LossConfig {
  double lambda_gp = 10.0;
  double gamma_adv = 0.01;
  double alpha_content = 5.0;
  FsMode fs_mode = FsMode::None;
  std::int64_t fs_kernel = 5;
  /// PFS variant where the critic scores high-pass residuals (as in FS) while
  /// the generator's adversarial term still uses full fields.
  bool pfs_filtered_critic = false;

  bool operator==(const LossConfig&) const = default;
};

/// Throws ConfigError unless lambda > 0, gamma >= 0, alpha >= 0 and, with
/// frequency separation, the kernel is odd and >= 3. lambda = 0 is accepted
/// together with gamma = 0 (supervised training).
void check_config(const LossConfig& cfg);

/// "none", "fs:5", "pfs:13". Parses the same strings.
std::string describe(const LossConfig& cfg);
LossConfig with_mode(LossConfig base, std::string_view mode_kernel);

/// Scalar summary of one critic or generator evaluation. Weighted terms sum to
/// the corresponding total: critic_loss = adv_term + lambda * gp_term and
/// generator_loss = gamma * adv_term + alpha * content_term.
struct LossReport {
  double critic_loss = 0.0;
  double generator_loss = 0.0;
  double gp_term = 0.0;
  double adv_term = 0.0;
  double content_term = 0.0;
  /// E[C(real)] - E[C(fake)].
  double wasserstein_estimate = 0.0;
  FsMode mode = FsMode::None;
  /// True when the content term compared low-pass fields.
  bool content_lowpass = false;
};

/// Differentiable loss plus its scalar report.
struct LossResult {
  torch::Tensor loss;
  LossReport report;
};

using CriticFn = std::function<torch::Tensor(const torch::Tensor&)>;

/// k x k box mean with reflection padding over the last two dimensions.
torch::Tensor lowpass(const torch::Tensor& x, std::int64_t k);

struct FrequencyParts {
  torch::Tensor low;
  torch::Tensor high;
};
/// low = lowpass(x, k), high = x - low.
FrequencyParts split_frequencies(const torch::Tensor& x, std::int64_t k);

/// Mean squared error over every element.
torch::Tensor content_loss(const torch::Tensor& target, const torch::Tensor& output);

/// One interpolation weight per batch item, drawn from U[0, 1].
torch::Tensor draw_epsilon(std::int64_t batch, std::mt19937_64& rng,
                           torch::ScalarType dtype = torch::kFloat32);

/// E_b[(||grad C(eps*real + (1-eps)*fake)||_2 - 1)^2] with the norm over all
/// entries of each item. `eps` has shape (B,). Differentiable w.r.t. the
/// critic parameters (double backward).
torch::Tensor gradient_penalty(const CriticFn& critic, const torch::Tensor& real,
                               const torch::Tensor& fake, const torch::Tensor& eps);

/// Critic objective. `fake` must already be detached from the generator.
LossResult critic_loss(const CriticFn& critic, const torch::Tensor& real,
                       const torch::Tensor& fake, const LossConfig& cfg,
                       const torch::Tensor& eps);

/// Generator objective; `gen_out` stays attached to the generator graph.
LossResult generator_loss(const CriticFn& critic, const torch::Tensor& gen_out,
                          const torch::Tensor& target, const LossConfig& cfg);

}  // namespace windscale
