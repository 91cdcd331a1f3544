#include "windscale/losses.hpp"

#include <sstream>

#include "windscale/error.hpp"

namespace windscale {

namespace F = torch::nn::functional;

std::string_view fs_mode_name(FsMode mode) {
  switch (mode) {
    case FsMode::None:
      return "none";
    case FsMode::FS:
      return "fs";
    case FsMode::PFS:
      return "pfs";
  }
  return "none";
}

FsMode parse_fs_mode(std::string_view name) {
  if (name == "none" || name == "nfs") return FsMode::None;
  if (name == "fs") return FsMode::FS;
  if (name == "pfs") return FsMode::PFS;
  throw ConfigError("unknown frequency-separation mode '" + std::string(name) +
                    "' (expected none, fs or pfs)");
}

void check_config(const LossConfig& cfg) {
  if (!(cfg.gamma_adv >= 0.0)) throw ConfigError("gamma_adv must be >= 0");
  // lambda = 0 is only meaningful for the purely supervised setting, where
  // the critic has no influence on the generator.
  const bool supervised = cfg.gamma_adv == 0.0;
  if (!(cfg.lambda_gp > 0.0) && !(supervised && cfg.lambda_gp == 0.0)) {
    throw ConfigError("lambda_gp must be > 0");
  }
  if (!(cfg.alpha_content >= 0.0)) throw ConfigError("alpha_content must be >= 0");
  if (cfg.fs_mode != FsMode::None && (cfg.fs_kernel < 3 || cfg.fs_kernel % 2 == 0)) {
    throw ConfigError("fs_kernel must be odd and >= 3, got " + std::to_string(cfg.fs_kernel));
  }
}

std::string describe(const LossConfig& cfg) {
  if (cfg.fs_mode == FsMode::None) return "none";
  return std::string(fs_mode_name(cfg.fs_mode)) + ":" + std::to_string(cfg.fs_kernel);
}

LossConfig with_mode(LossConfig base, std::string_view mode_kernel) {
  auto colon = mode_kernel.find(':');
  base.fs_mode = parse_fs_mode(mode_kernel.substr(0, colon));
  if (colon != std::string_view::npos) {
    const std::string digits(mode_kernel.substr(colon + 1));
    try {
      std::size_t used = 0;
      base.fs_kernel = std::stoll(digits, &used);
      if (used != digits.size()) throw std::invalid_argument(digits);
    } catch (const std::exception&) {
      throw ConfigError("invalid filter kernel '" + digits + "'");
    }
  } else if (base.fs_mode != FsMode::None) {
    throw ConfigError("frequency separation needs a kernel size, e.g. fs:5");
  }
  check_config(base);
  return base;
}

// ----------------------------------------------------------------------------

torch::Tensor lowpass(const torch::Tensor& x, std::int64_t k) {
  if (k < 1 || k % 2 == 0) throw ConfigError("low-pass kernel must be odd, got " + std::to_string(k));
  if (x.dim() < 2) throw ShapeError("low-pass input needs at least two dimensions");
  const auto h = x.size(-2), w = x.size(-1);
  if (k > h || k > w) {
    throw ShapeError("low-pass kernel " + std::to_string(k) + " exceeds field size " +
                     std::to_string(h) + "x" + std::to_string(w));
  }
  if (k == 1) return x;
  const auto pad = k / 2;
  auto flat = x.reshape({-1, 1, h, w});
  auto padded = F::pad(flat, F::PadFuncOptions({pad, pad, pad, pad}).mode(torch::kReflect));
  auto smoothed = F::avg_pool2d(padded, F::AvgPool2dFuncOptions(k).stride(1));
  return smoothed.reshape(x.sizes());
}

FrequencyParts split_frequencies(const torch::Tensor& x, std::int64_t k) {
  auto low = lowpass(x, k);
  return {low, x - low};
}

torch::Tensor content_loss(const torch::Tensor& target, const torch::Tensor& output) {
  if (target.sizes() != output.sizes()) throw ShapeError("content loss operands differ in shape");
  return (output - target).square().mean();
}

torch::Tensor draw_epsilon(std::int64_t batch, std::mt19937_64& rng, torch::ScalarType dtype) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> values(static_cast<std::size_t>(batch));
  for (auto& v : values) v = unit(rng);
  return torch::tensor(values, torch::kFloat64).to(dtype);
}

torch::Tensor gradient_penalty(const CriticFn& critic, const torch::Tensor& real,
                               const torch::Tensor& fake, const torch::Tensor& eps) {
  if (real.sizes() != fake.sizes()) throw ShapeError("gradient penalty: real/fake shapes differ");
  if (eps.dim() != 1 || eps.size(0) != real.size(0)) {
    throw ShapeError("gradient penalty: need one epsilon per batch item");
  }
  std::vector<std::int64_t> bshape(static_cast<std::size_t>(real.dim()), 1);
  bshape[0] = real.size(0);
  auto e = eps.to(real.scalar_type()).reshape(bshape);
  auto mixed = (e * real.detach() + (1.0 - e) * fake.detach()).requires_grad_(true);
  auto scores = critic(mixed);
  if (!torch::isfinite(scores).all().item<bool>()) {
    throw NumericError("critic produced non-finite scores in the gradient penalty");
  }
  torch::Tensor grad;
  if (scores.requires_grad()) {
    auto grads = torch::autograd::grad({scores.sum()}, {mixed}, {}, /*retain_graph=*/true,
                                       /*create_graph=*/true, /*allow_unused=*/true);
    grad = grads[0];
  }
  if (!grad.defined()) grad = torch::zeros_like(mixed);
  auto norms = grad.reshape({grad.size(0), -1}).norm(2, 1);
  return (norms - 1.0).square().mean();
}

namespace {

void require_finite(const torch::Tensor& t, const char* term) {
  if (!std::isfinite(t.item<double>())) {
    throw NumericError(std::string("non-finite ") + term);
  }
}

}  // namespace

LossResult critic_loss(const CriticFn& critic, const torch::Tensor& real,
                       const torch::Tensor& fake, const LossConfig& cfg,
                       const torch::Tensor& eps) {
  if (real.sizes() != fake.sizes()) throw ShapeError("critic loss: real/fake shapes differ");
  const bool filtered =
      cfg.fs_mode == FsMode::FS || (cfg.fs_mode == FsMode::PFS && cfg.pfs_filtered_critic);
  auto r = real.detach();
  auto f = fake.detach();
  if (filtered) {
    r = split_frequencies(r, cfg.fs_kernel).high;
    f = split_frequencies(f, cfg.fs_kernel).high;
  }
  auto score_real = critic(r).mean();
  auto score_fake = critic(f).mean();
  auto adv = score_fake - score_real;
  auto gp = gradient_penalty(critic, r, f, eps);
  auto total = adv + cfg.lambda_gp * gp;

  LossResult out;
  out.loss = total;
  auto& rep = out.report;
  rep.mode = cfg.fs_mode;
  rep.adv_term = adv.item<double>();
  rep.gp_term = gp.item<double>();
  rep.critic_loss = total.item<double>();
  rep.wasserstein_estimate = -rep.adv_term;
  require_finite(adv, "critic adversarial term");
  require_finite(gp, "gradient penalty");
  return out;
}

LossResult generator_loss(const CriticFn& critic, const torch::Tensor& gen_out,
                          const torch::Tensor& target, const LossConfig& cfg) {
  if (gen_out.sizes() != target.sizes()) throw ShapeError("generator loss: shapes differ");
  const auto t = target.detach();
  torch::Tensor adv_input = gen_out;
  torch::Tensor content;
  bool lowpass_content = false;
  switch (cfg.fs_mode) {
    case FsMode::None:
      content = content_loss(t, gen_out);
      break;
    case FsMode::FS: {
      auto parts = split_frequencies(gen_out, cfg.fs_kernel);
      adv_input = parts.high;
      content = content_loss(lowpass(t, cfg.fs_kernel), parts.low);
      lowpass_content = true;
      break;
    }
    case FsMode::PFS:
      content = content_loss(lowpass(t, cfg.fs_kernel), lowpass(gen_out, cfg.fs_kernel));
      lowpass_content = true;
      break;
  }
  torch::Tensor adv;
  if (cfg.gamma_adv > 0.0) {
    adv = -critic(adv_input).mean();
  } else {
    // Skip the critic pass entirely in the purely supervised setting.
    adv = torch::zeros({}, gen_out.options());
  }
  auto total = cfg.gamma_adv * adv + cfg.alpha_content * content;

  LossResult out;
  out.loss = total;
  auto& rep = out.report;
  rep.mode = cfg.fs_mode;
  rep.adv_term = adv.item<double>();
  rep.content_term = content.item<double>();
  rep.generator_loss = total.item<double>();
  rep.content_lowpass = lowpass_content;
  require_finite(adv, "generator adversarial term");
  require_finite(content, "content term");
  return out;
}

}  // namespace windscale
