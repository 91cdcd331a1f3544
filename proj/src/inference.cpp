#include "windscale/inference.hpp"

#include "windscale/error.hpp"
#include "windscale/training.hpp"

namespace windscale {

Extent trim_to_multiple(Extent hw, std::int64_t k) {
  if (k < 1) throw ConfigError("trim factor must be >= 1");
  if (hw.first < k || hw.second < k) {
    throw BoundsError("grid " + std::to_string(hw.first) + "x" + std::to_string(hw.second) +
                      " is smaller than the factor " + std::to_string(k));
  }
  return {k * (hw.first / k), k * (hw.second / k)};
}

TrimPlan plan_trim(Extent low, Extent high, std::int64_t k, TrimEdge edge) {
  TrimPlan plan;
  plan.high = trim_to_multiple(high, k);
  plan.low = {plan.high.first / k, plan.high.second / k};
  if (low.first < plan.low.first || low.second < plan.low.second) {
    throw ShapeError("coarse grid " + std::to_string(low.first) + "x" + std::to_string(low.second) +
                     " cannot cover the trimmed reference " + std::to_string(plan.high.first) +
                     "x" + std::to_string(plan.high.second));
  }
  if (edge == TrimEdge::Symmetric) {
    plan.high_top = (high.first - plan.high.first) / 2;
    plan.high_left = (high.second - plan.high.second) / 2;
    plan.low_top = (low.first - plan.low.first) / 2;
    plan.low_left = (low.second - plan.low.second) / 2;
  }
  return plan;
}

namespace {

torch::ScalarType parameter_dtype(const Generator& g) {
  auto params = g->parameters();
  return params.empty() ? torch::kFloat32 : params.front().scalar_type();
}

struct PreparedInput {
  FieldGrid low;
  FieldGrid covariates;  // empty for an unconditional generator
  double spacing_km = 2.5;
};

PreparedInput trim_inputs(const GeneratorSpec& spec, const FieldGrid& low,
                          const FieldGrid& covariates, TrimEdge edge) {
  PreparedInput in;
  auto predictors = low.select(kPredictors);
  const Extent low_hw{predictors.height(), predictors.width()};
  Extent ref_hw{low_hw.first * kScaleFactor, low_hw.second * kScaleFactor};
  FieldGrid cov;
  if (spec.conditional()) {
    if (covariates.empty()) throw ShapeError("conditional generator needs covariates");
    cov = covariates.select(kCovariates);
    ref_hw = {cov.height(), cov.width()};
  }
  auto plan = plan_trim(low_hw, ref_hw, kScaleFactor, edge);
  in.low = predictors.window(plan.low_top, plan.low_left, plan.low.first, plan.low.second);
  if (spec.conditional()) {
    in.covariates = cov.window(plan.high_top, plan.high_left, plan.high.first, plan.high.second);
    in.spacing_km = cov.spacing_km();
  } else {
    in.spacing_km = low.spacing_km() / static_cast<double>(kScaleFactor);
  }
  return in;
}

}  // namespace

Downscaler::Downscaler(Generator generator, NormStats norm)
    : generator_(std::move(generator)), norm_(std::move(norm)) {
  if (!generator_) throw ConfigError("downscaler needs a generator");
  generator_->eval();
}

Downscaler Downscaler::from_checkpoint(const std::filesystem::path& path) {
  auto state = load_checkpoint(path);
  return Downscaler(state.generator, state.norm);
}

torch::Tensor Downscaler::forward_normalized(const torch::Tensor& low,
                                             const torch::Tensor& cov) const {
  torch::NoGradGuard no_grad;
  const auto dtype = parameter_dtype(generator_);
  auto l = low.to(dtype).unsqueeze(0);
  torch::Tensor c;
  if (cov.defined()) c = cov.to(dtype);
  auto g = generator_;
  return g->forward(l, c).squeeze(0).to(torch::kFloat64);
}

FieldGrid Downscaler::operator()(const FieldGrid& low, const FieldGrid& covariates,
                                 TrimEdge edge) const {
  const auto& spec = generator_->spec();
  auto in = trim_inputs(spec, low, covariates, edge);
  auto l = apply_norm(in.low.data(), in.low.channels(), norm_);
  torch::Tensor c;
  if (spec.conditional()) c = apply_norm(in.covariates.data(), in.covariates.channels(), norm_);
  auto out = forward_normalized(l, c);
  auto physical = invert_norm(out, std::span<const Variable>(kPredictands), norm_);
  return FieldGrid({Variable::u10, Variable::v10}, physical, in.spacing_km, low.timestamp());
}

FieldGrid Downscaler::tiled(const FieldGrid& low, const FieldGrid& covariates, std::int64_t tile,
                            std::int64_t halo) const {
  const auto& spec = generator_->spec();
  if (tile < 2) throw ConfigError("tile must be at least 2 coarse cells");
  if (halo < 0) halo = generator_->receptive_radius();
  auto in = trim_inputs(spec, low, covariates, TrimEdge::Trailing);
  auto l = apply_norm(in.low.data(), in.low.channels(), norm_);
  torch::Tensor c;
  if (spec.conditional()) c = apply_norm(in.covariates.data(), in.covariates.channels(), norm_);
  const auto h = l.size(1), w = l.size(2);
  const auto k = kScaleFactor;
  auto out = torch::zeros({spec.out_channels, h * k, w * k}, torch::kFloat64);

  for (std::int64_t ty = 0; ty < h; ty += tile) {
    const auto ye = std::min(ty + tile, h);
    const auto wy0 = std::max<std::int64_t>(0, ty - halo), wy1 = std::min(h, ye + halo);
    for (std::int64_t tx = 0; tx < w; tx += tile) {
      const auto xe = std::min(tx + tile, w);
      const auto wx0 = std::max<std::int64_t>(0, tx - halo), wx1 = std::min(w, xe + halo);
      auto lw = l.narrow(1, wy0, wy1 - wy0).narrow(2, wx0, wx1 - wx0);
      torch::Tensor cw;
      if (c.defined()) cw = c.narrow(1, wy0 * k, (wy1 - wy0) * k).narrow(2, wx0 * k, (wx1 - wx0) * k);
      auto piece = forward_normalized(lw, cw);
      out.narrow(1, ty * k, (ye - ty) * k)
          .narrow(2, tx * k, (xe - tx) * k)
          .copy_(piece.narrow(1, (ty - wy0) * k, (ye - ty) * k).narrow(2, (tx - wx0) * k, (xe - tx) * k));
    }
  }
  auto physical = invert_norm(out, std::span<const Variable>(kPredictands), norm_);
  return FieldGrid({Variable::u10, Variable::v10}, physical, in.spacing_km, low.timestamp());
}

BaselineMethod parse_baseline(std::string_view name) {
  if (name == "bilinear") return BaselineMethod::Bilinear;
  if (name == "nearest") return BaselineMethod::Nearest;
  throw ConfigError("unknown baseline '" + std::string(name) + "' (expected bilinear or nearest)");
}

FieldGrid downscale_baseline(const FieldGrid& low, BaselineMethod method,
                             std::optional<Extent> reference) {
  const std::array<Variable, 2> winds{Variable::U_surf, Variable::V_surf};
  auto w = low.select(winds);
  if (reference) {
    auto plan = plan_trim({w.height(), w.width()}, *reference);
    w = w.window(0, 0, plan.low.first, plan.low.second);
  }
  auto up = method == BaselineMethod::Bilinear ? upsample_bilinear(w, kScaleFactor)
                                               : upsample_nearest(w, kScaleFactor);
  return FieldGrid({Variable::u10, Variable::v10}, up.data(),
                   low.spacing_km() / static_cast<double>(kScaleFactor), low.timestamp());
}

}  // namespace windscale
