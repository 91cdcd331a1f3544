#include "windscale/grid.hpp"

#include <algorithm>
#include <sstream>

#include "windscale/error.hpp"

namespace windscale {

namespace {

constexpr std::array<VariableInfo, 12> kCatalog{{
    {Variable::U_surf, "U_surf", "m/s", VariableRole::Predictor,
     "West-East component of the 10 m wind"},
    {Variable::V_surf, "V_surf", "m/s", VariableRole::Predictor,
     "South-North component of the 10 m wind"},
    {Variable::T_surf, "T_surf", "degC", VariableRole::Predictor, "Air temperature at 1.5 m"},
    {Variable::T_546, "T_546", "degC", VariableRole::Predictor, "Air temperature at 546 hPa"},
    {Variable::U_546, "U_546", "m/s", VariableRole::Predictor,
     "West-East wind component at 546 hPa"},
    {Variable::V_546, "V_546", "m/s", VariableRole::Predictor,
     "South-North wind component at 546 hPa"},
    {Variable::W_546, "W_546", "Pa/s", VariableRole::Predictor, "Vertical motion at 546 hPa"},
    {Variable::u10, "u10", "m/s", VariableRole::Predictand,
     "West-East component of the 10 m wind"},
    {Variable::v10, "v10", "m/s", VariableRole::Predictand,
     "South-North component of the 10 m wind"},
    {Variable::me, "me", "m", VariableRole::Covariate, "Model orography"},
    {Variable::mg, "mg", "fraction", VariableRole::Covariate, "Water/land mask"},
    {Variable::z0, "z0", "m", VariableRole::Covariate, "Roughness length"},
}};

void check_structure(const std::vector<Variable>& channels, const torch::Tensor& data) {
  if (!data.defined() || data.dim() != 3) {
    throw ShapeError("field data must be a (C, H, W) array");
  }
  if (data.size(0) != static_cast<std::int64_t>(channels.size())) {
    std::ostringstream msg;
    msg << "field has " << channels.size() << " channel names but " << data.size(0)
        << " data channels";
    throw ShapeError(msg.str());
  }
  if (data.size(1) < 1 || data.size(2) < 1) {
    throw ShapeError("field must have H >= 1 and W >= 1");
  }
  for (std::size_t i = 0; i < channels.size(); ++i) {
    for (std::size_t j = i + 1; j < channels.size(); ++j) {
      if (channels[i] == channels[j]) {
        throw ShapeError("duplicate channel " + std::string(variable_name(channels[i])));
      }
    }
  }
}

template <std::size_t N>
bool channels_equal(const std::vector<Variable>& got, const std::array<Variable, N>& want) {
  return got.size() == N && std::equal(got.begin(), got.end(), want.begin());
}

std::string channel_list(const std::vector<Variable>& channels) {
  std::string out;
  for (auto v : channels) {
    if (!out.empty()) out += ",";
    out += variable_name(v);
  }
  return out;
}

}  // namespace

const std::array<VariableInfo, 12>& variable_catalog() { return kCatalog; }

const VariableInfo& variable_info(Variable v) { return kCatalog[static_cast<std::size_t>(v)]; }

std::string_view variable_name(Variable v) { return variable_info(v).name; }

std::optional<Variable> parse_variable(std::string_view name) {
  for (const auto& info : kCatalog) {
    if (info.name == name) return info.id;
  }
  return std::nullopt;
}

// ----------------------------------------------------------------------------

FieldGrid::FieldGrid(Unchecked, std::vector<Variable> channels, const torch::Tensor& data,
                     double spacing_km, std::string timestamp)
    : channels_(std::move(channels)),
      spacing_km_(spacing_km),
      timestamp_(std::move(timestamp)) {
  check_structure(channels_, data);
  data_ = data.detach().to(torch::kCPU, torch::kFloat64).contiguous().clone();
}

FieldGrid::FieldGrid(std::vector<Variable> channels, const torch::Tensor& data, double spacing_km,
                     std::string timestamp)
    : FieldGrid(Unchecked{}, std::move(channels), data, spacing_km, std::move(timestamp)) {
  if (!torch::isfinite(data_).all().item<bool>()) {
    throw NumericError("field contains non-finite values");
  }
  if (auto m = index_of(Variable::mg)) {
    auto mask = data_[*m];
    if (mask.min().item<double>() < 0.0 || mask.max().item<double>() > 1.0) {
      throw ShapeError("mask out of [0,1]");
    }
  }
}

FieldGrid FieldGrid::unvalidated(std::vector<Variable> channels, const torch::Tensor& data,
                                 double spacing_km, std::string timestamp) {
  return FieldGrid(Unchecked{}, std::move(channels), data, spacing_km, std::move(timestamp));
}

std::optional<std::int64_t> FieldGrid::index_of(Variable v) const {
  auto it = std::find(channels_.begin(), channels_.end(), v);
  if (it == channels_.end()) return std::nullopt;
  return static_cast<std::int64_t>(it - channels_.begin());
}

torch::Tensor FieldGrid::channel(Variable v) const {
  auto idx = index_of(v);
  if (!idx) throw ShapeError("field has no channel " + std::string(variable_name(v)));
  return data_[*idx];
}

FieldGrid FieldGrid::select(std::span<const Variable> wanted) const {
  std::vector<std::int64_t> idx;
  idx.reserve(wanted.size());
  for (auto v : wanted) {
    auto i = index_of(v);
    if (!i) throw ShapeError("field has no channel " + std::string(variable_name(v)));
    idx.push_back(*i);
  }
  auto picked = data_.index_select(0, torch::tensor(idx, torch::kLong));
  return FieldGrid(Unchecked{}, {wanted.begin(), wanted.end()}, picked, spacing_km_, timestamp_);
}

FieldGrid FieldGrid::with_data(const torch::Tensor& data) const {
  return FieldGrid(Unchecked{}, channels_, data, spacing_km_, timestamp_);
}

FieldGrid FieldGrid::window(std::int64_t top, std::int64_t left, std::int64_t height,
                            std::int64_t width) const {
  if (top < 0 || left < 0 || height < 1 || width < 1 || top + height > this->height() ||
      left + width > this->width()) {
    std::ostringstream msg;
    msg << "window (" << top << ", " << left << ", " << height << "x" << width
        << ") does not fit in " << this->height() << "x" << this->width();
    throw BoundsError(msg.str());
  }
  auto part = data_.slice(1, top, top + height).slice(2, left, left + width);
  return FieldGrid(Unchecked{}, channels_, part, spacing_km_, timestamp_);
}

std::vector<std::string> FieldGrid::value_violations(std::string_view label) const {
  std::vector<std::string> out;
  for (std::int64_t c = 0; c < channel_count(); ++c) {
    if (!torch::isfinite(data_[c]).all().item<bool>()) {
      out.push_back("non-finite values in " + std::string(label) + " channel " +
                    std::string(variable_name(channels_[c])));
    }
  }
  if (auto m = index_of(Variable::mg)) {
    auto mask = data_[*m];
    if ((mask < 0.0).any().item<bool>() || (mask > 1.0).any().item<bool>()) {
      out.emplace_back("mask out of [0,1]");
    }
  }
  if (auto z = index_of(Variable::z0)) {
    if ((data_[*z] < 0.0).any().item<bool>()) {
      out.emplace_back("negative roughness length in channel z0");
    }
  }
  return out;
}

bool same_values(const FieldGrid& a, const FieldGrid& b) {
  if (a.empty() || b.empty()) return a.empty() && b.empty();
  return a.channels() == b.channels() && a.data().sizes() == b.data().sizes() &&
         torch::equal(a.data(), b.data());
}

// ----------------------------------------------------------------------------

std::vector<std::string> validate_pair(const SamplePair& pair) {
  std::vector<std::string> out;
  if (pair.low.empty() || pair.high.empty() || pair.covariates.empty()) {
    out.emplace_back("pair has an empty grid");
    return out;
  }
  if (!channels_equal(pair.low.channels(), kPredictors)) {
    out.push_back("low grid channels must be the 7 predictors, got " +
                  channel_list(pair.low.channels()));
  }
  if (!channels_equal(pair.high.channels(), kPredictands)) {
    out.push_back("high grid channels must be u10,v10, got " + channel_list(pair.high.channels()));
  }
  if (!channels_equal(pair.covariates.channels(), kCovariates)) {
    out.push_back("covariate channels must be me,mg,z0, got " +
                  channel_list(pair.covariates.channels()));
  }
  if (pair.high.height() != kScaleFactor * pair.low.height()) {
    out.emplace_back("factor-8 relation violated on H");
  }
  if (pair.high.width() != kScaleFactor * pair.low.width()) {
    out.emplace_back("factor-8 relation violated on W");
  }
  if (pair.covariates.height() != pair.high.height() ||
      pair.covariates.width() != pair.high.width()) {
    out.emplace_back("covariates do not share the high-resolution shape");
  }
  for (auto& v : pair.low.value_violations("low")) out.push_back(std::move(v));
  for (auto& v : pair.high.value_violations("high")) out.push_back(std::move(v));
  for (auto& v : pair.covariates.value_violations("covariates")) out.push_back(std::move(v));
  return out;
}

std::vector<std::string> validate_static_covariates(std::span<const SamplePair> pairs) {
  std::vector<std::string> out;
  for (std::size_t i = 1; i < pairs.size(); ++i) {
    if (!same_values(pairs[i].covariates, pairs[0].covariates)) {
      out.push_back("covariates of pair " + std::to_string(i) + " differ from pair 0");
    }
  }
  return out;
}

SamplePair crop(const SamplePair& pair, std::int64_t top_hr, std::int64_t left_hr,
                std::int64_t size_hr) {
  if (top_hr % kScaleFactor != 0 || left_hr % kScaleFactor != 0 || size_hr % kScaleFactor != 0) {
    std::ostringstream msg;
    msg << "crop offset (" << top_hr << ", " << left_hr << ") and size " << size_hr
        << " must be multiples of " << kScaleFactor;
    throw AlignmentError(msg.str());
  }
  if (top_hr < 0 || left_hr < 0 || size_hr < kScaleFactor || top_hr + size_hr > pair.high.height() ||
      left_hr + size_hr > pair.high.width()) {
    std::ostringstream msg;
    msg << "crop at (" << top_hr << ", " << left_hr << ") of size " << size_hr
        << " exceeds the " << pair.high.height() << "x" << pair.high.width() << " domain";
    throw BoundsError(msg.str());
  }
  const std::int64_t size_lr = size_hr / kScaleFactor;
  SamplePair out;
  out.low = pair.low.window(top_hr / kScaleFactor, left_hr / kScaleFactor, size_lr, size_lr);
  out.high = pair.high.window(top_hr, left_hr, size_hr, size_hr);
  out.covariates = pair.covariates.window(top_hr, left_hr, size_hr, size_hr);
  out.timestamp = pair.timestamp;
  out.hour = pair.hour;
  return out;
}

Batch stack_batch(std::span<const SamplePair> crops) {
  if (crops.empty()) throw ShapeError("cannot stack an empty crop list");
  std::vector<torch::Tensor> low, high, cov;
  for (const auto& c : crops) {
    low.push_back(c.low.data());
    high.push_back(c.high.data());
    cov.push_back(c.covariates.data());
  }
  return {torch::stack(low), torch::stack(high), torch::stack(cov)};
}

}  // namespace windscale
