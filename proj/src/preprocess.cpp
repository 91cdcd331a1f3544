#include "windscale/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "windscale/error.hpp"

namespace windscale {

namespace {

torch::Tensor nearest_index(std::int64_t src, std::int64_t dst) {
  auto idx = torch::empty({dst}, torch::kLong);
  auto acc = idx.accessor<std::int64_t, 1>();
  for (std::int64_t i = 0; i < dst; ++i) {
    // floor((i + 0.5) * src / dst) in exact integer arithmetic
    acc[i] = std::min<std::int64_t>(((2 * i + 1) * src) / (2 * dst), src - 1);
  }
  return idx;
}

void require_nonempty(const FieldGrid& src) {
  if (src.empty()) throw ShapeError("source field is empty");
}

}  // namespace

FieldGrid regrid_nearest(const FieldGrid& src, std::int64_t dst_height, std::int64_t dst_width) {
  require_nonempty(src);
  if (dst_height < 1 || dst_width < 1) {
    throw BoundsError("destination grid must be at least 1x1");
  }
  auto rows = nearest_index(src.height(), dst_height);
  auto cols = nearest_index(src.width(), dst_width);
  auto out = src.data().index_select(1, rows).index_select(2, cols);
  return src.with_data(out);
}

torch::Tensor block_mean(const torch::Tensor& x, std::int64_t k) {
  const auto h = x.size(-2), w = x.size(-1);
  if (k < 1 || h % k != 0 || w % k != 0) {
    std::ostringstream msg;
    msg << "grid " << h << "x" << w << " is not divisible by factor " << k;
    throw AlignmentError(msg.str());
  }
  auto lead = x.sizes().slice(0, x.dim() - 2).vec();
  auto shape = lead;
  shape.insert(shape.end(), {h / k, k, w / k, k});
  auto blocks = x.reshape(shape);
  const auto d = static_cast<std::int64_t>(lead.size());
  // Sum rows of each block first, then columns, then divide once.
  return blocks.sum(d + 3).sum(d + 1) / static_cast<double>(k * k);
}

torch::Tensor replicate_blocks(const torch::Tensor& x, std::int64_t k) {
  return x.repeat_interleave(k, -2).repeat_interleave(k, -1);
}

torch::Tensor bilinear_cell_centre(const torch::Tensor& x, std::int64_t k) {
  auto axis_weights = [k](std::int64_t n) {
    // Interpolation matrix (k*n, n) along one axis.
    auto m = torch::zeros({k * n, n}, torch::kFloat64);
    auto acc = m.accessor<double, 2>();
    for (std::int64_t j = 0; j < k * n; ++j) {
      double pos = (static_cast<double>(j) + 0.5) / static_cast<double>(k) - 0.5;
      pos = std::clamp(pos, 0.0, static_cast<double>(n - 1));
      auto i0 = static_cast<std::int64_t>(std::floor(pos));
      auto i1 = std::min(i0 + 1, n - 1);
      double t = pos - static_cast<double>(i0);
      acc[j][i0] += 1.0 - t;
      acc[j][i1] += t;
    }
    return m;
  };
  auto rows = axis_weights(x.size(-2));
  auto cols = axis_weights(x.size(-1));
  return torch::matmul(torch::matmul(rows, x.to(torch::kFloat64)), cols.t());
}

FieldGrid reduce_by_factor(const FieldGrid& src, std::int64_t k, ReduceMode mode) {
  require_nonempty(src);
  if (mode == ReduceMode::BlockMean) return src.with_data(block_mean(src.data(), k));
  if (k < 1 || src.height() % k != 0 || src.width() % k != 0) {
    throw AlignmentError("grid is not divisible by the reduction factor");
  }
  using torch::indexing::Slice;
  auto picked = src.data().index({Slice(), Slice(k / 2, torch::indexing::None, k),
                                  Slice(k / 2, torch::indexing::None, k)});
  return src.with_data(picked);
}

FieldGrid upsample_nearest(const FieldGrid& src, std::int64_t k) {
  require_nonempty(src);
  if (k < 1) throw ConfigError("upsampling factor must be >= 1");
  return src.with_data(replicate_blocks(src.data(), k));
}

FieldGrid upsample_bilinear(const FieldGrid& src, std::int64_t k) {
  require_nonempty(src);
  if (k < 1) throw ConfigError("upsampling factor must be >= 1");
  return src.with_data(bilinear_cell_centre(src.data(), k));
}

// ----------------------------------------------------------------------------

const ChannelStats& NormStats::at(Variable v) const {
  for (const auto& c : channels) {
    if (c.channel == v) return c;
  }
  throw ConfigError("normalization statistics have no channel " + std::string(variable_name(v)));
}

NormTransform default_transform(Variable v) {
  return (v == Variable::me || v == Variable::z0) ? NormTransform::Log1p : NormTransform::Identity;
}

namespace {

torch::Tensor forward_transform(const torch::Tensor& x, NormTransform t) {
  return t == NormTransform::Log1p ? torch::log1p(x) : x;
}

torch::Tensor inverse_transform(const torch::Tensor& x, NormTransform t) {
  return t == NormTransform::Log1p ? torch::expm1(x) : x;
}

ChannelStats stats_for(Variable v, const std::vector<torch::Tensor>& slices) {
  ChannelStats s;
  s.channel = v;
  s.transform = default_transform(v);
  // Two-pass mean / population variance in float64.
  double sum = 0.0;
  std::int64_t n = 0;
  for (const auto& t : slices) {
    sum += forward_transform(t, s.transform).sum().item<double>();
    n += t.numel();
  }
  s.mean = sum / static_cast<double>(n);
  double sq = 0.0;
  for (const auto& t : slices) {
    sq += (forward_transform(t, s.transform) - s.mean).square().sum().item<double>();
  }
  s.std = std::sqrt(sq / static_cast<double>(n));
  if (!(s.std > 0.0) || !std::isfinite(s.std)) {
    throw ConfigError("channel " + std::string(variable_name(v)) +
                      " has zero variance in the training split");
  }
  return s;
}

torch::Tensor channel_affine(const torch::Tensor& x, std::span<const Variable> channels,
                             const NormStats& stats, bool forward) {
  const auto c_dim = x.dim() - 3;
  if (c_dim < 0 || x.size(c_dim) != static_cast<std::int64_t>(channels.size())) {
    throw ShapeError("normalization input does not match its channel list");
  }
  std::vector<torch::Tensor> parts;
  parts.reserve(channels.size());
  for (std::size_t i = 0; i < channels.size(); ++i) {
    const auto& s = stats.at(channels[i]);
    auto slice = x.select(c_dim, static_cast<std::int64_t>(i));
    if (forward) {
      parts.push_back((forward_transform(slice, s.transform) - s.mean) / s.std);
    } else {
      parts.push_back(inverse_transform(slice * s.std + s.mean, s.transform));
    }
  }
  return torch::stack(parts, c_dim);
}

}  // namespace

NormStats fit_norm(std::span<const SamplePair> train) {
  if (train.empty()) throw ConfigError("cannot fit normalization on an empty training split");
  NormStats out;
  auto collect = [&](Variable v, auto member) {
    std::vector<torch::Tensor> slices;
    for (const auto& p : train) slices.push_back((p.*member).channel(v));
    return slices;
  };
  for (auto v : kPredictors) out.channels.push_back(stats_for(v, collect(v, &SamplePair::low)));
  for (auto v : kPredictands) out.channels.push_back(stats_for(v, collect(v, &SamplePair::high)));
  // Covariates are static: one copy is the whole population.
  for (auto v : kCovariates) {
    out.channels.push_back(stats_for(v, {train.front().covariates.channel(v)}));
  }
  return out;
}

torch::Tensor apply_norm(const torch::Tensor& x, std::span<const Variable> channels,
                         const NormStats& stats) {
  return channel_affine(x, channels, stats, true);
}

torch::Tensor invert_norm(const torch::Tensor& x, std::span<const Variable> channels,
                          const NormStats& stats) {
  return channel_affine(x, channels, stats, false);
}

FieldGrid apply_norm(const FieldGrid& grid, const NormStats& stats) {
  return FieldGrid::unvalidated(grid.channels(), apply_norm(grid.data(), grid.channels(), stats),
                                grid.spacing_km(), grid.timestamp());
}

FieldGrid invert_norm(const FieldGrid& grid, const NormStats& stats) {
  return FieldGrid::unvalidated(grid.channels(), invert_norm(grid.data(), grid.channels(), stats),
                                grid.spacing_km(), grid.timestamp());
}

SamplePair normalize_pair(const SamplePair& pair, const NormStats& stats) {
  SamplePair out = pair;
  out.low = apply_norm(pair.low, stats);
  out.high = apply_norm(pair.high, stats);
  out.covariates = apply_norm(pair.covariates, stats);
  return out;
}

std::string format_norm_stats(const NormStats& stats) {
  std::ostringstream out;
  out << "# windscale normalization statistics v1\n";
  out << "# channel transform mean std\n";
  out << std::setprecision(17);
  for (const auto& c : stats.channels) {
    out << variable_name(c.channel) << ' '
        << (c.transform == NormTransform::Log1p ? "log1p" : "identity") << ' ' << c.mean << ' '
        << c.std << '\n';
  }
  return out.str();
}

NormStats parse_norm_stats(const std::string& text) {
  NormStats stats;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string name, transform;
    ChannelStats c;
    if (!(fields >> name >> transform >> c.mean >> c.std)) {
      throw FileError("normalization statistics line " + std::to_string(line_no) +
                      " is malformed");
    }
    auto v = parse_variable(name);
    if (!v) throw FileError("normalization statistics name unknown channel '" + name + "'");
    c.channel = *v;
    if (transform == "log1p") {
      c.transform = NormTransform::Log1p;
    } else if (transform == "identity") {
      c.transform = NormTransform::Identity;
    } else {
      throw FileError("unknown normalization transform '" + transform + "'");
    }
    if (!(c.std > 0.0)) {
      throw ConfigError("channel " + name + " has non-positive standard deviation");
    }
    stats.channels.push_back(c);
  }
  return stats;
}

void save_norm_stats(const std::filesystem::path& path, const NormStats& stats) {
  std::ofstream out(path);
  if (!out) throw FileError("cannot write " + path.string());
  out << format_norm_stats(stats);
}

NormStats load_norm_stats(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_norm_stats(buf.str());
}

}  // namespace windscale
