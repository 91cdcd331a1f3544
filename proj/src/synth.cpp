#include "windscale/synth.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "windscale/error.hpp"
#include "windscale/field_io.hpp"
#include "windscale/preprocess.hpp"

namespace windscale {

namespace F = torch::nn::functional;

namespace {

using torch::indexing::None;

enum Stream : std::uint64_t {
  kOrography = 1,
  kMask = 2,
  kDetail = 3,
  kBackground = 4,
  kAuxiliary = 5,
  kSplit = 6,
};

constexpr double kWaterRoughness = 0.0002;
constexpr double kLandRoughnessMin = 0.01;
constexpr double kLandRoughnessMax = 1.5;
constexpr double kMaxOrography = 2500.0;
constexpr double kMaxWind = 60.0;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Box mean with reflection padding on a (H, W) tensor.
torch::Tensor smooth(const torch::Tensor& x, std::int64_t k) {
  auto padded = F::pad(x.unsqueeze(0).unsqueeze(0),
                       F::PadFuncOptions({k / 2, k / 2, k / 2, k / 2}).mode(torch::kReflect));
  return F::avg_pool2d(padded, F::AvgPool2dFuncOptions(k).stride(1)).squeeze(0).squeeze(0);
}

/// Central differences along rows (d/dy) and columns (d/dx), edge-replicated.
std::pair<torch::Tensor, torch::Tensor> central_gradient(const torch::Tensor& x) {
  auto p = F::pad(x.unsqueeze(0).unsqueeze(0), F::PadFuncOptions({1, 1, 1, 1}).mode(torch::kReplicate))
               .squeeze(0)
               .squeeze(0);
  using torch::indexing::Slice;
  auto dy = (p.index({Slice(2, None), Slice(1, -1)}) - p.index({Slice(None, -2), Slice(1, -1)})) / 2;
  auto dx = (p.index({Slice(1, -1), Slice(2, None)}) - p.index({Slice(1, -1), Slice(None, -2)})) / 2;
  return {dy, dx};
}

torch::Tensor laplacian(const torch::Tensor& x) {
  auto p = F::pad(x.unsqueeze(0).unsqueeze(0), F::PadFuncOptions({1, 1, 1, 1}).mode(torch::kReplicate))
               .squeeze(0)
               .squeeze(0);
  using torch::indexing::Slice;
  return p.index({Slice(2, None), Slice(1, -1)}) + p.index({Slice(None, -2), Slice(1, -1)}) +
         p.index({Slice(1, -1), Slice(2, None)}) + p.index({Slice(1, -1), Slice(None, -2)}) - 4 * x;
}

torch::Tensor radial_wavenumber(std::int64_t height, std::int64_t width) {
  auto fy = torch::fft::fftfreq(height, torch::kFloat64).unsqueeze(1);
  auto fx = torch::fft::fftfreq(width, torch::kFloat64).unsqueeze(0);
  return torch::sqrt(fy * fy + fx * fx);
}

torch::Tensor white_noise(std::int64_t height, std::int64_t width, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  auto out = torch::empty({height, width}, torch::kFloat64);
  auto* p = out.data_ptr<double>();
  for (std::int64_t i = 0; i < out.numel(); ++i) p[i] = normal(rng);
  return out;
}

torch::Tensor standardize(const torch::Tensor& x) {
  auto centred = x - x.mean();
  auto sd = centred.square().mean().sqrt();
  return sd.item<double>() > 0 ? centred / sd : centred;
}

std::int64_t hours_between_samples(const SynthConfig& cfg) {
  const auto plan_test = static_cast<std::int64_t>(
      std::llround(static_cast<double>(cfg.n_hours) * (1.0 - cfg.train_fraction - cfg.val_fraction)));
  const auto year_hours = std::max<std::int64_t>(cfg.n_hours - plan_test, 1);
  return std::max<std::int64_t>(8760 / year_hours, 1);
}

double day_of_year(const SynthConfig& cfg, std::int64_t hour) {
  // Simulated series starts on 1 July.
  return std::fmod(181.0 + static_cast<double>(hour * hours_between_samples(cfg)) / 24.0, 365.0);
}

}  // namespace

void check_config(const SynthConfig& cfg) {
  if (cfg.height < 64 || cfg.width < 64 || cfg.height % kScaleFactor != 0 ||
      cfg.width % kScaleFactor != 0) {
    throw ConfigError("synthetic domain must be at least 64x64 with sides divisible by 8");
  }
  if (cfg.n_hours < 1) throw ConfigError("n_hours must be >= 1");
  if (!(cfg.train_fraction > 0) || !(cfg.val_fraction > 0) ||
      cfg.train_fraction + cfg.val_fraction >= 1.0) {
    throw ConfigError("split fractions must be positive and leave room for a test period");
  }
  if (cfg.water_fraction < 0.0 || cfg.water_fraction > 1.0) {
    throw ConfigError("water_fraction must lie in [0, 1]");
  }
}

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::seed_seq seq{splitmix64(seed), splitmix64(seed ^ (stream << 32)), splitmix64(index + 0x51ED)};
  return std::mt19937_64(seq);
}

torch::Tensor power_law_field(std::int64_t height, std::int64_t width, double slope,
                              std::mt19937_64& rng) {
  auto noise = white_noise(height, width, rng);
  auto k = radial_wavenumber(height, width);
  auto amplitude = torch::where(k > 0, torch::pow(k.clamp_min(1e-12), -slope / 2.0),
                                torch::zeros_like(k));
  auto spectrum = torch::fft::fft2(noise) * amplitude;
  return standardize(torch::real(torch::fft::ifft2(spectrum)));
}

std::string_view split_name(Split s) {
  switch (s) {
    case Split::Train:
      return "train";
    case Split::Val:
      return "val";
    case Split::Test:
      return "test";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::Train;
  if (name == "val") return Split::Val;
  if (name == "test") return Split::Test;
  throw FileError("unknown split '" + std::string(name) + "'");
}

FieldGrid make_covariates(const SynthConfig& cfg) {
  check_config(cfg);
  const auto h = cfg.height, w = cfg.width;

  auto oro_rng = make_engine(cfg.seed, kOrography);
  auto raw = power_law_field(h, w, cfg.terrain_roughness, oro_rng);
  auto me = (raw - raw.min()) / (raw.max() - raw.min()) * kMaxOrography;

  auto mask_rng = make_engine(cfg.seed, kMask);
  auto surface = power_law_field(h, w, 3.5, mask_rng);
  torch::Tensor mg;
  if (cfg.water_fraction <= 0.0) {
    mg = torch::zeros({h, w}, torch::kFloat64);
  } else {
    auto level = torch::quantile(surface.flatten(), cfg.water_fraction).item<double>();
    mg = smooth((surface <= level).to(torch::kFloat64), 3).clamp(0.0, 1.0);
  }

  auto [dy, dx] = central_gradient(me);
  auto slope = torch::sqrt(dy * dy + dx * dx);
  auto slope_norm = slope / slope.max().clamp_min(1e-12);
  auto land = kLandRoughnessMin +
              (kLandRoughnessMax - kLandRoughnessMin) * torch::pow(slope_norm, 0.7);
  auto z0 = torch::where(mg > 0.5, torch::full_like(land, kWaterRoughness), land);

  return FieldGrid({Variable::me, Variable::mg, Variable::z0}, torch::stack(std::vector<torch::Tensor>{me, mg, z0}),
                   cfg.spacing_km, "static");
}

SamplePair make_hour(const SynthConfig& cfg, const FieldGrid& covariates, std::int64_t hour) {
  check_config(cfg);
  if (covariates.height() != cfg.height || covariates.width() != cfg.width) {
    throw ShapeError("covariates do not match the configured domain");
  }
  const auto h = cfg.height, w = cfg.width;
  const double t = static_cast<double>(hour * hours_between_samples(cfg));
  const double two_pi = 2.0 * std::numbers::pi;

  // Large-scale flow: rotating mean wind plus a few travelling streamfunction
  // modes. Mode geometry depends on the seed only; phases advance with time.
  auto bg_rng = make_engine(cfg.seed, kBackground);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double dir0 = two_pi * unit(bg_rng);
  const double speed_phase = two_pi * unit(bg_rng);
  const double direction = dir0 + two_pi * t / (24.0 * 9.7) + 0.8 * std::sin(two_pi * t / (24.0 * 2.3));
  const double speed =
      cfg.background_wind_scale * (1.0 + 0.45 * std::sin(two_pi * t / (24.0 * 4.1) + speed_phase));

  auto yy = torch::arange(h, torch::kFloat64).unsqueeze(1) / static_cast<double>(h);
  auto xx = torch::arange(w, torch::kFloat64).unsqueeze(0) / static_cast<double>(w);
  auto u = torch::full({h, w}, speed * std::cos(direction), torch::kFloat64);
  auto v = torch::full({h, w}, speed * std::sin(direction), torch::kFloat64);
  for (int m = 0; m < 4; ++m) {
    const double ky = std::floor(unit(bg_rng) * 3.0) + 1.0;
    const double kx = std::floor(unit(bg_rng) * 3.0);
    const double amp = 0.35 * cfg.background_wind_scale / (two_pi * std::hypot(ky, kx));
    const double omega = two_pi * (0.5 + unit(bg_rng)) / (24.0 * 3.0);
    const double phase = two_pi * unit(bg_rng) + omega * t;
    auto arg = two_pi * (ky * yy + kx * xx) + phase;
    // u = -dpsi/dy, v = dpsi/dx for psi = amp * sin(arg), in domain units
    u = u - amp * two_pi * ky * torch::cos(arg);
    v = v + amp * two_pi * kx * torch::cos(arg);
  }

  // Terrain channeling: strip part of the upslope component on steep slopes
  // and accelerate over ridges, decelerate in valleys.
  auto me = covariates.channel(Variable::me);
  auto z0 = covariates.channel(Variable::z0);
  auto terrain = smooth(me, 3);
  auto [dy, dx] = central_gradient(terrain);
  auto steep = torch::sqrt(dy * dy + dx * dx);
  auto steep_norm = steep / steep.max().clamp_min(1e-12);
  auto ny = dy / steep.clamp_min(1e-9);
  auto nx = dx / steep.clamp_min(1e-9);
  auto upslope = u * nx + v * ny;
  auto removal = cfg.channeling_strength * steep_norm * upslope;
  u = u - removal * nx;
  v = v - removal * ny;
  auto ridge = -laplacian(terrain);
  ridge = ridge / ridge.abs().max().clamp_min(1e-12);
  auto ridge_gain = 1.0 + 0.35 * ridge;
  u = u * ridge_gain;
  v = v * ridge_gain;

  // Unresolved small-scale detail, scales below about two coarse cells.
  auto detail_rng = make_engine(cfg.seed, kDetail, static_cast<std::uint64_t>(hour));
  auto k = radial_wavenumber(h, w);
  auto high_pass = (k > 1.0 / (2.0 * kScaleFactor)).to(torch::kFloat64);
  auto detail = [&] {
    auto noise = white_noise(h, w, detail_rng);
    auto shaped = torch::fft::fft2(noise) * high_pass * torch::pow(k.clamp_min(1e-12), -1.0);
    return standardize(torch::real(torch::fft::ifft2(shaped))) * cfg.detail_amplitude;
  };
  u = u + detail();
  v = v + detail();

  // Roughness damping following the log wind profile, water keeps full speed.
  const double ref = std::log(10.0 / kWaterRoughness);
  auto damping = 0.35 + 0.65 * torch::log(10.0 / z0.clamp_min(1e-6)) / ref;
  u = (u * damping).clamp(-kMaxWind, kMaxWind);
  v = (v * damping).clamp(-kMaxWind, kMaxWind);

  const auto stamp = synthetic_timestamp(cfg, hour);
  FieldGrid high({Variable::u10, Variable::v10}, torch::stack({u, v}), cfg.spacing_km, stamp);

  // Coarse predictors.
  const auto hl = h / kScaleFactor, wl = w / kScaleFactor;
  auto aux_rng = make_engine(cfg.seed, kAuxiliary, static_cast<std::uint64_t>(hour));
  auto smooth_noise = [&](double slope) { return power_law_field(hl, wl, slope, aux_rng); };
  auto u_lr = block_mean(u, kScaleFactor);
  auto v_lr = block_mean(v, kScaleFactor);
  auto me_lr = block_mean(me, kScaleFactor);
  const double doy = day_of_year(cfg, hour);
  const double seasonal = 12.0 * std::sin(two_pi * (doy - 110.0) / 365.0);
  const double diurnal = 4.0 * std::sin(two_pi * (std::fmod(t, 24.0) - 9.0) / 24.0);
  auto t_surf = 8.0 + seasonal + diurnal - 6.5e-3 * me_lr + 1.5 * smooth_noise(4.0);
  auto t_546 = -22.0 + 0.6 * seasonal + 0.3 * t_surf.mean() + smooth_noise(4.0);
  auto bg_u_lr = block_mean(torch::full({h, w}, speed * std::cos(direction), torch::kFloat64), kScaleFactor);
  auto bg_v_lr = block_mean(torch::full({h, w}, speed * std::sin(direction), torch::kFloat64), kScaleFactor);
  auto u_546 = 1.8 * bg_u_lr + 0.4 * u_lr + 2.0 * smooth_noise(4.0);
  auto v_546 = 1.8 * bg_v_lr + 0.4 * v_lr + 2.0 * smooth_noise(4.0);
  auto w_546 = 0.25 * smooth_noise(3.0) - 1e-4 * (me_lr - me_lr.mean());
  FieldGrid low({kPredictors.begin(), kPredictors.end()},
                torch::stack({u_lr, v_lr, t_surf, t_546, u_546, v_546, w_546}),
                cfg.spacing_km * kScaleFactor, stamp);

  SamplePair pair{std::move(low), std::move(high), covariates, stamp, hour};
  return pair;
}

std::vector<SplitEntry> plan_split(const SynthConfig& cfg) {
  check_config(cfg);
  if (cfg.n_hours < 10) throw ConfigError("n_hours must be >= 10 to populate every split");
  const auto n = cfg.n_hours;
  const auto n_test = static_cast<std::int64_t>(
      std::llround(static_cast<double>(n) * (1.0 - cfg.train_fraction - cfg.val_fraction)));
  const auto n_val = static_cast<std::int64_t>(std::llround(static_cast<double>(n) * cfg.val_fraction));
  const auto n_train = n - n_test - n_val;
  if (n_test < 1 || n_val < 1 || n_train < 1) {
    throw ConfigError("n_hours = " + std::to_string(n) + " is too small to populate every split");
  }
  std::vector<std::int64_t> year(static_cast<std::size_t>(n - n_test));
  for (std::size_t i = 0; i < year.size(); ++i) year[i] = static_cast<std::int64_t>(i);
  auto rng = make_engine(cfg.seed, kSplit);
  std::shuffle(year.begin(), year.end(), rng);

  std::vector<SplitEntry> out(static_cast<std::size_t>(n));
  for (std::int64_t hr = 0; hr < n; ++hr) {
    out[hr].hour = hr;
    out[hr].split = Split::Test;
    out[hr].timestamp = synthetic_timestamp(cfg, hr);
  }
  for (std::size_t i = 0; i < year.size(); ++i) {
    out[static_cast<std::size_t>(year[i])].split =
        i < static_cast<std::size_t>(n_val) ? Split::Val : Split::Train;
  }
  return out;
}

std::string synthetic_timestamp(const SynthConfig& cfg, std::int64_t hour) {
  using namespace std::chrono;
  const sys_days start = year{2022} / July / 1;
  const auto when = start + hours{hour * hours_between_samples(cfg)};
  const auto day = floor<days>(when);
  const year_month_day ymd{day};
  const auto hh = duration_cast<hours>(when - day).count();
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02lld", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long long>(hh));
  return buf;
}

std::string month_of(const std::string& timestamp) {
  return timestamp.size() >= 7 ? timestamp.substr(0, 7) : timestamp;
}

Dataset make_dataset(const SynthConfig& cfg) {
  Dataset data;
  data.config = cfg;
  data.manifest = plan_split(cfg);
  data.covariates = make_covariates(cfg);
  for (const auto& entry : data.manifest) {
    auto pair = make_hour(cfg, data.covariates, entry.hour);
    switch (entry.split) {
      case Split::Train:
        data.train.push_back(std::move(pair));
        break;
      case Split::Val:
        data.val.push_back(std::move(pair));
        break;
      case Split::Test:
        data.test.push_back(std::move(pair));
        break;
    }
  }
  return data;
}

namespace {

std::string hour_file(std::int64_t hour) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "hour_%04lld.wsf", static_cast<long long>(hour));
  return buf;
}

}  // namespace

std::vector<std::string> write_dataset(const std::filesystem::path& dir, const Dataset& data) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> written;
  write_field(dir / "covariates.wsf", data.covariates);
  written.emplace_back("covariates.wsf");

  std::ofstream manifest(dir / "splits.txt");
  if (!manifest) throw FileError("cannot write " + (dir / "splits.txt").string());
  manifest << "# hour\tsplit\ttimestamp\tfile\n";
  auto emit = [&](const std::vector<SamplePair>& pairs) {
    for (const auto& p : pairs) {
      write_pair(dir / hour_file(p.hour), p);
      written.push_back(hour_file(p.hour));
    }
  };
  emit(data.train);
  emit(data.val);
  emit(data.test);
  for (const auto& e : data.manifest) {
    manifest << e.hour << '\t' << split_name(e.split) << '\t' << e.timestamp << '\t'
             << hour_file(e.hour) << '\n';
  }
  if (!manifest) throw FileError("write failed for splits.txt");
  written.emplace_back("splits.txt");
  return written;
}

Dataset read_dataset(const std::filesystem::path& dir) {
  Dataset data;
  data.covariates = read_field(dir / "covariates.wsf");
  std::ifstream in(dir / "splits.txt");
  if (!in) throw FileError("cannot read " + (dir / "splits.txt").string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    SplitEntry e;
    std::string split, file;
    if (!(fields >> e.hour >> split >> e.timestamp >> file)) {
      throw FileError("malformed splits.txt line: " + line);
    }
    e.split = parse_split(split);
    auto pair = read_pair(dir / file, data.covariates);
    pair.hour = e.hour;
    pair.timestamp = e.timestamp;
    data.manifest.push_back(e);
    (e.split == Split::Train ? data.train : e.split == Split::Val ? data.val : data.test)
        .push_back(std::move(pair));
  }
  if (data.manifest.empty()) throw FileError("splits.txt lists no hours");
  return data;
}

}  // namespace windscale
