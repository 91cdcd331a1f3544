#include "windscale/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "windscale/error.hpp"

namespace windscale {

using nlohmann::json;

namespace {

// Strict object reader: every key of `j` must be claimed by exactly one
// field() call, otherwise finish() names the leftovers.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  template <class T>
  void field(const char* key, T& out) {
    auto it = j_.find(key);
    claimed_.push_back(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config key " + path_ + "." + key + " has the wrong type");
    }
  }

  template <class F>
  void section(const char* key, F&& read) {
    auto it = j_.find(key);
    claimed_.push_back(key);
    if (it != j_.end()) read(*it, path_ + "." + key);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      bool known = false;
      for (const auto& k : claimed_) known = known || k == it.key();
      if (!known) throw ConfigError("unknown config key " + path_ + "." + it.key());
    }
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }
  const json& j_;
  std::string path_;
  std::vector<std::string> claimed_;
};

json emit(const SynthConfig& c) {
  return {{"seed", c.seed},
          {"height", c.height},
          {"width", c.width},
          {"n_hours", c.n_hours},
          {"terrain_roughness", c.terrain_roughness},
          {"background_wind_scale", c.background_wind_scale},
          {"spacing_km", c.spacing_km},
          {"train_fraction", c.train_fraction},
          {"val_fraction", c.val_fraction},
          {"channeling_strength", c.channeling_strength},
          {"detail_amplitude", c.detail_amplitude},
          {"water_fraction", c.water_fraction}};
}

void read(const json& j, const std::string& path, SynthConfig& c) {
  Fields f(j, path);
  f.field("seed", c.seed);
  f.field("height", c.height);
  f.field("width", c.width);
  f.field("n_hours", c.n_hours);
  f.field("terrain_roughness", c.terrain_roughness);
  f.field("background_wind_scale", c.background_wind_scale);
  f.field("spacing_km", c.spacing_km);
  f.field("train_fraction", c.train_fraction);
  f.field("val_fraction", c.val_fraction);
  f.field("channeling_strength", c.channeling_strength);
  f.field("detail_amplitude", c.detail_amplitude);
  f.field("water_fraction", c.water_fraction);
  f.finish();
}

json emit(const LossConfig& c) {
  return {{"lambda_gp", c.lambda_gp},
          {"gamma_adv", c.gamma_adv},
          {"alpha_content", c.alpha_content},
          {"fs_mode", std::string(fs_mode_name(c.fs_mode))},
          {"fs_kernel", c.fs_kernel},
          {"pfs_filtered_critic", c.pfs_filtered_critic}};
}

void read(const json& j, const std::string& path, LossConfig& c) {
  Fields f(j, path);
  std::string mode(fs_mode_name(c.fs_mode));
  f.field("lambda_gp", c.lambda_gp);
  f.field("gamma_adv", c.gamma_adv);
  f.field("alpha_content", c.alpha_content);
  f.field("fs_mode", mode);
  f.field("fs_kernel", c.fs_kernel);
  f.field("pfs_filtered_critic", c.pfs_filtered_critic);
  f.finish();
  c.fs_mode = parse_fs_mode(mode);
}

json emit(const GeneratorSpec& s) {
  return {{"lr_channels", s.lr_channels},
          {"cov_channels", s.cov_channels},
          {"out_channels", s.out_channels},
          {"n_rrdb", s.n_rrdb},
          {"trunk_width", s.trunk_width},
          {"growth", s.growth},
          {"dense_layers", s.dense_layers},
          {"dense_blocks", s.dense_blocks},
          {"residual_scale", s.residual_scale},
          {"cov_widths", s.cov_widths},
          {"leaky_slope", s.leaky_slope}};
}

void read(const json& j, const std::string& path, GeneratorSpec& s) {
  Fields f(j, path);
  f.field("lr_channels", s.lr_channels);
  f.field("cov_channels", s.cov_channels);
  f.field("out_channels", s.out_channels);
  f.field("n_rrdb", s.n_rrdb);
  f.field("trunk_width", s.trunk_width);
  f.field("growth", s.growth);
  f.field("dense_layers", s.dense_layers);
  f.field("dense_blocks", s.dense_blocks);
  f.field("residual_scale", s.residual_scale);
  f.field("cov_widths", s.cov_widths);
  f.field("leaky_slope", s.leaky_slope);
  f.finish();
}

json emit(const CriticSpec& s) {
  return {{"in_channels", s.in_channels},
          {"base_width", s.base_width},
          {"n_stride2_stages", s.n_stride2_stages},
          {"head_width", s.head_width},
          {"leaky_slope", s.leaky_slope}};
}

void read(const json& j, const std::string& path, CriticSpec& s) {
  Fields f(j, path);
  f.field("in_channels", s.in_channels);
  f.field("base_width", s.base_width);
  f.field("n_stride2_stages", s.n_stride2_stages);
  f.field("head_width", s.head_width);
  f.field("leaky_slope", s.leaky_slope);
  f.finish();
}

json emit(const TrainConfig& c) {
  return {{"critic_iters", c.critic_iters},
          {"batch_size", c.batch_size},
          {"lr", c.lr},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"crops_per_pair", c.crops_per_pair},
          {"crop_size_hr", c.crop_size_hr},
          {"loss", emit(c.loss)},
          {"max_steps", c.max_steps},
          {"val_crops_per_pair", c.val_crops_per_pair},
          {"checkpoint_every", c.checkpoint_every},
          {"val_every", c.val_every},
          {"seed", c.seed},
          {"generator", emit(c.generator)},
          {"critic", emit(c.critic)},
          {"fp64", c.fp64}};
}

void read(const json& j, const std::string& path, TrainConfig& c) {
  Fields f(j, path);
  f.field("critic_iters", c.critic_iters);
  f.field("batch_size", c.batch_size);
  f.field("lr", c.lr);
  f.field("beta1", c.beta1);
  f.field("beta2", c.beta2);
  f.field("crops_per_pair", c.crops_per_pair);
  f.field("crop_size_hr", c.crop_size_hr);
  f.section("loss", [&](const json& v, const std::string& p) { read(v, p, c.loss); });
  f.field("max_steps", c.max_steps);
  f.field("val_crops_per_pair", c.val_crops_per_pair);
  f.field("checkpoint_every", c.checkpoint_every);
  f.field("val_every", c.val_every);
  f.field("seed", c.seed);
  f.section("generator", [&](const json& v, const std::string& p) { read(v, p, c.generator); });
  f.section("critic", [&](const json& v, const std::string& p) { read(v, p, c.critic); });
  f.field("fp64", c.fp64);
  f.finish();
}

json emit(const Region& r) {
  return {{"name", r.name}, {"top", r.top}, {"left", r.left}, {"height", r.height}, {"width", r.width}};
}

void read(const json& j, const std::string& path, Region& r) {
  Fields f(j, path);
  f.field("name", r.name);
  f.field("top", r.top);
  f.field("left", r.left);
  f.field("height", r.height);
  f.field("width", r.width);
  f.finish();
}

json emit(const EvalConfig& c) {
  json regions = json::array();
  for (const auto& r : c.regions) regions.push_back(emit(r));
  return {{"methods", c.methods},
          {"regions", regions},
          {"workers", c.workers},
          {"lsd_floor", c.lsd_floor},
          {"tile", c.tile}};
}

void read(const json& j, const std::string& path, EvalConfig& c) {
  Fields f(j, path);
  f.field("methods", c.methods);
  f.section("regions", [&](const json& v, const std::string& p) {
    if (!v.is_array()) throw ConfigError(p + " must be an array");
    c.regions.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      Region r;
      read(v[i], p + "[" + std::to_string(i) + "]", r);
      c.regions.push_back(r);
    }
  });
  f.field("workers", c.workers);
  f.field("lsd_floor", c.lsd_floor);
  f.field("tile", c.tile);
  f.finish();
}

json emit(const PlotConfig& c) {
  return {{"interval", c.interval}, {"width", c.width}, {"height", c.height}};
}

void read(const json& j, const std::string& path, PlotConfig& c) {
  Fields f(j, path);
  f.field("interval", c.interval);
  f.field("width", c.width);
  f.field("height", c.height);
  f.finish();
}

json emit(const RunConfig& c) {
  return {{"synth", emit(c.synth)},
          {"train", emit(c.train)},
          {"eval", emit(c.eval)},
          {"plot", emit(c.plot)}};
}

void read(const json& j, RunConfig& c) {
  Fields f(j, "");
  f.section("synth", [&](const json& v, const std::string&) { read(v, "synth", c.synth); });
  f.section("train", [&](const json& v, const std::string&) { read(v, "train", c.train); });
  f.section("eval", [&](const json& v, const std::string&) { read(v, "eval", c.eval); });
  f.section("plot", [&](const json& v, const std::string&) { read(v, "plot", c.plot); });
  f.finish();
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

void check(const RunConfig& c) {
  check_config(c.synth);
  check_config(c.train);
  if (c.eval.workers < 1) throw ConfigError("eval.workers must be >= 1");
  if (c.eval.lsd_floor < 0.0) throw ConfigError("eval.lsd_floor must be >= 0");
  if (c.eval.tile < 0) throw ConfigError("eval.tile must be >= 0");
  if (c.plot.interval < 1) throw ConfigError("plot.interval must be >= 1");
  if (c.plot.width < 64 || c.plot.height < 64) throw ConfigError("plot size must be >= 64");
}

}  // namespace

RunConfig merge_run_config(RunConfig base, const std::string& text) {
  read(parse_json(text), base);
  check(base);
  return base;
}

RunConfig parse_run_config(const std::string& text) { return merge_run_config(RunConfig{}, text); }

std::string emit_run_config(const RunConfig& cfg) { return emit(cfg).dump(2) + "\n"; }

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot read config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

void save_run_config(const std::filesystem::path& path, const RunConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw FileError("cannot write " + path.string());
  out << emit_run_config(cfg);
}

std::string emit_train_config(const TrainConfig& cfg) { return emit(cfg).dump(); }

TrainConfig parse_train_config(const std::string& text) {
  TrainConfig cfg;
  read(parse_json(text), "train", cfg);
  return cfg;
}

// ----------------------------------------------------------------------------

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"baseline-downgan", "cond-nfs",  "cond-fs5",
                                              "cond-fs9",         "cond-fs13", "cond-pfs5",
                                              "cond-pfs9",        "cond-pfs13"};
  return names;
}

RunConfig preset(std::string_view name) {
  RunConfig cfg;
  // Shared desk-scale setup on the 64x64 fine domain. The crop is the whole
  // domain: the generator's receptive field dwarfs any smaller crop, and a
  // model fitted on small zero-padded crops does not carry over to the full
  // field. Every crop of a pair is then identical, so six crops at batch 1
  // give one 5:1 round per step. Only conditioning and the loss differ
  // between presets.
  cfg.train.crop_size_hr = 64;
  cfg.train.crops_per_pair = 6;
  cfg.train.batch_size = 1;
  cfg.train.max_steps = 2000;
  cfg.train.val_every = 10;
  cfg.train.val_crops_per_pair = 1;
  cfg.train.checkpoint_every = 500;
  cfg.train.generator.n_rrdb = 2;
  cfg.train.generator.trunk_width = 32;
  cfg.train.generator.growth = 16;
  cfg.train.generator.cov_widths = {8, 16, 32};
  cfg.train.critic.base_width = 16;
  cfg.train.critic.head_width = 128;

  if (name == "baseline-downgan") {
    cfg.train.generator.cov_channels = 0;
  } else if (name == "cond-nfs") {
    cfg.train.loss.fs_mode = FsMode::None;
  } else if (name.starts_with("cond-fs") || name.starts_with("cond-pfs")) {
    const bool partial = name.starts_with("cond-pfs");
    const auto digits = name.substr(partial ? 8 : 7);
    if (digits != "5" && digits != "9" && digits != "13") {
      throw ConfigError("unknown preset '" + std::string(name) + "'");
    }
    cfg.train.loss.fs_mode = partial ? FsMode::PFS : FsMode::FS;
    cfg.train.loss.fs_kernel = std::stoll(std::string(digits));
  } else {
    throw ConfigError("unknown preset '" + std::string(name) + "'");
  }
  check(cfg);
  return cfg;
}

}  // namespace windscale
