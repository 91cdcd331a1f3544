#include "windscale/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "windscale/config.hpp"
#include "windscale/error.hpp"
#include "windscale/synth.hpp"

namespace windscale {

namespace {

constexpr std::uint64_t kGeneratorInitStream = 21;
constexpr std::uint64_t kCriticInitStream = 22;
constexpr std::uint64_t kSamplingStream = 23;
constexpr std::uint64_t kValidationStream = 24;
constexpr std::uint64_t kShuffleStream = 25;

std::uint64_t derived_seed(std::uint64_t seed, std::uint64_t stream) {
  return make_engine(seed, stream)();
}

void set_trainable(torch::nn::Module& module, bool on) {
  for (auto& p : module.parameters(true)) p.set_requires_grad(on);
}

torch::optim::AdamOptions adam_options(const TrainConfig& cfg) {
  return torch::optim::AdamOptions(cfg.lr).betas({cfg.beta1, cfg.beta2});
}

void accumulate(LossReport& sum, const LossReport& r) {
  sum.critic_loss += r.critic_loss;
  sum.generator_loss += r.generator_loss;
  sum.gp_term += r.gp_term;
  sum.adv_term += r.adv_term;
  sum.content_term += r.content_term;
  sum.wasserstein_estimate += r.wasserstein_estimate;
  sum.mode = r.mode;
  sum.content_lowpass = r.content_lowpass;
}

void scale(LossReport& r, std::int64_t n) {
  if (n == 0) return;
  const double s = 1.0 / static_cast<double>(n);
  r.critic_loss *= s;
  r.generator_loss *= s;
  r.gp_term *= s;
  r.adv_term *= s;
  r.content_term *= s;
  r.wasserstein_estimate *= s;
}

}  // namespace

void check_config(const TrainConfig& cfg) {
  if (cfg.critic_iters < 1) throw ConfigError("critic_iters must be >= 1");
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (cfg.crops_per_pair < 1 || cfg.crops_per_pair % cfg.batch_size != 0) {
    throw ConfigError("crops_per_pair (" + std::to_string(cfg.crops_per_pair) +
                      ") must be a positive multiple of batch_size (" +
                      std::to_string(cfg.batch_size) + ")");
  }
  if (cfg.crop_size_hr < kScaleFactor || cfg.crop_size_hr % kScaleFactor != 0) {
    throw ConfigError("crop_size_hr must be a positive multiple of 8");
  }
  if (cfg.crop_size_hr < cfg.critic.min_extent()) {
    throw ConfigError("crop_size_hr is smaller than the critic accepts (" +
                      std::to_string(cfg.critic.min_extent()) + ")");
  }
  if (!(cfg.lr > 0.0)) throw ConfigError("lr must be > 0");
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0 && cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (cfg.max_steps < 0) throw ConfigError("max_steps must be >= 0");
  if (cfg.val_crops_per_pair < 1) throw ConfigError("val_crops_per_pair must be >= 1");
  if (cfg.checkpoint_every < 0 || cfg.val_every < 0) {
    throw ConfigError("checkpoint_every and val_every must be >= 0");
  }
  if (cfg.generator.out_channels != cfg.critic.in_channels) {
    throw ConfigError("critic input channels must equal generator output channels");
  }
  check_config(cfg.loss);
  check_spec(cfg.generator);
  check_spec(cfg.critic);
}

bool deterministic_mode() {
  const char* v = std::getenv("WINDSCALE_DETERMINISTIC");
  return v != nullptr && *v != '\0' && std::string_view(v) != "0";
}

void configure_runtime() {
  if (!deterministic_mode()) return;
  torch::set_num_threads(1);
  at::globalContext().setDeterministicAlgorithms(true, false);
}

torch::ScalarType training_dtype(const TrainConfig& cfg) {
  return cfg.fp64 || deterministic_mode() ? torch::kFloat64 : torch::kFloat32;
}

PreparedPair prepare_pair(const SamplePair& pair, const NormStats& norm, torch::ScalarType dtype) {
  auto problems = validate_pair(pair);
  if (!problems.empty()) throw ShapeError("invalid pair: " + problems.front());
  PreparedPair out;
  out.low = apply_norm(pair.low.data(), pair.low.channels(), norm).to(dtype).contiguous();
  out.high = apply_norm(pair.high.data(), pair.high.channels(), norm).to(dtype).contiguous();
  out.covariates =
      apply_norm(pair.covariates.data(), pair.covariates.channels(), norm).to(dtype).contiguous();
  out.hour = pair.hour;
  return out;
}

std::vector<PreparedPair> prepare_pairs(std::span<const SamplePair> pairs, const NormStats& norm,
                                        torch::ScalarType dtype) {
  std::vector<PreparedPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(prepare_pair(p, norm, dtype));
  return out;
}

Batch draw_crops(const PreparedPair& pair, std::int64_t n, std::int64_t size_hr,
                 std::mt19937_64& rng) {
  const auto h = pair.high.size(1), w = pair.high.size(2);
  if (size_hr % kScaleFactor != 0 || size_hr < kScaleFactor) {
    throw ConfigError("crop size must be a positive multiple of 8");
  }
  if (size_hr > h || size_hr > w) {
    throw ConfigError("crop size " + std::to_string(size_hr) + " exceeds the " + std::to_string(h) +
                      "x" + std::to_string(w) + " domain");
  }
  std::uniform_int_distribution<std::int64_t> row(0, (h - size_hr) / kScaleFactor);
  std::uniform_int_distribution<std::int64_t> col(0, (w - size_hr) / kScaleFactor);
  const auto size_lr = size_hr / kScaleFactor;
  std::vector<torch::Tensor> low, high, cov;
  low.reserve(static_cast<std::size_t>(n));
  high.reserve(static_cast<std::size_t>(n));
  cov.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    const auto top = row(rng), left = col(rng);
    low.push_back(pair.low.narrow(1, top, size_lr).narrow(2, left, size_lr));
    high.push_back(pair.high.narrow(1, top * kScaleFactor, size_hr)
                       .narrow(2, left * kScaleFactor, size_hr));
    cov.push_back(pair.covariates.narrow(1, top * kScaleFactor, size_hr)
                      .narrow(2, left * kScaleFactor, size_hr));
  }
  return {torch::stack(low), torch::stack(high), torch::stack(cov)};
}

bool is_critic_batch(std::int64_t index, std::int64_t critic_iters) {
  return index % (critic_iters + 1) < critic_iters;
}

UpdateCounters schedule_counts(std::int64_t n_batches, std::int64_t critic_iters) {
  UpdateCounters c;
  c.generator = n_batches / (critic_iters + 1);
  c.critic = n_batches - c.generator;
  return c;
}

TrainState make_state(const TrainConfig& cfg, NormStats norm) {
  check_config(cfg);
  configure_runtime();
  TrainState s;
  s.config = cfg;
  s.norm = std::move(norm);
  s.generator = Generator(cfg.generator);
  s.critic = Critic(cfg.critic);
  initialize_parameters(*s.generator, derived_seed(cfg.seed, kGeneratorInitStream),
                        cfg.generator.leaky_slope);
  initialize_parameters(*s.critic, derived_seed(cfg.seed, kCriticInitStream),
                        cfg.critic.leaky_slope);
  s.generator->to(s.dtype());
  s.critic->to(s.dtype());
  s.generator_opt =
      std::make_unique<torch::optim::Adam>(s.generator->parameters(), adam_options(cfg));
  s.critic_opt = std::make_unique<torch::optim::Adam>(s.critic->parameters(), adam_options(cfg));
  s.rng = make_engine(cfg.seed, kSamplingStream);
  return s;
}

StepSummary training_step(TrainState& state, const PreparedPair& pair,
                          const UpdateObserver& observer) {
  const auto& cfg = state.config;
  check_config(cfg);
  auto crops = draw_crops(pair, cfg.crops_per_pair, cfg.crop_size_hr, state.rng);
  const auto n_batches = cfg.crops_per_pair / cfg.batch_size;
  const CriticFn critic_fn = [&](const torch::Tensor& x) { return state.critic->forward(x); };
  auto notify = [&](UpdateKind kind, bool before) {
    if (observer) observer(kind, before, state);
  };

  StepSummary summary;
  summary.hour = pair.hour;
  for (std::int64_t b = 0; b < n_batches; ++b) {
    const auto first = b * cfg.batch_size;
    auto low = crops.low.narrow(0, first, cfg.batch_size);
    auto high = crops.high.narrow(0, first, cfg.batch_size);
    auto cov = crops.covariates.narrow(0, first, cfg.batch_size);

    if (is_critic_batch(b, cfg.critic_iters)) {
      torch::Tensor fake;
      {
        torch::NoGradGuard no_grad;
        fake = state.generator->forward(low, cov);
      }
      auto eps = draw_epsilon(cfg.batch_size, state.rng, state.dtype());
      notify(UpdateKind::Critic, true);
      auto result = critic_loss(critic_fn, high, fake, cfg.loss, eps);
      state.critic_opt->zero_grad();
      result.loss.backward();
      state.critic_opt->step();
      ++summary.updates.critic;
      accumulate(summary.critic, result.report);
      notify(UpdateKind::Critic, false);
    } else {
      set_trainable(*state.critic, false);
      notify(UpdateKind::Generator, true);
      auto out = state.generator->forward(low, cov);
      LossResult result;
      try {
        result = generator_loss(critic_fn, out, high, cfg.loss);
      } catch (...) {
        set_trainable(*state.critic, true);
        throw;
      }
      state.generator_opt->zero_grad();
      result.loss.backward();
      state.generator_opt->step();
      set_trainable(*state.critic, true);
      ++summary.updates.generator;
      summary.content_terms.push_back(result.report.content_term);
      accumulate(summary.generator, result.report);
      notify(UpdateKind::Generator, false);
    }
  }
  scale(summary.critic, summary.updates.critic);
  scale(summary.generator, summary.updates.generator);
  summary.critic.mode = summary.generator.mode = cfg.loss.fs_mode;
  state.updates.critic += summary.updates.critic;
  state.updates.generator += summary.updates.generator;
  summary.step = ++state.step;
  return summary;
}

Predictor generator_predictor(const TrainState& state) {
  auto generator = state.generator;
  return [generator](const Batch& b) mutable { return generator->forward(b.low, b.covariates); };
}

double validate(const Predictor& predict, std::span<const PreparedPair> val,
                const TrainConfig& cfg) {
  if (val.empty()) throw ConfigError("validation set is empty");
  torch::NoGradGuard no_grad;
  double sum = 0.0;
  std::int64_t count = 0;
  for (std::size_t i = 0; i < val.size(); ++i) {
    auto rng = make_engine(cfg.seed, kValidationStream, i);
    auto crops = draw_crops(val[i], cfg.val_crops_per_pair, cfg.crop_size_hr, rng);
    for (std::int64_t first = 0; first < cfg.val_crops_per_pair; first += cfg.batch_size) {
      const auto n = std::min(cfg.batch_size, cfg.val_crops_per_pair - first);
      Batch b{crops.low.narrow(0, first, n), crops.high.narrow(0, first, n),
              crops.covariates.narrow(0, first, n)};
      auto out = predict(b);
      if (out.sizes() != b.high.sizes()) throw ShapeError("predictor output has the wrong shape");
      sum += (out.to(torch::kFloat64) - b.high.to(torch::kFloat64)).square().sum().item<double>();
      count += b.high.numel();
    }
  }
  return sum / static_cast<double>(count);
}

double validate(const TrainState& state, std::span<const PreparedPair> val) {
  return validate(generator_predictor(state), val, state.config);
}

// ----------------------------------------------------------------------------

namespace {

constexpr const char* kCheckpointFormat = "windscale-checkpoint-1";

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const TrainState& state) {
  using nlohmann::json;
  std::ostringstream rng;
  rng << state.rng;
  json meta = {{"format", kCheckpointFormat},
               {"step", state.step},
               {"rng", rng.str()},
               {"critic_updates", state.updates.critic},
               {"generator_updates", state.updates.generator},
               {"best_step", state.best.step},
               {"best_mse", std::isfinite(state.best.mse) ? json(state.best.mse) : json(nullptr)},
               {"train", json::parse(emit_train_config(state.config))},
               {"norm", format_norm_stats(state.norm)}};

  torch::serialize::OutputArchive archive, gen, crit, gen_opt, crit_opt;
  state.generator->save(gen);
  state.critic->save(crit);
  state.generator_opt->save(gen_opt);
  state.critic_opt->save(crit_opt);
  archive.write("generator", gen);
  archive.write("critic", crit);
  archive.write("generator_opt", gen_opt);
  archive.write("critic_opt", crit_opt);
  archive.write("meta", c10::IValue(meta.dump()));
  try {
    archive.save_to(path.string());
  } catch (const c10::Error& e) {
    throw FileError("cannot write checkpoint " + path.string() + ": " + e.what_without_backtrace());
  }
}

TrainState load_checkpoint(const std::filesystem::path& path) {
  using nlohmann::json;
  if (!std::filesystem::exists(path)) throw FileError("checkpoint not found: " + path.string());
  torch::serialize::InputArchive archive;
  json meta;
  try {
    archive.load_from(path.string());
    c10::IValue text;
    if (!archive.try_read("meta", text) || !text.isString()) {
      throw FileError("checkpoint " + path.string() + " has no metadata");
    }
    meta = json::parse(text.toStringRef());
  } catch (const c10::Error& e) {
    throw FileError("cannot read checkpoint " + path.string() + ": " + e.what_without_backtrace());
  } catch (const json::exception& e) {
    throw FileError("corrupt checkpoint metadata in " + path.string());
  }
  if (meta.value("format", "") != kCheckpointFormat) {
    throw FileError("unsupported checkpoint format in " + path.string());
  }

  auto cfg = parse_train_config(meta.at("train").dump());
  auto state = make_state(cfg, parse_norm_stats(meta.at("norm").get<std::string>()));
  try {
    torch::serialize::InputArchive gen, crit, gen_opt, crit_opt;
    archive.read("generator", gen);
    archive.read("critic", crit);
    archive.read("generator_opt", gen_opt);
    archive.read("critic_opt", crit_opt);
    state.generator->load(gen);
    state.critic->load(crit);
    state.generator_opt->load(gen_opt);
    state.critic_opt->load(crit_opt);
  } catch (const c10::Error& e) {
    throw ConfigError("checkpoint " + path.string() +
                      " does not match its recorded network spec: " + e.what_without_backtrace());
  }
  state.step = meta.at("step").get<std::int64_t>();
  std::istringstream rng(meta.at("rng").get<std::string>());
  rng >> state.rng;
  state.updates.critic = meta.at("critic_updates").get<std::int64_t>();
  state.updates.generator = meta.at("generator_updates").get<std::int64_t>();
  state.best.step = meta.at("best_step").get<std::int64_t>();
  if (!meta.at("best_mse").is_null()) state.best.mse = meta.at("best_mse").get<double>();
  return state;
}

// ----------------------------------------------------------------------------

std::string format_log_header() {
  return "step\thour\tloss\tcritic_loss\tgp\twasserstein\tgenerator_loss\tadv\tcontent\t"
         "content_lowpass\tcritic_updates\tgenerator_updates\tval_mse";
}

std::string format_log_line(const StepRecord& r) {
  const auto& s = r.summary;
  std::ostringstream out;
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << s.step << '\t' << s.hour << '\t' << r.loss_tag << '\t' << s.critic.critic_loss << '\t'
      << s.critic.gp_term << '\t' << s.critic.wasserstein_estimate << '\t'
      << s.generator.generator_loss << '\t' << s.generator.adv_term << '\t'
      << s.generator.content_term << '\t' << (s.generator.content_lowpass ? 1 : 0) << '\t'
      << s.updates.critic << '\t' << s.updates.generator << '\t';
  if (std::isnan(r.val_mse)) {
    out << "nan";
  } else {
    out << r.val_mse;
  }
  return out.str();
}

std::vector<StepRecord> read_metrics_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot read metrics log " + path.string());
  std::vector<StepRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.starts_with("step\t")) continue;
    std::istringstream fields(line);
    StepRecord r;
    auto& s = r.summary;
    std::string val;
    int lowpass = 0;
    if (!(fields >> s.step >> s.hour >> r.loss_tag >> s.critic.critic_loss >> s.critic.gp_term >>
          s.critic.wasserstein_estimate >> s.generator.generator_loss >> s.generator.adv_term >>
          s.generator.content_term >> lowpass >> s.updates.critic >> s.updates.generator >> val)) {
      throw FileError(path.string() + ":" + std::to_string(line_no) + ": malformed log line");
    }
    s.generator.content_lowpass = lowpass != 0;
    r.val_mse = std::strtod(val.c_str(), nullptr);
    out.push_back(std::move(r));
  }
  return out;
}

std::size_t pair_for_step(std::uint64_t seed, std::int64_t step, std::size_t n_pairs) {
  if (n_pairs == 0) throw ConfigError("training set is empty");
  const auto n = static_cast<std::int64_t>(n_pairs);
  std::vector<std::size_t> order(n_pairs);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto rng = make_engine(seed, kShuffleStream, static_cast<std::uint64_t>(step / n));
  std::shuffle(order.begin(), order.end(), rng);
  return order[static_cast<std::size_t>(step % n)];
}

RunResult run(TrainState& state, std::span<const PreparedPair> train,
              std::span<const PreparedPair> val, const RunOptions& opts) {
  const auto& cfg = state.config;
  check_config(cfg);
  if (train.empty()) throw ConfigError("training set is empty");
  RunResult result;
  std::ofstream log;
  const bool persist = !opts.run_dir.empty();
  if (persist) {
    std::filesystem::create_directories(opts.run_dir);
    const auto log_path = opts.run_dir / "metrics.tsv";
    const bool fresh = !std::filesystem::exists(log_path);
    log.open(log_path, std::ios::app);
    if (!log) throw FileError("cannot write " + log_path.string());
    if (fresh) log << format_log_header() << '\n';
    save_norm_stats(opts.run_dir / "norm.txt", state.norm);
    result.files = {"metrics.tsv", "norm.txt"};
  }
  auto add_file = [&](const std::string& name) {
    if (std::find(result.files.begin(), result.files.end(), name) == result.files.end()) {
      result.files.push_back(name);
    }
  };

  while (state.step < cfg.max_steps) {
    const auto idx = pair_for_step(cfg.seed, state.step, train.size());
    StepRecord record;
    record.summary = training_step(state, train[idx]);
    record.loss_tag = describe(cfg.loss);
    const auto step = state.step;
    if (cfg.val_every > 0 && step % cfg.val_every == 0 && !val.empty()) {
      record.val_mse = validate(state, val);
      if (record.val_mse < state.best.mse) {
        state.best = {step, record.val_mse};
        if (persist) {
          save_checkpoint(opts.run_dir / "best.pt", state);
          add_file("best.pt");
        }
      }
    }
    if (persist && cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0) {
      std::ostringstream name;
      name << "ckpt_" << std::setw(6) << std::setfill('0') << step << ".pt";
      save_checkpoint(opts.run_dir / name.str(), state);
      add_file(name.str());
    }
    if (persist) log << format_log_line(record) << '\n' << std::flush;
    if (opts.on_step) opts.on_step(record);
    result.log.push_back(std::move(record));
  }
  if (persist) {
    save_checkpoint(opts.run_dir / "last.pt", state);
    add_file("last.pt");
  }
  return result;
}

TrainState fit(std::span<const SamplePair> train, std::span<const SamplePair> val,
               const TrainConfig& cfg, RunResult* result, const RunOptions& opts) {
  check_config(cfg);
  if (train.empty()) throw ConfigError("training set is empty");
  for (const auto& t : train) {
    for (const auto& v : val) {
      if (t.timestamp == v.timestamp && t.hour == v.hour) {
        throw ConfigError("training and validation splits share hour " + t.timestamp);
      }
    }
  }
  auto state = make_state(cfg, fit_norm(train));
  auto train_p = prepare_pairs(train, state.norm, state.dtype());
  auto val_p = prepare_pairs(val, state.norm, state.dtype());
  auto r = run(state, train_p, val_p, opts);
  if (result) *result = std::move(r);
  return state;
}

void apply_fine_tune(TrainState& state, const LossConfig& new_loss, const TrainConfig& cfg) {
  if (cfg.generator != state.config.generator || cfg.critic != state.config.critic) {
    throw ConfigError("network spec of the checkpoint differs from the configured one");
  }
  check_config(new_loss);
  auto next = cfg;
  next.loss = new_loss;
  next.fp64 = state.config.fp64;
  check_config(next);
  state.config = next;
  for (auto* opt : {state.generator_opt.get(), state.critic_opt.get()}) {
    for (auto& group : opt->param_groups()) {
      static_cast<torch::optim::AdamOptions&>(group.options())
          .lr(next.lr)
          .betas({next.beta1, next.beta2});
    }
  }
}

TrainState fine_tune(const std::filesystem::path& checkpoint, const LossConfig& new_loss,
                     const TrainConfig& cfg) {
  auto state = load_checkpoint(checkpoint);
  apply_fine_tune(state, new_loss, cfg);
  return state;
}

}  // namespace windscale
