#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "windscale/grid.hpp"
#include "windscale/losses.hpp"
#include "windscale/networks.hpp"
#include "windscale/preprocess.hpp"

namespace windscale {

struct TrainConfig {
  std::int64_t critic_iters = 5;
  std::int64_t batch_size = 32;
  double lr = 2.5e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  std::int64_t crops_per_pair = 192;
  std::int64_t crop_size_hr = 128;
  LossConfig loss;
  std::int64_t max_steps = 1000;
  std::int64_t val_crops_per_pair = 32;
  /// 0 disables periodic checkpoints; the best-validation checkpoint is
  /// still written.
  std::int64_t checkpoint_every = 0;
  /// Validation cadence in steps. 0 disables validation.
  std::int64_t val_every = 10;
  std::uint64_t seed = 1;
  GeneratorSpec generator;
  CriticSpec critic;
  /// Train in float64. Forced on by WINDSCALE_DETERMINISTIC=1.
  bool fp64 = false;

  bool operator==(const TrainConfig&) const = default;
};

/// Throws ConfigError on critic_iters < 1, crops_per_pair not divisible by
/// batch_size, a crop size that is not a positive multiple of 8 or smaller
/// than the critic accepts, and on an invalid loss or network spec.
void check_config(const TrainConfig& cfg);

/// True when WINDSCALE_DETERMINISTIC is set to a value other than "0".
bool deterministic_mode();
/// Applies deterministic mode to the torch runtime: one intra-op thread and
/// deterministic algorithms. No-op otherwise.
void configure_runtime();
/// float64 when cfg.fp64 or deterministic mode, float32 otherwise.
torch::ScalarType training_dtype(const TrainConfig& cfg);

/// A pair in network space: normalized tensors in the training dtype.
struct PreparedPair {
  torch::Tensor low;         // (7, h, w)
  torch::Tensor high;        // (2, 8h, 8w)
  torch::Tensor covariates;  // (3, 8h, 8w)
  std::int64_t hour = 0;
};

PreparedPair prepare_pair(const SamplePair& pair, const NormStats& norm, torch::ScalarType dtype);
std::vector<PreparedPair> prepare_pairs(std::span<const SamplePair> pairs, const NormStats& norm,
                                        torch::ScalarType dtype);

/// `n` aligned random crops of one pair stacked into a Batch, offsets drawn
/// uniformly over multiples of 8 from `rng`.
Batch draw_crops(const PreparedPair& pair, std::int64_t n, std::int64_t size_hr,
                 std::mt19937_64& rng);

struct UpdateCounters {
  std::int64_t critic = 0;
  std::int64_t generator = 0;
  bool operator==(const UpdateCounters&) const = default;
};

/// Position of batch `index` in the cyclic schedule: critic_iters critic
/// updates followed by one generator update.
bool is_critic_batch(std::int64_t index, std::int64_t critic_iters);
/// Update counts for `n_batches` batches under the cyclic schedule.
UpdateCounters schedule_counts(std::int64_t n_batches, std::int64_t critic_iters);

struct ValidationRecord {
  std::int64_t step = -1;
  double mse = std::numeric_limits<double>::infinity();
};

/// Everything needed to continue training: both networks, both optimizers,
/// the step counter and the sampling RNG.
struct TrainState {
  TrainConfig config;
  NormStats norm;
  Generator generator{nullptr};
  Critic critic{nullptr};
  std::unique_ptr<torch::optim::Adam> generator_opt;
  std::unique_ptr<torch::optim::Adam> critic_opt;
  std::int64_t step = 0;
  std::mt19937_64 rng;
  UpdateCounters updates;
  ValidationRecord best;

  torch::ScalarType dtype() const { return training_dtype(config); }
};

/// Fresh networks initialized from cfg.seed.
TrainState make_state(const TrainConfig& cfg, NormStats norm);

enum class UpdateKind { Critic, Generator };

/// Called around every optimizer update with `before` true, then false.
using UpdateObserver = std::function<void(UpdateKind kind, bool before, const TrainState&)>;

struct StepSummary {
  std::int64_t step = 0;
  std::int64_t hour = 0;
  UpdateCounters updates;
  /// Means over the critic updates of the step.
  LossReport critic;
  /// Means over the generator updates of the step.
  LossReport generator;
  /// Content term of every generator update, in order.
  std::vector<double> content_terms;
};

/// One step: crops_per_pair crops of `pair` consumed in batches under the
/// cyclic critic/generator schedule. Increments state.step by one.
StepSummary training_step(TrainState& state, const PreparedPair& pair,
                          const UpdateObserver& observer = {});

/// Maps a crop batch to generator output in normalized space.
using Predictor = std::function<torch::Tensor(const Batch&)>;
Predictor generator_predictor(const TrainState& state);

/// Mean MSE over val_crops_per_pair crops per pair. Crop offsets use a fixed
/// seed per pair position, so every call sees the same crops.
double validate(const Predictor& predict, std::span<const PreparedPair> val, const TrainConfig& cfg);
double validate(const TrainState& state, std::span<const PreparedPair> val);

// ----------------------------------------------------------------------------
// Checkpoints
// ----------------------------------------------------------------------------

void save_checkpoint(const std::filesystem::path& path, const TrainState& state);
TrainState load_checkpoint(const std::filesystem::path& path);

// ----------------------------------------------------------------------------
// Training runs
// ----------------------------------------------------------------------------

struct StepRecord {
  StepSummary summary;
  /// NaN when validation did not run this step.
  double val_mse = std::numeric_limits<double>::quiet_NaN();
  std::string loss_tag;
};

/// Per-step metrics log, one line per step, tab separated.
std::string format_log_header();
std::string format_log_line(const StepRecord& record);
std::vector<StepRecord> read_metrics_log(const std::filesystem::path& path);

struct RunOptions {
  /// When set, metrics.tsv, checkpoints and norm.txt are written here.
  std::filesystem::path run_dir;
  std::function<void(const StepRecord&)> on_step;
};

struct RunResult {
  std::vector<StepRecord> log;
  std::vector<std::string> files;
};

/// Training pair for step `step`: a per-epoch shuffle that depends only on the
/// seed and the epoch, so a resumed run picks the same pairs.
std::size_t pair_for_step(std::uint64_t seed, std::int64_t step, std::size_t n_pairs);

/// Advances `state` until state.step == state.config.max_steps.
RunResult run(TrainState& state, std::span<const PreparedPair> train,
              std::span<const PreparedPair> val, const RunOptions& opts = {});

/// Fits normalization on `train`, builds fresh networks and runs.
TrainState fit(std::span<const SamplePair> train, std::span<const SamplePair> val,
               const TrainConfig& cfg, RunResult* result = nullptr, const RunOptions& opts = {});

/// Restarts from a checkpoint with a new loss configuration, keeping
/// parameters, optimizer moments and step counter. `cfg` supplies the new
/// budget and cadence; its network specs must match the checkpoint's.
TrainState fine_tune(const std::filesystem::path& checkpoint, const LossConfig& new_loss,
                     const TrainConfig& cfg);
/// Same, from an in-memory state.
void apply_fine_tune(TrainState& state, const LossConfig& new_loss, const TrainConfig& cfg);

}  // namespace windscale
