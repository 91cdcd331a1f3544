#include <doctest.h>

#include <fstream>

#include <cstdlib>
#include <set>

#include "support.hpp"
#include "windscale/error.hpp"

using namespace windscale;

namespace {

struct Prepared {
  NormStats norm;
  std::vector<PreparedPair> train;
  std::vector<PreparedPair> val;
};

const Prepared& prepared() {
  static const Prepared p = [] {
    const auto& data = wt::shared_dataset();
    Prepared out;
    out.norm = fit_norm(data.train);
    out.train = prepare_pairs(data.train, out.norm, torch::kFloat64);
    out.val = prepare_pairs(data.val, out.norm, torch::kFloat64);
    return out;
  }();
  return p;
}

void force_deterministic() {
  ::setenv("WINDSCALE_DETERMINISTIC", "1", 1);
  configure_runtime();
}

bool same_report(const LossReport& a, const LossReport& b) {
  return a.critic_loss == b.critic_loss && a.generator_loss == b.generator_loss &&
         a.gp_term == b.gp_term && a.adv_term == b.adv_term && a.content_term == b.content_term;
}

}  // namespace

TEST_SUITE("training") {
  TEST_CASE("cyclic schedule arithmetic") {
    CHECK(schedule_counts(6, 5) == UpdateCounters{5, 1});
    for (std::int64_t n = 0; n <= 40; ++n) {
      const auto c = schedule_counts(n, 5);
      CHECK(c.generator == n / 6);
      CHECK(c.critic == n - n / 6);
    }
    CHECK(is_critic_batch(4, 5));
    CHECK_FALSE(is_critic_batch(5, 5));
    CHECK(is_critic_batch(6, 5));
  }

  TEST_CASE("configuration checks") {
    auto cfg = wt::tiny_train_config();
    CHECK_NOTHROW(check_config(cfg));
    cfg.crops_per_pair = 13;
    CHECK_THROWS_AS(check_config(cfg), ConfigError);
    cfg = wt::tiny_train_config();
    cfg.crop_size_hr = 12;
    CHECK_THROWS_AS(check_config(cfg), ConfigError);
    cfg.crop_size_hr = 8;  // below the critic's minimum extent of 16
    CHECK_THROWS_AS(check_config(cfg), ConfigError);
    cfg = wt::tiny_train_config();
    cfg.critic_iters = 0;
    CHECK_THROWS_AS(check_config(cfg), ConfigError);
    cfg = wt::tiny_train_config();
    cfg.critic.in_channels = 3;
    CHECK_THROWS_AS(check_config(cfg), ConfigError);
  }

  TEST_CASE("crops are aligned and bounded") {
    const auto& p = prepared().train[0];
    std::mt19937_64 rng(3);
    const auto b = draw_crops(p, 5, 16, rng);
    CHECK(b.low.sizes() == torch::IntArrayRef{5, 7, 2, 2});
    CHECK(b.high.sizes() == torch::IntArrayRef{5, 2, 16, 16});
    CHECK(b.covariates.sizes() == torch::IntArrayRef{5, 3, 16, 16});
    CHECK_THROWS_AS(draw_crops(p, 1, 72, rng), ConfigError);
    // The full-size crop has a single possible offset.
    const auto whole = draw_crops(p, 2, 64, rng);
    CHECK(torch::equal(whole.high[1], p.high));
  }

  TEST_CASE("one step performs one 5:1 round and freezes the idle network") {
    auto state = make_state(wt::tiny_train_config(), prepared().norm);
    std::vector<UpdateKind> kinds;
    std::uint64_t g_before = 0, c_before = 0;
    bool frozen = true, moved = true;
    auto observer = [&](UpdateKind kind, bool before, const TrainState& s) {
      const auto g = parameter_hash(*s.generator), c = parameter_hash(*s.critic);
      if (before) {
        g_before = g;
        c_before = c;
        kinds.push_back(kind);
        return;
      }
      if (kind == UpdateKind::Critic) {
        frozen = frozen && g == g_before;
        moved = moved && c != c_before;
      } else {
        frozen = frozen && c == c_before;
        moved = moved && g != g_before;
      }
    };
    const auto summary = training_step(state, prepared().train[0], observer);
    CHECK(state.step == 1);
    CHECK(summary.updates == UpdateCounters{5, 1});
    CHECK(state.updates == UpdateCounters{5, 1});
    CHECK(kinds.size() == 6);
    CHECK(kinds.back() == UpdateKind::Generator);
    CHECK(frozen);
    CHECK(moved);
    CHECK(summary.content_terms.size() == 1);
    // The critic keeps its gradients enabled after a generator update.
    for (const auto& p : state.critic->parameters()) CHECK(p.requires_grad());

    auto cfg = wt::tiny_train_config();
    cfg.crops_per_pair = 24;
    auto longer = make_state(cfg, prepared().norm);
    CHECK(training_step(longer, prepared().train[1]).updates == UpdateCounters{10, 2});
  }

  TEST_CASE("checkpoint resume is bit-identical in deterministic mode") {
    force_deterministic();
    wt::TempDir dir("ckpt");
    const auto& pairs = prepared().train;
    auto state = make_state(wt::tiny_train_config(), prepared().norm);
    training_step(state, pairs[0]);
    save_checkpoint(dir.path / "a.pt", state);

    const auto s1 = training_step(state, pairs[1]);
    const auto s2 = training_step(state, pairs[2]);

    auto resumed = load_checkpoint(dir.path / "a.pt");
    CHECK(resumed.step == 1);
    CHECK(resumed.config == state.config);
    CHECK(resumed.norm == state.norm);
    const auto r1 = training_step(resumed, pairs[1]);
    const auto r2 = training_step(resumed, pairs[2]);
    CHECK(same_report(r1.critic, s1.critic));
    CHECK(same_report(r1.generator, s1.generator));
    CHECK(same_report(r2.critic, s2.critic));
    CHECK(same_report(r2.generator, s2.generator));
    CHECK(parameter_hash(*resumed.generator) == parameter_hash(*state.generator));
    CHECK(parameter_hash(*resumed.critic) == parameter_hash(*state.critic));
    CHECK(resumed.updates == state.updates);

    // Parameters survive serialization bit for bit.
    save_checkpoint(dir.path / "b.pt", state);
    const auto again = load_checkpoint(dir.path / "b.pt");
    CHECK(parameter_hash(*again.generator) == parameter_hash(*state.generator));
  }

  TEST_CASE("checkpoint errors") {
    wt::TempDir dir("ckpt");
    CHECK_THROWS_AS(load_checkpoint(dir.path / "none.pt"), FileError);
    std::ofstream(dir.path / "junk.pt") << "junk";
    CHECK_THROWS_AS(load_checkpoint(dir.path / "junk.pt"), FileError);
  }

  TEST_CASE("supervised mode decreases the content loss on a fixed crop") {
    force_deterministic();
    auto cfg = wt::tiny_train_config();
    cfg.loss.gamma_adv = 0.0;
    cfg.loss.lambda_gp = 0.0;
    cfg.crop_size_hr = 32;
    cfg.crops_per_pair = 6;
    cfg.batch_size = 1;
    auto state = make_state(cfg, prepared().norm);
    const auto& full = prepared().train[0];
    PreparedPair fixed{full.low.slice(1, 0, 4).slice(2, 0, 4),
                       full.high.slice(1, 0, 32).slice(2, 0, 32),
                       full.covariates.slice(1, 0, 32).slice(2, 0, 32), full.hour};
    std::vector<double> content;
    for (int i = 0; i < 50; ++i) {
      const auto s = training_step(state, fixed);
      content.insert(content.end(), s.content_terms.begin(), s.content_terms.end());
    }
    REQUIRE(content.size() == 50);
    bool strictly = true;
    for (std::size_t i = 1; i < content.size(); ++i) strictly = strictly && content[i] < content[i - 1];
    CHECK(strictly);
  }

  TEST_CASE("validation oracles") {
    const auto& val = prepared().val;
    const auto cfg = wt::tiny_train_config();
    Predictor oracle = [](const Batch& b) { return b.high; };
    Predictor offset = [](const Batch& b) { return b.high + 1.0; };
    CHECK(validate(oracle, val, cfg) == 0.0);
    CHECK(validate(offset, val, cfg) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(validate(oracle, std::span<const PreparedPair>{}, cfg), ConfigError);

    // Fixed crops: repeated validation of a fixed model is identical.
    auto state = make_state(cfg, prepared().norm);
    CHECK(validate(state, val) == validate(state, val));
  }

  TEST_CASE("fine-tune switches the content term to low-pass fields") {
    force_deterministic();
    wt::TempDir dir("ft");
    const auto cfg = wt::tiny_train_config();
    auto state = make_state(cfg, prepared().norm);
    CHECK_FALSE(training_step(state, prepared().train[0]).generator.content_lowpass);
    save_checkpoint(dir.path / "mid.pt", state);

    auto fs = fine_tune(dir.path / "mid.pt", with_mode(cfg.loss, "fs:5"), cfg);
    CHECK(fs.step == 1);
    CHECK(describe(fs.config.loss) == "fs:5");
    const auto s = training_step(fs, prepared().train[1]);
    CHECK(s.generator.content_lowpass);
    CHECK(s.generator.mode == FsMode::FS);
    StepRecord rec{s, std::numeric_limits<double>::quiet_NaN(), describe(fs.config.loss)};
    CHECK(format_log_line(rec).find("\tfs:5\t") != std::string::npos);

    // Same loss: the trajectory continues as if never interrupted.
    auto same = fine_tune(dir.path / "mid.pt", cfg.loss, cfg);
    const auto a = training_step(same, prepared().train[1]);
    const auto b = training_step(state, prepared().train[1]);
    CHECK(same_report(a.generator, b.generator));
    CHECK(parameter_hash(*same.generator) == parameter_hash(*state.generator));

    auto other = cfg;
    other.generator.trunk_width = 12;
    CHECK_THROWS_AS(fine_tune(dir.path / "mid.pt", cfg.loss, other), ConfigError);
  }

  TEST_CASE("pair order is a per-epoch permutation") {
    for (std::int64_t epoch = 0; epoch < 3; ++epoch) {
      std::set<std::size_t> seen;
      for (std::int64_t i = 0; i < 9; ++i) seen.insert(pair_for_step(5, epoch * 9 + i, 9));
      CHECK(seen.size() == 9);
    }
    CHECK(pair_for_step(5, 20, 9) == pair_for_step(5, 20, 9));
  }

  TEST_CASE("run writes logs and checkpoints and resumes without duplication") {
    force_deterministic();
    wt::TempDir dir("run");
    auto cfg = wt::tiny_train_config();
    cfg.checkpoint_every = 2;
    RunResult result;
    RunOptions opts;
    opts.run_dir = dir.path;
    auto state = fit(wt::shared_dataset().train, wt::shared_dataset().val, cfg, &result, opts);
    CHECK(state.step == 4);
    CHECK(result.log.size() == 4);
    CHECK(std::isnan(result.log[0].val_mse));
    CHECK(std::isfinite(result.log[1].val_mse));
    for (auto f : {"metrics.tsv", "norm.txt", "last.pt", "best.pt", "ckpt_000002.pt",
                   "ckpt_000004.pt"}) {
      CHECK_MESSAGE(std::filesystem::exists(dir.path / f), f);
    }
    const auto log = read_metrics_log(dir.path / "metrics.tsv");
    REQUIRE(log.size() == 4);
    CHECK(log[3].summary.generator.content_term == result.log[3].summary.generator.content_term);
    CHECK(log[1].val_mse == result.log[1].val_mse);
    CHECK(log[0].loss_tag == "none");

    auto resumed = load_checkpoint(dir.path / "ckpt_000002.pt");
    resumed.config.max_steps = 6;
    RunOptions more = opts;
    more.run_dir = dir.path / "cont";
    const auto extra = run(resumed, prepared().train, prepared().val, more);
    CHECK(extra.log.size() == 4);
    CHECK(extra.log.front().summary.step == 3);
  }

  TEST_CASE("overlapping splits are rejected") {
    const auto& data = wt::shared_dataset();
    std::vector<SamplePair> val{data.train[0]};
    CHECK_THROWS_AS(fit(data.train, val, wt::tiny_train_config()), ConfigError);
  }
}
