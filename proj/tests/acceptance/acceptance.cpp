// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--criteria 1,2,...] [--work-dir DIR]
//
// Criteria 5-7 share three desk-scale training runs (conditional, baseline,
// FS(5) fine-tune); selecting any of them trains all three. Exit status is 0
// only when every selected criterion passes.

#include <chrono>
#include <complex>
#include <iomanip>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "../support.hpp"
#include "windscale/config.hpp"
#include "windscale/error.hpp"
#include "windscale/inference.hpp"
#include "windscale/losses.hpp"
#include "windscale/metrics.hpp"
#include "windscale/plot.hpp"

using namespace windscale;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

/// Collects named checks; a criterion passes when all of them hold.
class Verdict {
 public:
  void check(bool ok, const std::string& what) {
    if (!ok) failed_.push_back(what);
    ++count_;
  }
  /// Like check, but the measured values are reported on success too.
  void report(bool ok, const std::string& what) {
    check(ok, what);
    if (ok) notes_.push_back(what);
  }
  void note(const std::string& s) { notes_.push_back(s); }
  bool ok() const { return failed_.empty(); }
  std::string detail() const {
    std::ostringstream out;
    out << count_ - failed_.size() << "/" << count_ << " checks";
    for (const auto& n : notes_) out << "; " << n;
    for (const auto& f : failed_) out << "; FAILED " << f;
    return out.str();
  }

 private:
  std::vector<std::string> failed_;
  std::vector<std::string> notes_;
  std::int64_t count_ = 0;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s << std::setprecision(digits) << v;
  return s.str();
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

torch::Tensor dtensor(std::vector<std::int64_t> shape, std::uint64_t seed) {
  return wt::randn64(std::move(shape), seed);
}

// ---------------------------------------------------------------------------
// 1. Exact numerics
// ---------------------------------------------------------------------------

Rapsd direct_dft_rapsd(const torch::Tensor& x) {
  const auto H = x.size(0), W = x.size(1), m = std::min(H, W), rings = m / 2;
  auto a = x.accessor<double, 2>();
  std::vector<double> sum(rings + 1, 0.0);
  std::vector<std::int64_t> cnt(rings + 1, 0);
  auto freq = [](std::int64_t k, std::int64_t n) {
    return static_cast<double>(k < (n + 1) / 2 ? k : k - n) / static_cast<double>(n);
  };
  for (std::int64_t ky = 0; ky < H; ++ky)
    for (std::int64_t kx = 0; kx < W; ++kx) {
      std::complex<double> acc = 0.0;
      for (std::int64_t y = 0; y < H; ++y)
        for (std::int64_t xx = 0; xx < W; ++xx)
          acc += a[y][xx] * std::polar(1.0, -2.0 * M_PI * (static_cast<double>(ky * y) / H +
                                                           static_cast<double>(kx * xx) / W));
      const double fy = freq(ky, H), fx = freq(kx, W);
      const auto r = static_cast<std::int64_t>(std::llround(std::sqrt(fy * fy + fx * fx) * m));
      if (r < 1 || r > rings) continue;
      sum[r] += std::norm(acc) / static_cast<double>(H * W);
      ++cnt[r];
    }
  Rapsd out;
  out.cells = H * W;
  for (std::int64_t r = 1; r <= rings; ++r) {
    out.wavenumber.push_back(static_cast<double>(r) / m);
    out.power.push_back(sum[r] / cnt[r]);
    out.counts.push_back(cnt[r]);
  }
  return out;
}

Verdict criterion_numerics() {
  Verdict v;
  // Frequency decomposition identity. Two roundings (x - low, then low + high)
  // bound the residual by 2 eps max(|x|, |low|) per element.
  const auto x = dtensor({2, 2, 40, 36}, 1) * 5.0;
  const double ulp = std::numeric_limits<double>::epsilon();
  bool exact = true;
  for (std::int64_t k : {1, 3, 5, 9, 13, 21}) {
    const auto p = split_frequencies(x, k);
    const auto bound = 2.0 * ulp * torch::maximum(x.abs(), p.low.abs());
    exact = exact && ((p.low + p.high - x).abs() <= bound).all().item<bool>();
  }
  v.check(exact, "low + high == x to machine precision");

  // Pixel shuffle bijection.
  const auto s4 = torch::tensor({1.0, 2.0, 3.0, 4.0}).reshape({1, 4, 1, 1});
  v.check(torch::equal(windscale::pixel_shuffle(s4, 2), torch::tensor({1.0, 2.0, 3.0, 4.0}).reshape({1, 1, 2, 2})),
          "pixel_shuffle [a,b,c,d]");
  const auto f = dtensor({2, 64, 5, 6}, 2);
  const auto sh = windscale::pixel_shuffle(f, 2);
  v.check(sh.sizes() == torch::IntArrayRef{2, 16, 10, 12}, "pixel_shuffle 64 -> 16 channels");
  v.check(torch::equal(windscale::pixel_unshuffle(sh, 2), f), "inverse(shuffle(x)) == x");
  v.check(torch::equal(windscale::pixel_shuffle(windscale::pixel_unshuffle(sh, 2), 2), sh), "shuffle(inverse(y)) == y");

  // Gradient penalty analytic cases.
  const auto real = dtensor({4, 2, 16, 16}, 3), fake = dtensor({4, 2, 16, 16}, 4);
  const auto eps = torch::tensor({0.1, 0.4, 0.7, 1.0}, torch::kFloat64);
  auto linear = [](double scale) -> CriticFn {
    return [scale](const torch::Tensor& y) {
      return y.sum({1, 2, 3}) * (scale / std::sqrt(static_cast<double>(y[0].numel())));
    };
  };
  CriticFn zero = [](const torch::Tensor& y) { return (y * 0.0).sum({1, 2, 3}); };
  const double gp1 = gradient_penalty(linear(1.0), real, fake, eps).item<double>();
  const double gp0 = gradient_penalty(zero, real, fake, eps).item<double>();
  const double gp2 = gradient_penalty(linear(2.0), real, fake, eps).item<double>();
  v.check(std::abs(gp1) <= 1e-6, "unit-gradient critic -> 0 (" + fmt(gp1) + ")");
  v.check(std::abs(gp0 - 1.0) <= 1e-6, "zero critic -> 1");
  v.check(std::abs(gp2 - 1.0) <= 1e-6, "doubled critic -> 1");

  // LSD.
  auto rng = make_engine(5, 0);
  const auto field = power_law_field(32, 32, 3.0, rng);
  const auto a = rapsd(field);
  auto tenth = a;
  for (auto& p : tenth.power) p /= 10.0;
  const auto b = rapsd(power_law_field(32, 32, 2.0, rng));
  v.check(lsd(a, a) == 0.0, "lsd(a, a) == 0");
  v.check(std::abs(lsd(a, tenth) - 10.0) <= 1e-9, "uniform x10 ratio -> 10 dB");
  v.check(lsd(a, b) == lsd(b, a), "lsd symmetric");

  // RAPSD vs the direct DFT ring oracle.
  double worst = 0.0;
  bool same_bins = true;
  for (std::uint64_t seed : {6, 7, 8, 9}) {
    const auto g = dtensor({8, 8}, seed);
    const auto fast = rapsd(g), slow = direct_dft_rapsd(g);
    same_bins = same_bins && fast.counts == slow.counts && fast.wavenumber == slow.wavenumber;
    for (std::size_t i = 0; i < fast.size() && i < slow.size(); ++i)
      worst = std::max(worst, std::abs(fast.power[i] - slow.power[i]) / std::abs(slow.power[i]));
  }
  v.check(same_bins, "RAPSD bins == DFT oracle bins");
  v.check(worst <= 1e-12, "RAPSD powers == DFT oracle (rel " + fmt(worst, 2) + ")");

  // Median / MAD.
  const auto mm = median_mad({1.0, 2.0, 3.0});
  v.check(mm.median == 2.0 && mm.mad == 1.0, "[1,2,3] -> median 2, MAD 1");
  v.check(median_mad({5.0, 5.0, 5.0}).mad == 0.0, "constant -> MAD 0");
  v.check(median_mad({4.0, 1.0, 3.0, 2.0}).median == 2.5, "even count median");
  return v;
}

// ---------------------------------------------------------------------------
// 2. Shape contracts
// ---------------------------------------------------------------------------

Verdict criterion_shapes() {
  Verdict v;
  torch::NoGradGuard no_grad;
  Generator gen(GeneratorSpec{});
  initialize_parameters(*gen, 1);
  gen->eval();
  const auto params = parameter_count(*gen);

  auto out = gen->forward(torch::randn({32, 7, 16, 16}), torch::randn({3, 128, 128}));
  v.check(out.sizes() == torch::IntArrayRef{32, 2, 128, 128}, "(32,7,16,16)+(3,128,128) -> (32,2,128,128)");
  out = torch::Tensor();

  v.check(trim_to_multiple({1290, 2540}) == Extent{1288, 2536}, "(1290,2540) -> (1288,2536)");
  const auto plan = plan_trim({162, 318}, {1290, 2540});
  v.check(plan.low == Extent{161, 317}, "(162,318) -> (161,317)");
  v.check(trim_to_multiple({1280, 2540}) == Extent{1280, 2536}, "(1280,2540) -> (1280,2536)");

  const auto t0 = Clock::now();
  auto full = gen->forward(torch::randn({1, 7, plan.low.first, plan.low.second}),
                           torch::randn({3, plan.high.first, plan.high.second}));
  v.check(full.sizes() == torch::IntArrayRef{1, 2, 1288, 2536},
          "(7,161,317)+(3,1288,2536) -> (2,1288,2536)");
  v.check(torch::isfinite(full).all().item<bool>(), "full-domain output finite");
  v.note("full domain " + fmt(seconds_since(t0), 3) + " s");
  full = torch::Tensor();

  v.check(parameter_count(*gen) == params, "generator parameter count unchanged");
  Critic critic(CriticSpec{});
  const auto cparams = parameter_count(*critic);
  v.check(critic->forward(torch::randn({32, 2, 128, 128})).sizes() == torch::IntArrayRef{32},
          "critic (32,2,128,128) -> (32,)");
  v.check(critic->forward(torch::randn({1, 2, 16, 16})).sizes() == torch::IntArrayRef{1},
          "critic (1,2,16,16) -> (1,)");
  v.check(parameter_count(*critic) == cparams, "critic parameter count unchanged");
  v.note("generator " + std::to_string(params) + " parameters");
  return v;
}

// ---------------------------------------------------------------------------
// 3. Gradient correctness
// ---------------------------------------------------------------------------

Verdict criterion_gradients() {
  Verdict v;
  Generator gen(GeneratorSpec{});
  Critic critic(CriticSpec{});
  initialize_parameters(*gen, 2);
  initialize_parameters(*critic, 3);
  gen->to(torch::kFloat64);
  critic->to(torch::kFloat64);
  const auto low = dtensor({1, 7, 2, 2}, 10), cov = dtensor({3, 16, 16}, 11);
  const auto w = dtensor({1, 2, 16, 16}, 12), fields = dtensor({2, 2, 16, 16}, 13);
  const auto g = wt::finite_difference_check(
      *gen, [&] { return (gen->forward(low, cov) * w).mean(); }, 24, 1, 1e-6, 1e-9);
  const auto c = wt::finite_difference_check(
      *critic, [&] { return critic->forward(fields).mean(); }, 24, 2, 1e-6, 1e-9);
  v.check(g.checked >= 20 && g.worst_rel < 1e-3,
          "generator " + std::to_string(g.checked) + " params, worst rel " + fmt(g.worst_rel, 2));
  v.check(c.checked >= 20 && c.worst_rel < 1e-3,
          "critic " + std::to_string(c.checked) + " params, worst rel " + fmt(c.worst_rel, 2));
  v.note("worst rel error generator " + fmt(g.worst_rel, 2) + ", critic " + fmt(c.worst_rel, 2));
  return v;
}

// ---------------------------------------------------------------------------
// 4. Training mechanics
// ---------------------------------------------------------------------------

bool same_report(const LossReport& a, const LossReport& b) {
  return a.critic_loss == b.critic_loss && a.generator_loss == b.generator_loss &&
         a.gp_term == b.gp_term && a.content_term == b.content_term;
}

Verdict criterion_training(const fs::path& work) {
  Verdict v;
  ::setenv("WINDSCALE_DETERMINISTIC", "1", 1);
  configure_runtime();
  auto synth = preset("cond-nfs").synth;
  synth.n_hours = 12;
  const auto data = make_dataset(synth);
  auto cfg = preset("cond-nfs").train;
  const auto norm = fit_norm(data.train);
  const auto pairs = prepare_pairs(data.train, norm, training_dtype(cfg));

  // Bookkeeping and freezing over one step of 6 batches.
  auto state = make_state(cfg, norm);
  std::uint64_t g0 = 0, c0 = 0;
  bool frozen = true;
  std::int64_t observed = 0;
  auto observer = [&](UpdateKind kind, bool before, const TrainState& s) {
    const auto g = parameter_hash(*s.generator), c = parameter_hash(*s.critic);
    if (before) {
      g0 = g;
      c0 = c;
      ++observed;
      return;
    }
    frozen = frozen && (kind == UpdateKind::Critic ? g == g0 : c == c0);
  };
  const auto summary = training_step(state, pairs[0], observer);
  const auto n = cfg.crops_per_pair / cfg.batch_size;
  v.check(summary.updates == UpdateCounters{n - n / 6, n / 6},
          std::to_string(n) + " batches -> " + std::to_string(n - n / 6) + ":" + std::to_string(n / 6));
  v.check(observed == n, "one observed update per batch");
  v.check(frozen, "idle network hash unchanged across every update");

  // Resume.
  const auto ckpt = work / "mechanics.pt";
  save_checkpoint(ckpt, state);
  const auto a1 = training_step(state, pairs[1]);
  const auto a2 = training_step(state, pairs[2]);
  auto resumed = load_checkpoint(ckpt);
  const auto b1 = training_step(resumed, pairs[1]);
  const auto b2 = training_step(resumed, pairs[2]);
  v.check(same_report(a1.critic, b1.critic) && same_report(a1.generator, b1.generator) &&
              same_report(a2.critic, b2.critic) && same_report(a2.generator, b2.generator),
          "resumed loss trajectory bit-identical");
  v.check(parameter_hash(*state.generator) == parameter_hash(*resumed.generator) &&
              parameter_hash(*state.critic) == parameter_hash(*resumed.critic),
          "resumed parameters bit-identical");

  // Supervised degenerate mode on one fixed crop.
  auto sup = cfg;
  sup.loss.gamma_adv = 0.0;
  sup.loss.lambda_gp = 0.0;
  sup.crops_per_pair = 6;
  sup.batch_size = 1;
  auto s = make_state(sup, norm);
  const auto& full = pairs[0];
  const auto hr = sup.crop_size_hr, lr = hr / 8;
  PreparedPair fixed{full.low.slice(1, 0, lr).slice(2, 0, lr).contiguous(),
                     full.high.slice(1, 0, hr).slice(2, 0, hr).contiguous(),
                     full.covariates.slice(1, 0, hr).slice(2, 0, hr).contiguous(), full.hour};
  std::vector<double> content;
  for (int i = 0; i < 50; ++i) {
    const auto r = training_step(s, fixed);
    content.insert(content.end(), r.content_terms.begin(), r.content_terms.end());
  }
  std::size_t rises = 0, first_rise = 0;
  for (std::size_t i = 1; i < content.size(); ++i) {
    if (content[i] >= content[i - 1] && rises++ == 0) first_rise = i;
  }
  std::string where;
  if (rises > 0) {
    where = "; " + std::to_string(rises) + " rises, first at step " + std::to_string(first_rise) + " (" +
            fmt(content[first_rise - 1]) + " -> " + fmt(content[first_rise]) + ")";
  }
  v.check(content.size() == 50 && rises == 0, "content loss strictly decreasing over 50 steps (" +
                                                  fmt(content.front()) + " -> " + fmt(content.back()) +
                                                  where + ")");
  ::unsetenv("WINDSCALE_DETERMINISTIC");
  return v;
}

// ---------------------------------------------------------------------------
// 5-7. Desk-scale findings
// ---------------------------------------------------------------------------

/// Steps per averaging interval for validation curves.
constexpr std::int64_t kInterval = 50;

struct Findings {
  Dataset data;
  std::vector<StepRecord> cond_log, base_log, fs_log;
  std::int64_t fork_step = 0;
  TrainState cond, fs;
  std::vector<MetricRow> rows;
  double seconds = 0.0;
};

CurveInput window(const std::string& label, const std::vector<StepRecord>& log, std::int64_t after) {
  CurveInput c{label, {}};
  for (const auto& r : log)
    if (r.summary.step > after) c.log.push_back(r);
  return c;
}

Findings run_findings(const fs::path& work) {
  const auto t0 = Clock::now();
  Findings f;
  const auto cond_cfg = preset("cond-nfs");
  const auto base_cfg = preset("baseline-downgan");
  f.data = make_dataset(cond_cfg.synth);
  auto progress = [](const std::string& tag) {
    return [tag](const StepRecord& r) {
      if (!std::isnan(r.val_mse) && r.summary.step % 250 == 0)
        std::cout << "  [" << tag << "] step " << r.summary.step << " val_mse " << fmt(r.val_mse) << std::endl;
    };
  };

  RunResult cond_run;
  f.cond = fit(f.data.train, f.data.val, cond_cfg.train, &cond_run, {work / "cond", progress("cond-nfs")});
  f.cond_log = cond_run.log;

  RunResult base_run;
  fit(f.data.train, f.data.val, base_cfg.train, &base_run, {work / "base", progress("baseline")});
  f.base_log = base_run.log;

  // Fine-tune with FS(5) from the mid-run checkpoint to the same final step.
  f.fork_step = cond_cfg.train.max_steps / 2;
  std::ostringstream name;
  name << "ckpt_" << std::setw(6) << std::setfill('0') << f.fork_step << ".pt";
  f.fs = fine_tune(work / "cond" / name.str(), with_mode(cond_cfg.train.loss, "fs:5"), cond_cfg.train);
  const auto train = prepare_pairs(f.data.train, f.fs.norm, f.fs.dtype());
  const auto val = prepare_pairs(f.data.val, f.fs.norm, f.fs.dtype());
  f.fs_log = run(f.fs, train, val, {work / "fs5", progress("fs:5")}).log;

  auto model = [](const TrainState& s) {
    auto d = std::make_shared<Downscaler>(s.generator, s.norm);
    return [d](const SamplePair& p) { return (*d)(p.low, p.covariates); };
  };
  auto baseline = [](BaselineMethod m) {
    return [m](const SamplePair& p) {
      return downscale_baseline(p.low, m, Extent{p.high.height(), p.high.width()});
    };
  };
  const std::vector<Method> methods{{"model", model(f.cond)},
                                    {"model-fs5", model(f.fs)},
                                    {"nearest", baseline(BaselineMethod::Nearest)},
                                    {"bilinear", baseline(BaselineMethod::Bilinear)}};
  f.rows = evaluate(f.data.test, methods, EvalOptions{});
  save_report(work / "report.tsv", f.rows);
  f.seconds = seconds_since(t0);
  return f;
}

double median_of(const std::vector<MetricRow>& rows, const std::string& method,
                 const std::string& component, bool lsd_metric) {
  std::vector<double> v;
  for (const auto& r : rows)
    if (r.method == method && r.component == component && r.region == "domain")
      v.push_back(lsd_metric ? r.lsd : r.rmse);
  return median_mad(v).median;
}

Verdict criterion_conditioning(const Findings& f) {
  Verdict v;
  const double cond = best_interval_average(CurveInput{"cond", f.cond_log}, kInterval);
  const double base = best_interval_average(CurveInput{"base", f.base_log}, kInterval);
  const double gain = 1.0 - cond / base;
  v.report(cond <= 0.9 * base, "conditional best " + fmt(cond) + " vs baseline best " + fmt(base) +
                                  " (" + fmt(100.0 * gain, 3) + "% lower, need >= 10%)");
  v.note("interval " + std::to_string(kInterval) + " steps");
  return v;
}

Verdict criterion_frequency_separation(const Findings& f) {
  Verdict v;
  const double fs = best_interval_average(window("fs", f.fs_log, f.fork_step), kInterval);
  const double nfs = best_interval_average(window("nfs", f.cond_log, f.fork_step), kInterval);
  v.report(fs <= nfs, "FS(5) fine-tune best " + fmt(fs) + " vs NFS continuation best " + fmt(nfs));
  for (const char* c : {"u10", "v10"}) {
    const double a = median_of(f.rows, "model-fs5", c, true);
    const double b = median_of(f.rows, "model", c, true);
    v.report(a < b, std::string("median LSD ") + c + " FS " + fmt(a) + " < NFS " + fmt(b));
  }
  return v;
}

Verdict criterion_baselines(const Findings& f) {
  Verdict v;
  for (const char* c : {"u10", "v10"}) {
    const double rm = median_of(f.rows, "model", c, false);
    const double rn = median_of(f.rows, "nearest", c, false);
    const double rb = median_of(f.rows, "bilinear", c, false);
    const double lm = median_of(f.rows, "model", c, true);
    const double ln = median_of(f.rows, "nearest", c, true);
    const double lb = median_of(f.rows, "bilinear", c, true);
    const std::string comp(c);
    v.report(rm < rn && rm < rb, "median RMSE " + comp + " model " + fmt(rm) + " < nearest " + fmt(rn) +
                                    ", bilinear " + fmt(rb));
    v.report(lm < ln && ln < lb, "median LSD " + comp + " model " + fmt(lm) + " < nearest " + fmt(ln) +
                                    " < bilinear " + fmt(lb));
  }
  return v;
}

// ---------------------------------------------------------------------------
// 8. Tiled consistency
// ---------------------------------------------------------------------------

Verdict criterion_tiled() {
  Verdict v;
  auto cfg = preset("cond-nfs");
  cfg.synth.height = 1024;
  cfg.synth.width = 1024;
  const auto cov = make_covariates(cfg.synth);
  const std::vector<SamplePair> hours{make_hour(cfg.synth, cov, 0), make_hour(cfg.synth, cov, 1)};
  Generator gen(cfg.train.generator);
  initialize_parameters(*gen, 31);
  const Downscaler d(gen, fit_norm(hours));
  const auto& pair = hours.back();

  const auto whole = d(pair.low, pair.covariates).data();
  const std::int64_t tile = 32, band = 32;
  const auto tiled = d.tiled(pair.low, pair.covariates, tile).data();
  v.check(whole.sizes() == tiled.sizes(), "shapes agree");
  // Interior: at least `band` fine cells from the domain edge and from every
  // tile seam.
  auto mask = torch::ones({whole.size(1), whole.size(2)}, torch::kBool);
  const auto fine = tile * 8;
  for (std::int64_t s = 0; s <= whole.size(1); s += fine) {
    mask.slice(0, std::max<std::int64_t>(0, s - band), std::min(whole.size(1), s + band)).fill_(false);
  }
  for (std::int64_t s = 0; s <= whole.size(2); s += fine) {
    mask.slice(1, std::max<std::int64_t>(0, s - band), std::min(whole.size(2), s + band)).fill_(false);
  }
  const auto sel = mask.unsqueeze(0).expand_as(whole);
  const auto a = whole.masked_select(sel), b = tiled.masked_select(sel);
  const double rel = wt::max_rel_diff(a, b);
  const double rel_all = wt::max_rel_diff(whole, tiled);
  v.check(a.numel() > 0, "interior not empty");
  v.check(rel <= 1e-4, "interior rel diff " + fmt(rel, 2));
  v.note("whole-field rel diff " + fmt(rel_all, 2) + ", halo " + std::to_string(gen->receptive_radius()) +
         " coarse cells");
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"windscale acceptance criteria"};
  std::vector<int> criteria{1, 2, 3, 4, 5, 6, 7, 8};
  std::string work_dir;
  app.add_option("--criteria", criteria, "Criteria to run")->delimiter(',')->check(CLI::Range(1, 8));
  app.add_option("--work-dir", work_dir, "Keep training runs here instead of a temporary directory");
  CLI11_PARSE(app, argc, argv);

  torch::set_num_threads(1);
  std::unique_ptr<wt::TempDir> tmp;
  fs::path work;
  if (work_dir.empty()) {
    tmp = std::make_unique<wt::TempDir>("acceptance");
    work = tmp->path;
  } else {
    work = work_dir;
    fs::create_directories(work);
  }

  const std::set<int> wanted(criteria.begin(), criteria.end());
  std::optional<Findings> findings;
  bool all = true;
  auto report = [&](int id, const std::string& title, const std::function<Verdict()>& fn) {
    if (!wanted.count(id)) return;
    const auto t0 = Clock::now();
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v.check(false, std::string("exception: ") + e.what());
    }
    all = all && v.ok();
    std::cout << (v.ok() ? "PASS" : "FAIL") << " criterion " << id << " (" << title << ", "
              << fmt(seconds_since(t0), 3) << " s): " << v.detail() << std::endl;
  };
  auto need_findings = [&]() -> const Findings& {
    if (!findings) findings = run_findings(work);
    return *findings;
  };

  report(1, "exact numerics", criterion_numerics);
  report(2, "shape contracts", criterion_shapes);
  report(3, "gradient correctness", criterion_gradients);
  report(4, "training mechanics", [&] { return criterion_training(work); });
  report(5, "covariate conditioning", [&] { return criterion_conditioning(need_findings()); });
  report(6, "frequency separation", [&] { return criterion_frequency_separation(need_findings()); });
  report(7, "baseline ordering", [&] { return criterion_baselines(need_findings()); });
  report(8, "tiled consistency", criterion_tiled);
  if (findings) std::cout << "desk training runs took " << fmt(findings->seconds, 4) << " s" << std::endl;
  return all ? 0 : 1;
}
