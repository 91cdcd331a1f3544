// windscale: synthetic data, training, inference, evaluation and plots.
//
// Configuration precedence: command-line flags > --config file > --preset >
// built-in defaults. Every command leaves a config.json snapshot and a
// manifest.json listing the files it produced and the arguments it ran with.
// Commands that write a single file prefix both with that file's name.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "windscale/config.hpp"
#include "windscale/error.hpp"
#include "windscale/field_io.hpp"
#include "windscale/inference.hpp"
#include "windscale/metrics.hpp"
#include "windscale/plot.hpp"
#include "windscale/synth.hpp"
#include "windscale/training.hpp"

namespace fs = std::filesystem;
using namespace windscale;

namespace {

struct ConfigFlags {
  std::string preset;
  std::string config;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& flags) {
  cmd->add_option("--preset", flags.preset, "Experiment preset")
      ->check(CLI::IsMember(preset_names()));
  cmd->add_option("--config", flags.config, "JSON run configuration")->check(CLI::ExistingFile);
}

RunConfig resolve_config(const ConfigFlags& flags) {
  RunConfig cfg = flags.preset.empty() ? RunConfig{} : preset(flags.preset);
  if (!flags.config.empty()) {
    std::ifstream in(flags.config);
    std::ostringstream buf;
    buf << in.rdbuf();
    cfg = merge_run_config(cfg, buf.str());
  }
  return cfg;
}

std::vector<std::string> g_args;

void write_snapshot(const fs::path& dir, const std::string& prefix, const std::string& command,
                    const RunConfig& cfg, std::vector<std::string> files) {
  if (!dir.empty()) fs::create_directories(dir);
  const auto config_name = prefix + "config.json", manifest_name = prefix + "manifest.json";
  save_run_config(dir / config_name, cfg);
  files.insert(files.begin(), config_name);
  files.push_back(manifest_name);
  nlohmann::json manifest = {{"command", command}, {"args", g_args}, {"files", files}};
  std::ofstream out(dir / manifest_name);
  if (!out) throw FileError("cannot write " + (dir / manifest_name).string());
  out << manifest.dump(2) << '\n';
}

/// Snapshot beside a single output file: <name>.config.json, <name>.manifest.json.
void write_file_snapshot(const fs::path& out, const std::string& command, const RunConfig& cfg) {
  const auto name = out.filename().string();
  write_snapshot(out.parent_path(), name + ".", command, cfg, {name});
}

/// A grid from a field container: the single entry, or the entry `preferred`.
FieldGrid read_grid(const fs::path& path, const std::string& preferred) {
  auto fields = read_fields(path);
  if (fields.size() == 1) return fields.front().grid;
  for (const auto& f : fields) {
    if (f.name == preferred) return f.grid;
  }
  throw FileError(path.string() + " holds several fields and none is named '" + preferred + "'");
}

// ----------------------------------------------------------------------------

struct SynthArgs {
  ConfigFlags cfg;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> hours, height, width;
};

int run_synth(const SynthArgs& a) {
  auto cfg = resolve_config(a.cfg);
  if (a.seed) cfg.synth.seed = *a.seed;
  if (a.hours) cfg.synth.n_hours = *a.hours;
  if (a.height) cfg.synth.height = *a.height;
  if (a.width) cfg.synth.width = *a.width;
  cfg = merge_run_config(cfg, "{}");
  auto data = make_dataset(cfg.synth);
  auto files = write_dataset(a.out, data);
  write_snapshot(a.out, "", "synth-data", cfg, files);
  std::cout << "wrote " << data.manifest.size() << " hours (" << data.train.size() << " train, "
            << data.val.size() << " val, " << data.test.size() << " test) to " << a.out << '\n';
  return 0;
}

struct TrainArgs {
  ConfigFlags cfg;
  std::string data, out, resume, fine_tune_loss;
  std::optional<std::int64_t> max_steps;
  std::optional<std::uint64_t> seed;
};

int run_train(const TrainArgs& a) {
  auto cfg = resolve_config(a.cfg);
  if (a.max_steps) cfg.train.max_steps = *a.max_steps;
  if (a.seed) cfg.train.seed = *a.seed;
  if (!a.fine_tune_loss.empty()) {
    if (a.resume.empty()) throw ConfigError("--fine-tune-loss needs --resume <checkpoint>");
    cfg.train.loss = with_mode(cfg.train.loss, a.fine_tune_loss);
  }
  cfg = merge_run_config(cfg, "{}");
  auto data = read_dataset(a.data);
  const fs::path out(a.out);
  fs::create_directories(out);

  RunOptions opts;
  opts.run_dir = out;
  opts.on_step = [](const StepRecord& r) {
    if (std::isnan(r.val_mse)) return;
    std::cout << "step " << r.summary.step << "  val_mse " << r.val_mse << "  content "
              << r.summary.generator.content_term << "  w " << r.summary.critic.wasserstein_estimate
              << '\n';
  };

  RunResult result;
  if (a.resume.empty()) {
    fit(data.train, data.val, cfg.train, &result, opts);
  } else {
    auto state = load_checkpoint(a.resume);
    if (a.fine_tune_loss.empty()) {
      apply_fine_tune(state, state.config.loss, cfg.train);
    } else {
      apply_fine_tune(state, cfg.train.loss, cfg.train);
    }
    cfg.train = state.config;
    auto train = prepare_pairs(data.train, state.norm, state.dtype());
    auto val = prepare_pairs(data.val, state.norm, state.dtype());
    result = run(state, train, val, opts);
  }
  write_snapshot(out, "", "train", cfg, result.files);
  std::cout << "trained to step " << cfg.train.max_steps << "; outputs in " << out.string() << '\n';
  return 0;
}

struct InferArgs {
  std::string ckpt, input, covariates, out, baseline;
  std::int64_t tile = 0;
  bool symmetric = false;
};

int run_infer(const InferArgs& a) {
  auto low = read_grid(a.input, "low");
  FieldGrid result;
  if (!a.baseline.empty()) {
    std::optional<Extent> ref;
    if (!a.covariates.empty()) {
      auto cov = read_grid(a.covariates, "covariates");
      ref = Extent{cov.height(), cov.width()};
    }
    result = downscale_baseline(low, parse_baseline(a.baseline), ref);
  } else {
    if (a.ckpt.empty()) throw ConfigError("infer needs --ckpt or --baseline");
    auto model = Downscaler::from_checkpoint(a.ckpt);
    FieldGrid cov;
    if (!a.covariates.empty()) cov = read_grid(a.covariates, "covariates");
    if (a.tile > 0) {
      if (a.symmetric) throw ConfigError("--tile supports trailing trimming only");
      result = model.tiled(low, cov, a.tile);
    } else {
      result = model(low, cov, a.symmetric ? TrimEdge::Symmetric : TrimEdge::Trailing);
    }
  }
  write_field(a.out, result);
  write_file_snapshot(a.out, "infer", RunConfig{});
  std::cout << "wrote (" << result.channel_count() << ", " << result.height() << ", "
            << result.width() << ") to " << a.out << '\n';
  return 0;
}

struct EvalArgs {
  ConfigFlags cfg;
  std::string data, ckpt, out;
  std::vector<std::string> methods;
  std::optional<std::int64_t> workers;
  std::optional<double> lsd_floor;
  std::optional<std::int64_t> tile;
};

int run_evaluate(const EvalArgs& a) {
  auto cfg = resolve_config(a.cfg);
  if (!a.methods.empty()) cfg.eval.methods = a.methods;
  if (a.workers) cfg.eval.workers = *a.workers;
  if (a.lsd_floor) cfg.eval.lsd_floor = *a.lsd_floor;
  if (a.tile) cfg.eval.tile = *a.tile;
  cfg = merge_run_config(cfg, "{}");
  auto data = read_dataset(a.data);

  std::vector<Method> methods;
  for (const auto& name : cfg.eval.methods) {
    if (name == "bilinear" || name == "nearest") {
      const auto kind = parse_baseline(name);
      methods.push_back({name, [kind](const SamplePair& p) {
                           return downscale_baseline(p.low, kind, Extent{p.high.height(), p.high.width()});
                         }});
      continue;
    }
    fs::path ckpt = name == "model" ? fs::path(a.ckpt) : fs::path(name);
    if (ckpt.empty()) throw ConfigError("method 'model' needs --ckpt");
    auto model = std::make_shared<Downscaler>(Downscaler::from_checkpoint(ckpt));
    const auto tile = cfg.eval.tile;
    // Label checkpoints by their path so runs that share a file name stay apart.
    const auto label = name == "model" ? std::string("model") : fs::path(name).replace_extension().string();
    methods.push_back({label,
                       [model, tile](const SamplePair& p) {
                         return tile > 0 ? model->tiled(p.low, p.covariates, tile)
                                         : (*model)(p.low, p.covariates);
                       }});
  }
  EvalOptions opts{cfg.eval.regions, cfg.eval.lsd_floor, cfg.eval.workers};
  auto rows = evaluate(data.test, methods, opts);
  const fs::path out(a.out);
  fs::create_directories(out);
  save_report(out / "report.tsv", rows);
  auto agg = aggregate(rows);
  const auto table = format_table(agg);
  std::ofstream(out / "table.txt") << table;
  write_snapshot(out, "", "evaluate", cfg, {"report.tsv", "table.txt"});
  std::cout << table;
  return 0;
}

struct PlotArgs {
  std::string kind, out, metric = "rmse", channel = "u10";
  std::vector<std::string> inputs, labels;
  std::int64_t interval = 10;
  bool by_month = false;
};

int run_plot(const PlotArgs& a) {
  if (a.inputs.empty()) throw FileError("plot needs at least one --input");
  for (const auto& in : a.inputs) {
    if (!fs::exists(in)) throw FileError("input not found: " + in);
  }
  auto label = [&](std::size_t i, const fs::path& p) {
    return i < a.labels.size() ? a.labels[i] : p.stem().string();
  };
  if (a.kind == "validation-curves") {
    std::vector<CurveInput> curves;
    for (std::size_t i = 0; i < a.inputs.size(); ++i) {
      const fs::path p(a.inputs[i]);
      curves.push_back({i < a.labels.size() ? a.labels[i] : p.parent_path().filename().string(),
                        read_metrics_log(p)});
    }
    plot_validation_curves(curves, a.interval, a.out);
  } else if (a.kind == "violin") {
    std::vector<MetricRow> rows;
    for (const auto& in : a.inputs) {
      auto r = load_report(in);
      rows.insert(rows.end(), r.begin(), r.end());
    }
    plot_violin(rows, a.metric, a.out, a.by_month);
  } else if (a.kind == "rapsd") {
    auto v = parse_variable(a.channel);
    if (!v) throw ConfigError("unknown channel '" + a.channel + "'");
    std::vector<SpectrumInput> spectra;
    double spacing = 0.0;
    for (std::size_t i = 0; i < a.inputs.size(); ++i) {
      const fs::path p(a.inputs[i]);
      auto grid = read_grid(p, "high");
      if (i == 0) spacing = grid.spacing_km();
      spectra.push_back({label(i, p), rapsd(grid.channel(*v))});
    }
    const double cutoff = plot_rapsd(spectra, spacing, a.out);
    std::cout << "cutoff " << cutoff << " cycles/km\n";
  } else if (a.kind == "fieldmap") {
    auto v = parse_variable(a.channel);
    if (!v) throw ConfigError("unknown channel '" + a.channel + "'");
    plot_fieldmap(read_grid(a.inputs.front(), "high"), *v, a.out);
  } else {
    throw ConfigError("unknown plot kind '" + a.kind + "'");
  }
  RunConfig cfg;
  cfg.plot.interval = a.interval;
  write_file_snapshot(a.out, "plot", cfg);
  std::cout << "wrote " << a.out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Covariate-conditioned adversarial wind downscaling"};
  app.require_subcommand(1);
  g_args.assign(argv + 1, argv + argc);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth-data", "Generate a synthetic paired dataset");
  add_config_flags(s, synth.cfg);
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--seed", synth.seed, "Generator seed");
  s->add_option("--hours", synth.hours, "Number of hourly pairs");
  s->add_option("--height", synth.height, "Fine-grid rows");
  s->add_option("--width", synth.width, "Fine-grid columns");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train generator and critic");
  add_config_flags(t, train.cfg);
  t->add_option("--data", train.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  t->add_option("--out", train.out, "Run directory")->required();
  t->add_option("--resume", train.resume, "Checkpoint to continue from")->check(CLI::ExistingFile);
  t->add_option("--fine-tune-loss", train.fine_tune_loss, "New loss on resume, e.g. fs:5");
  t->add_option("--max-steps", train.max_steps, "Stop after this training step");
  t->add_option("--seed", train.seed, "Initialization and sampling seed");

  InferArgs infer;
  auto* i = app.add_subcommand("infer", "Downscale one field");
  i->add_option("--ckpt", infer.ckpt, "Generator checkpoint")->check(CLI::ExistingFile);
  i->add_option("--input", infer.input, "Coarse predictor field file")->required()->check(CLI::ExistingFile);
  i->add_option("--covariates", infer.covariates, "Fine-grid covariate field file")->check(CLI::ExistingFile);
  i->add_option("--out", infer.out, "Output field file")->required();
  i->add_option("--baseline", infer.baseline, "bilinear or nearest instead of a checkpoint");
  i->add_option("--tile", infer.tile, "Tile edge in coarse cells (0: whole domain)");
  i->add_flag("--symmetric-trim", infer.symmetric, "Trim both edges instead of trailing ones");

  EvalArgs eval;
  auto* e = app.add_subcommand("evaluate", "RMSE/LSD report on the test split");
  add_config_flags(e, eval.cfg);
  e->add_option("--data", eval.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  e->add_option("--ckpt", eval.ckpt, "Checkpoint used by the 'model' method")->check(CLI::ExistingFile);
  e->add_option("--out", eval.out, "Report directory")->required();
  e->add_option("--methods", eval.methods, "model, bilinear, nearest or checkpoint paths")->delimiter(',');
  e->add_option("--workers", eval.workers, "Parallel evaluation threads");
  e->add_option("--lsd-floor", eval.lsd_floor, "Power floor added before taking logs");
  e->add_option("--tile", eval.tile, "Tile edge in coarse cells (0: whole domain)");

  PlotArgs plot;
  auto* p = app.add_subcommand("plot", "Render a figure to PNG");
  p->add_option("kind", plot.kind)
      ->required()
      ->check(CLI::IsMember({"validation-curves", "violin", "rapsd", "fieldmap"}));
  p->add_option("--input", plot.inputs, "Report, metrics log or field files")->required();
  p->add_option("--label", plot.labels, "Legend label per input");
  p->add_option("--out", plot.out, "PNG path")->required();
  p->add_option("--interval", plot.interval, "Validation curve averaging window in steps");
  p->add_option("--metric", plot.metric, "Violin metric")->check(CLI::IsMember({"rmse", "lsd"}));
  p->add_option("--channel", plot.channel, "Field map channel");
  p->add_flag("--by-month", plot.by_month, "One violin group per month");

  std::string show;
  auto* pr = app.add_subcommand("presets", "List presets or print one as JSON");
  pr->add_option("--show", show, "Print this preset")->check(CLI::IsMember(preset_names()));

  CLI11_PARSE(app, argc, argv);
  configure_runtime();
  try {
    if (*s) return run_synth(synth);
    if (*t) return run_train(train);
    if (*i) return run_infer(infer);
    if (*e) return run_evaluate(eval);
    if (*p) return run_plot(plot);
    if (*pr) {
      if (show.empty()) {
        for (const auto& n : preset_names()) std::cout << n << '\n';
      } else {
        std::cout << emit_run_config(preset(show));
      }
      return 0;
    }
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "internal error: " << err.what() << '\n';
    return 2;
  }
  return 0;
}
