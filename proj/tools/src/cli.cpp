#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "affect/error.hpp"
#include "affect/experiment.hpp"
#include "affect/format.hpp"
#include "affect/ingest.hpp"

namespace affect::cli {
namespace fs = std::filesystem;

namespace {

fs::path output_path(const fs::path& p) {
  if (p.is_absolute()) return p;
  const char* root = std::getenv(kOutputRootEnv);
  if (root != nullptr && *root != '\0') return fs::path(root) / p;
  return p;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
}

template <typename T>
void override(T& target, const std::optional<T>& flag) {
  if (flag) target = *flag;
}

void add_jobs(CLI::App* app, std::size_t& jobs) {
  app->add_option("--jobs", jobs, "Worker threads (0 = all cores)")->capture_default_str();
}

// Per-subject streams and traces from the train or dev split of a manifest.
struct SplitData {
  std::vector<FeatureStream> streams;
  std::vector<AffectTrace> gold;
};

SplitData split_data(const std::vector<SubjectRecord>& subjects, const std::string& modality,
                     AffectDimension dimension, std::size_t delay) {
  SplitData out;
  for (const auto& s : compensate_delay(subjects, dimension, delay)) {
    const auto it = s.streams.find(modality);
    if (it == s.streams.end()) {
      throw DataError("subject '" + s.subject_id + "' has no '" + modality + "' features");
    }
    out.streams.push_back(it->second);
    out.gold.push_back(s.gold.at(dimension));
  }
  return out;
}

TrainingSet training_set(const SplitData& d) {
  TrainingSet set;
  for (std::size_t i = 0; i < d.streams.size(); ++i) {
    set.append(apply_mask_for_training(d.streams[i], d.gold[i]));
  }
  return set;
}

struct DataFlags {
  std::string manifest;
  std::string modality;
  std::string dimension = "arousal";
  std::optional<std::size_t> delay;

  void add(CLI::App* app) {
    app->add_option("--manifest", manifest, "Dataset manifest (JSON)")->required();
    app->add_option("--modality", modality, "Feature modality to use")->required();
    app->add_option("--dimension", dimension, "arousal or valence")->capture_default_str();
    app->add_option("--delay", delay, "Delay compensation in frames (default 70 arousal, 50 valence)");
  }
  AffectDimension dim() const { return parse_dimension(dimension); }
  std::size_t effective_delay() const {
    if (delay) return *delay;
    return dim() == AffectDimension::Arousal ? kDefaultArousalDelay : kDefaultValenceDelay;
  }
};

struct SolverFlags {
  double tol = 1e-3;
  std::size_t max_passes = 10000;
  std::size_t cache_mb = 256;
  bool fatal = false;

  void add(CLI::App* app) {
    app->add_option("--tol", tol, "SMO stopping tolerance")->capture_default_str();
    app->add_option("--max-passes", max_passes, "SMO update cap, in multiples of the row count")
        ->capture_default_str();
    app->add_option("--cache-mb", cache_mb, "Kernel row cache size")->capture_default_str();
    app->add_flag("--fatal-nonconvergence", fatal, "Fail (exit 3) when SMO hits the update cap");
  }
  SolverOptions options() const {
    SolverOptions o;
    o.tol = tol;
    o.max_passes = max_passes;
    o.cache_mb = cache_mb;
    return o;
  }
};

std::vector<Kernel> parse_kernels(const std::vector<std::string>& names) {
  std::vector<Kernel> out;
  for (const auto& n : names) out.push_back(Kernel::parse(n));
  return out;
}

// ---------------------------------------------------------------------------

struct SynthCmd {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> subjects_train, subjects_dev, frames, lag;
  std::optional<double> bandwidth, period;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("synth", "Generate a seeded synthetic dataset");
    c->add_option("--config", config, "Synthetic data spec (JSON)");
    c->add_option("--out", out, "Output directory")->required();
    c->add_option("--seed", seed, "Random seed");
    c->add_option("--subjects-train", subjects_train, "Training subjects");
    c->add_option("--subjects-dev", subjects_dev, "Development subjects");
    c->add_option("--frames", frames, "Frames per subject");
    c->add_option("--lag", lag, "Annotation lag in frames");
    c->add_option("--bandwidth", bandwidth, "Latent bandwidth in Hz");
    c->add_option("--frame-period", period, "Seconds per frame");
  }

  int run(std::ostream& o) const {
    SynthSpec spec = config.empty() ? SynthSpec{} : SynthSpec::from_json_text(read_file(config));
    override(spec.seed, seed);
    override(spec.n_subjects_train, subjects_train);
    override(spec.n_subjects_dev, subjects_dev);
    override(spec.frames_per_subject, frames);
    override(spec.annotation_lag_frames, lag);
    override(spec.latent_bandwidth_hz, bandwidth);
    override(spec.frame_period_s, period);
    spec.validate();
    const fs::path dir = output_path(out);
    const auto data = generate_synthetic(spec);
    const auto manifest = write_dataset(data, dir);
    write_file(dir / "synth.json", spec.to_json_text());
    o << "synth: " << manifest.subjects.size() << " subjects written to "
      << (dir / "manifest.json").generic_string() << "\n";
    return kExitOk;
  }
};

struct TrainCmd {
  DataFlags data;
  SolverFlags solver;
  double c = 1.0;
  double epsilon = 0.1;
  std::string kernel = "linear";
  std::string model;

  void add(CLI::App& app) {
    auto* s = app.add_subcommand("train", "Train one SVR on the train split of a manifest");
    data.add(s);
    s->add_option("--c", c, "Box constraint C")->capture_default_str();
    s->add_option("--epsilon", epsilon, "Tube half-width")->capture_default_str();
    s->add_option("--kernel", kernel, "linear or rbf:<gamma>")->capture_default_str();
    solver.add(s);
    s->add_option("--model", model, "Output model file")->required();
  }

  int run(std::ostream& o) const {
    const auto dataset = DatasetManifest::load(data.manifest).load_dataset();
    const auto set = training_set(split_data(dataset.train, data.modality, data.dim(),
                                             data.effective_delay()));
    const SvrHyperParams hyper{c, epsilon, Kernel::parse(kernel)};
    const auto m = train_svr(set.features, set.targets, hyper, solver.options());
    if (solver.fatal && m.warning()) throw NumericalError("SMO hit max_passes before converging");
    const fs::path path = output_path(model);
    write_file(path, m.to_text());
    o << "train: rows=" << set.size() << " support=" << m.dual_coefs().size()
      << " iterations=" << m.iterations
      << " converged=" << (m.warning() ? "no" : "yes") << " model=" << path.generic_string()
      << "\n";
    return kExitOk;
  }
};

struct PredictCmd {
  std::string model;
  std::string features;
  std::string out;
  double fill_start = 0.0;

  void add(CLI::App& app) {
    auto* s = app.add_subcommand("predict", "Predict a trace from a feature file");
    s->add_option("--model", model, "Model file")->required();
    s->add_option("--features", features, "Feature file")->required();
    s->add_option("--out", out, "Output prediction file (frame,value)")->required();
    s->add_option("--fill-start", fill_start, "Value for invalid frames before the first valid one")
        ->capture_default_str();
  }

  int run(std::ostream& o) const {
    const auto m = SvrModel::from_text(read_file(model));
    const auto stream = load_features(features, "input");
    Matrix rows(0, stream.dim());
    for (std::size_t t = 0; t < stream.size(); ++t) {
      if (stream.mask[t]) rows.append_row(stream.frames.row(t));
    }
    const auto raw = rows.rows() > 0 ? m.predict(rows) : std::vector<double>{};
    const auto pred = impute_predictions(raw, stream.mask, fill_start);
    const fs::path path = output_path(out);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    save_annotations(path, pred);
    o << "predict: frames=" << pred.size() << " valid=" << stream.mask.valid_count()
      << " out=" << path.generic_string() << "\n";
    return kExitOk;
  }
};

struct EvalCmd {
  std::string pred;
  std::string gold;
  std::string dimension = "arousal";

  void add(CLI::App& app) {
    auto* s = app.add_subcommand("eval", "Score a prediction file against a gold file");
    s->add_option("--pred", pred, "Prediction file (frame,value)")->required();
    s->add_option("--gold", gold, "Gold file (frame,value)")->required();
    s->add_option("--dimension", dimension, "arousal or valence")->capture_default_str();
  }

  int run(std::ostream& o) const {
    const auto dim = parse_dimension(dimension);
    const auto p = load_annotations(pred, dim, kDefaultFramePeriod, false);
    const auto g = load_annotations(gold, dim);
    if (p.size() != g.size()) {
      throw DataError("prediction has " + std::to_string(p.size()) + " frames, gold has " +
                      std::to_string(g.size()));
    }
    const auto r = ccc(p.values, g.values);
    o << "ccc=" << format_fixed(r.ccc) << " mae=" << format_fixed(r.mae)
      << " pearson=" << format_fixed(r.pearson) << " n=" << r.n << "\n";
    return kExitOk;
  }
};

struct GridCmd {
  DataFlags data;
  SolverFlags solver;
  std::vector<double> c_values = GridSpec::defaults().c_values;
  std::vector<double> epsilon_values = GridSpec::defaults().epsilon_values;
  std::vector<std::string> kernels{"linear"};
  std::string objective = "ccc";
  std::size_t jobs = 0;
  std::string out;

  void add(CLI::App& app) {
    auto* s = app.add_subcommand("grid", "Grid-search C, epsilon and kernel on train/dev");
    data.add(s);
    s->add_option("--c", c_values, "C values")->capture_default_str();
    s->add_option("--epsilon", epsilon_values, "Epsilon values")->capture_default_str();
    s->add_option("--kernels", kernels, "Kernels: linear, rbf:<gamma>")->capture_default_str();
    s->add_option("--objective", objective, "ccc, pearson or mae")->capture_default_str();
    solver.add(s);
    add_jobs(s, jobs);
    s->add_option("--out", out, "Output directory")->required();
  }

  int run(std::ostream& o) const {
    const auto dataset = DatasetManifest::load(data.manifest).load_dataset();
    const auto train = training_set(
        split_data(dataset.train, data.modality, data.dim(), data.effective_delay()));
    const auto dev =
        training_set(split_data(dataset.dev, data.modality, data.dim(), data.effective_delay()));
    GridSpec grid{c_values, epsilon_values, parse_kernels(kernels)};
    grid.validate();
    auto result = grid_search(grid, train, dev, parse_objective(objective), solver.options(), jobs);
    if (solver.fatal && result.best_model.warning()) {
      throw NumericalError("best grid cell hit max_passes before converging");
    }
    const fs::path dir = output_path(out);
    std::string table = "kernel,c,epsilon,score,support,converged,error\n";
    for (const auto& cell : result.table) {
      table += cell.hyper.kernel.to_string() + "," + format_double(cell.hyper.c) + "," +
               format_double(cell.hyper.epsilon) + "," +
               (cell.error ? std::string() : format_double(cell.score)) + "," +
               std::to_string(cell.support_count) + "," + (cell.converged ? "1" : "0") + "," +
               (cell.error ? *cell.error : std::string()) + "\n";
    }
    write_file(dir / "grid.csv", table);
    write_file(dir / "model.txt", result.best_model.to_text());
    o << "grid: cells=" << result.table.size() << " best c=" << format_double(result.best.c)
      << " epsilon=" << format_double(result.best.epsilon)
      << " kernel=" << result.best.kernel.to_string() << " " << objective << "="
      << format_fixed(result.table[result.best_index].score) << "\n";
    return kExitOk;
  }
};

struct PostprocessCmd {
  std::string params;
  std::string pred;
  std::string pred_train;
  std::string gold_train;
  std::string gold_dev;
  std::string out;
  double frame_period = kDefaultFramePeriod;
  std::vector<double> windows = ChainSearchSpace{}.windows_s;
  std::vector<std::string> beta_modes{"std-ratio", "mean-ratio"};
  std::vector<std::string> center_modes{"bias-correction"};
  std::size_t jobs = 0;

  void add(CLI::App& app) {
    auto* s = app.add_subcommand(
        "postprocess",
        "Tune a post-processing chain (train + dev traces) or apply a saved one (--params)");
    s->add_option("--pred", pred, "Dev (or input) predictions")->required();
    s->add_option("--params", params, "Apply this saved chain instead of tuning");
    s->add_option("--pred-train", pred_train, "Training predictions, for tuning");
    s->add_option("--gold-train", gold_train, "Training gold, for tuning");
    s->add_option("--gold-dev", gold_dev, "Dev gold, for tuning");
    s->add_option("--windows", windows, "Median windows in seconds")->capture_default_str();
    s->add_option("--beta-modes", beta_modes, "std-ratio, mean-ratio")->capture_default_str();
    s->add_option("--center-modes", center_modes, "bias-correction, subtract-gold-mean")
        ->capture_default_str();
    s->add_option("--frame-period", frame_period, "Seconds per frame")->capture_default_str();
    add_jobs(s, jobs);
    s->add_option("--out", out, "Output directory")->required();
  }

  int run(std::ostream& o) const {
    const auto load = [](const std::string& path, bool gold) {
      return load_annotations(path, AffectDimension::Arousal, kDefaultFramePeriod, gold).values;
    };
    const fs::path dir = output_path(out);
    const auto input = load(pred, false);
    PostProcessParams chain;
    if (!params.empty()) {
      chain = PostProcessParams::from_text(read_file(params));
    } else {
      if (pred_train.empty() || gold_train.empty() || gold_dev.empty()) {
        throw UsageError("tuning needs --pred-train, --gold-train and --gold-dev (or pass --params)");
      }
      ChainSearchSpace space;
      space.windows_s = windows;
      space.beta_modes.clear();
      for (const auto& m : beta_modes) space.beta_modes.push_back(parse_beta_mode(m));
      space.center_modes.clear();
      for (const auto& m : center_modes) space.center_modes.push_back(parse_center_mode(m));
      const auto tuning = tune_chain(input, load(gold_dev, true), load(pred_train, false),
                                     load(gold_train, true), frame_period, space, {}, jobs);
      chain = tuning.params;
      o << "postprocess: trials=" << tuning.table.size()
        << " empty_chain_ccc=" << format_fixed(tuning.empty_chain_ccc)
        << " best_ccc=" << format_fixed(tuning.table[tuning.best_index].dev_ccc) << "\n";
    }
    const auto result = chain.apply(input, frame_period);
    fs::create_directories(dir);
    write_file(dir / "postprocess.txt", chain.to_text());
    save_annotations(dir / "predictions.csv", result);
    o << "postprocess: steps=" << chain.enabled_steps() << " out=" << dir.generic_string() << "\n";
    return kExitOk;
  }
};

struct ExperimentCmd {
  std::string config;
  std::optional<std::string> name, manifest, synth, dimension, fusion, feature_label, objective;
  std::optional<std::vector<std::string>> modalities, kernels, beta_modes, center_modes;
  std::optional<std::vector<double>> late_weights, c_values, epsilon_values, windows;
  std::optional<std::size_t> delay_arousal, delay_valence, max_passes, cache_mb, max_train_rows;
  std::optional<std::size_t> jobs;
  std::optional<double> tol, fill_start;
  std::optional<bool> fatal, postprocess, exclude_invalid, per_subject_average;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;

  void add(CLI::App& app) {
    auto* s = app.add_subcommand("experiment", "Run a full experiment from a config file and/or flags");
    s->add_option("--config", config, "Experiment config (JSON)");
    s->add_option("--name", name, "Run name");
    s->add_option("--manifest", manifest, "Dataset manifest (replaces the config's data source)");
    s->add_option("--synth", synth, "Synthetic data spec JSON (replaces the config's data source)");
    s->add_option("--dimension", dimension, "arousal or valence");
    s->add_option("--modalities", modalities, "Modalities, in fusion order");
    s->add_option("--fusion", fusion, "none, early or late");
    s->add_option("--late-weights", late_weights, "Late fusion weights (sum to 1)");
    s->add_option("--feature-label", feature_label, "Feature column label in the table");
    s->add_option("--delay-arousal", delay_arousal, "Arousal delay in frames");
    s->add_option("--delay-valence", delay_valence, "Valence delay in frames");
    s->add_option("--c", c_values, "Grid C values");
    s->add_option("--epsilon", epsilon_values, "Grid epsilon values");
    s->add_option("--kernels", kernels, "Grid kernels: linear, rbf:<gamma>");
    s->add_option("--objective", objective, "Grid objective: ccc, pearson or mae");
    s->add_option("--tol", tol, "SMO stopping tolerance");
    s->add_option("--max-passes", max_passes, "SMO update cap, in multiples of the row count");
    s->add_option("--cache-mb", cache_mb, "Kernel row cache size");
    s->add_option("--fatal-nonconvergence", fatal, "Fail (exit 3) when SMO hits the update cap");
    s->add_option("--max-train-rows", max_train_rows, "Subsample training rows (0 = all)");
    s->add_option("--postprocess", postprocess, "Tune the post-processing chain");
    s->add_option("--windows", windows, "Median windows in seconds");
    s->add_option("--beta-modes", beta_modes, "std-ratio, mean-ratio");
    s->add_option("--center-modes", center_modes, "bias-correction, subtract-gold-mean");
    s->add_option("--exclude-invalid", exclude_invalid, "Score only frames valid in every modality");
    s->add_option("--per-subject-average", per_subject_average, "Average CCC over dev subjects");
    s->add_option("--fill-start", fill_start, "Prediction for invalid frames before the first valid one");
    s->add_option("--seed", seed, "Random seed");
    s->add_option("--jobs", jobs, "Worker threads (0 = all cores)");
    s->add_option("--out", out, "Output directory");
  }

  ExperimentConfig effective() const {
    ExperimentConfig c;
    if (!config.empty()) c = ExperimentConfig::from_json_text(read_file(config), config);
    override(c.name, name);
    if (manifest) {
      c.manifest = fs::path(*manifest);
      c.synth.reset();
    }
    if (synth) {
      c.synth = SynthSpec::from_json_text(read_file(*synth));
      c.manifest.reset();
    }
    if (dimension) c.dimension = parse_dimension(*dimension);
    override(c.modalities, modalities);
    if (fusion) c.scheme = parse_fusion_scheme(*fusion);
    if (late_weights) c.late_weights = *late_weights;
    override(c.feature_label, feature_label);
    if (delay_arousal) c.delay_frames[AffectDimension::Arousal] = *delay_arousal;
    if (delay_valence) c.delay_frames[AffectDimension::Valence] = *delay_valence;
    override(c.grid.c_values, c_values);
    override(c.grid.epsilon_values, epsilon_values);
    if (kernels) c.grid.kernels = parse_kernels(*kernels);
    if (objective) c.objective = parse_objective(*objective);
    override(c.tol, tol);
    override(c.max_passes, max_passes);
    override(c.cache_mb, cache_mb);
    override(c.fatal_nonconvergence, fatal);
    override(c.max_train_rows, max_train_rows);
    override(c.postprocess, postprocess);
    override(c.chain.windows_s, windows);
    if (beta_modes) {
      c.chain.beta_modes.clear();
      for (const auto& m : *beta_modes) c.chain.beta_modes.push_back(parse_beta_mode(m));
    }
    if (center_modes) {
      c.chain.center_modes.clear();
      for (const auto& m : *center_modes) c.chain.center_modes.push_back(parse_center_mode(m));
    }
    override(c.exclude_invalid, exclude_invalid);
    override(c.per_subject_average, per_subject_average);
    c.chain.segment_average = c.per_subject_average;
    override(c.fill_start, fill_start);
    override(c.seed, seed);
    if (c.synth) c.synth->seed = c.seed;
    override(c.jobs, jobs);
    if (out) c.output_dir = *out;
    c.validate();
    return c;
  }

  int run(std::ostream& o) const {
    const auto c = effective();
    const auto artifacts = run_experiment(c);
    const auto files = emit_report(artifacts, c, output_path(c.output_dir));
    const auto& r = artifacts.report;
    o << "experiment " << r.name << ": dimension=" << to_string(r.dimension)
      << " fusion=" << to_string(r.scheme) << " raw_ccc=" << format_fixed(r.stage("raw").eval.ccc)
      << " final_ccc=" << format_fixed(r.final_ccc())
      << " report=" << files.report.generic_string() << "\n";
    return kExitOk;
  }
};

struct ReportCmd {
  std::vector<std::string> reports;
  std::string audit;
  std::string out;

  void add(CLI::App& app) {
    auto* s = app.add_subcommand("report", "Print the results table for one or more run reports");
    s->add_option("--report", reports, "Run report JSON (repeatable)")->required();
    s->add_option("--audit", audit, "Predictions CSV to re-score against the (single) report");
    s->add_option("--out", out, "Also write the table to this file");
  }

  int run(std::ostream& o) const {
    std::vector<RunReport> parsed;
    for (const auto& r : reports) parsed.push_back(RunReport::from_json_text(read_file(r), r));
    const auto table = format_table(parsed);
    o << table;
    if (!out.empty()) write_file(output_path(out), table);
    if (!audit.empty()) {
      if (parsed.size() != 1) throw UsageError("--audit takes exactly one --report");
      const auto result = audit_report(parsed.front(), audit);
      o << "audit: max_abs_diff=" << format_double(result.max_abs_diff) << "\n";
      if (result.max_abs_diff > 1e-9) throw DataError("report does not match its predictions");
    }
    return kExitOk;
  }
};

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Usage: return kExitUsage;
    case ErrorKind::Data: return kExitData;
    case ErrorKind::Numerical: return kExitNumerical;
  }
  return kExitData;
}

}  // namespace

int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Continuous arousal/valence regression with SVR, fusion and post-processing",
               "affectsvr"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "affectsvr 0.1.0");

  SynthCmd synth;
  TrainCmd train;
  PredictCmd predict;
  EvalCmd eval;
  GridCmd grid;
  PostprocessCmd post;
  ExperimentCmd experiment;
  ReportCmd report;
  synth.add(app);
  train.add(app);
  predict.add(app);
  eval.add(app);
  grid.add(app);
  post.add(app);
  experiment.add(app);
  report.add(app);

  std::vector<std::string> args(argv.size() > 1 ? argv.begin() + 1 : argv.end(), argv.end());
  if (!args.empty() && !args.front().starts_with("-")) {
    const auto subs = app.get_subcommands({});
    const bool known = std::any_of(subs.begin(), subs.end(),
                                   [&](const CLI::App* s) { return s->get_name() == args.front(); });
    if (!known) {
      err << "error: unknown subcommand '" << args.front() << "'\n\n" << app.help();
      return kExitUsage;
    }
  }
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << app.version() << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    const auto* sub = app.get_subcommands().front();
    const std::string& name = sub->get_name();
    if (name == "synth") return synth.run(out);
    if (name == "train") return train.run(out);
    if (name == "predict") return predict.run(out);
    if (name == "eval") return eval.run(out);
    if (name == "grid") return grid.run(out);
    if (name == "postprocess") return post.run(out);
    if (name == "experiment") return experiment.run(out);
    if (name == "report") return report.run(out);
    err << "error: unknown subcommand '" << name << "'\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace affect::cli
