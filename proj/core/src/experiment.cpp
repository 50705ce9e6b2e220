#include "affect/experiment.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "affect/error.hpp"
#include "affect/format.hpp"
#include "json_io.hpp"

namespace affect {
namespace fs = std::filesystem;
using detail::json;

// ---------------------------------------------------------------------------
// Config

namespace {

json kernels_to_json(const std::vector<Kernel>& kernels) {
  json out = json::array();
  for (const auto& k : kernels) out.push_back(k.to_string());
  return out;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw DataError(where + "." + key + ": wrong type");
  }
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_text(std::string_view text, const std::string& source) {
  const json j = detail::parse_json(text, source);
  detail::require_keys(j, {"name", "data", "dimension", "modalities", "fusion", "feature_label",
                           "delay_frames", "svr", "postprocess", "evaluation", "seed", "jobs",
                           "output_dir"},
                       source);
  ExperimentConfig c;
  c.name = get_or<std::string>(j, "name", c.name, source);
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed, source);
  c.jobs = get_or<std::size_t>(j, "jobs", c.jobs, source);
  c.output_dir = get_or<std::string>(j, "output_dir", c.output_dir.string(), source);
  c.dimension = parse_dimension(get_or<std::string>(j, "dimension", "arousal", source));
  c.modalities = get_or<std::vector<std::string>>(j, "modalities", {}, source);
  c.feature_label = get_or<std::string>(j, "feature_label", "", source);

  if (j.contains("data")) {
    const auto& d = j.at("data");
    detail::require_keys(d, {"manifest", "synth"}, source + ".data");
    if (d.contains("manifest")) c.manifest = get_or<std::string>(d, "manifest", "", source + ".data");
    if (d.contains("synth")) c.synth = detail::synth_from_json(d.at("synth"));
  }
  if (c.synth) c.synth->seed = c.seed;

  if (j.contains("fusion")) {
    const auto& f = j.at("fusion");
    detail::require_keys(f, {"scheme", "late_weights"}, source + ".fusion");
    c.scheme = parse_fusion_scheme(get_or<std::string>(f, "scheme", "none", source + ".fusion"));
    if (f.contains("late_weights") && !f.at("late_weights").is_null()) {
      c.late_weights = get_or<std::vector<double>>(f, "late_weights", {}, source + ".fusion");
    }
  }
  if (j.contains("delay_frames")) {
    const auto& d = j.at("delay_frames");
    detail::require_keys(d, {"arousal", "valence"}, source + ".delay_frames");
    c.delay_frames[AffectDimension::Arousal] =
        get_or<std::size_t>(d, "arousal", kDefaultArousalDelay, source + ".delay_frames");
    c.delay_frames[AffectDimension::Valence] =
        get_or<std::size_t>(d, "valence", kDefaultValenceDelay, source + ".delay_frames");
  }
  if (j.contains("svr")) {
    const auto& s = j.at("svr");
    const std::string where = source + ".svr";
    detail::require_keys(s, {"c", "epsilon", "kernels", "objective", "tol", "max_passes", "cache_mb",
                             "fatal_nonconvergence", "max_train_rows"},
                         where);
    c.grid.c_values = get_or<std::vector<double>>(s, "c", c.grid.c_values, where);
    c.grid.epsilon_values = get_or<std::vector<double>>(s, "epsilon", c.grid.epsilon_values, where);
    if (s.contains("kernels")) {
      c.grid.kernels.clear();
      for (const auto& k : get_or<std::vector<std::string>>(s, "kernels", {}, where)) {
        c.grid.kernels.push_back(Kernel::parse(k));
      }
    }
    c.objective = parse_objective(get_or<std::string>(s, "objective", "ccc", where));
    c.tol = get_or<double>(s, "tol", c.tol, where);
    c.max_passes = get_or<std::size_t>(s, "max_passes", c.max_passes, where);
    c.cache_mb = get_or<std::size_t>(s, "cache_mb", c.cache_mb, where);
    c.fatal_nonconvergence = get_or<bool>(s, "fatal_nonconvergence", c.fatal_nonconvergence, where);
    c.max_train_rows = get_or<std::size_t>(s, "max_train_rows", c.max_train_rows, where);
  }
  if (j.contains("postprocess")) {
    const auto& p = j.at("postprocess");
    const std::string where = source + ".postprocess";
    detail::require_keys(p, {"enabled", "windows_s", "beta_modes", "center_modes"}, where);
    c.postprocess = get_or<bool>(p, "enabled", c.postprocess, where);
    c.chain.windows_s = get_or<std::vector<double>>(p, "windows_s", c.chain.windows_s, where);
    if (p.contains("beta_modes")) {
      c.chain.beta_modes.clear();
      for (const auto& m : get_or<std::vector<std::string>>(p, "beta_modes", {}, where)) {
        c.chain.beta_modes.push_back(parse_beta_mode(m));
      }
    }
    if (p.contains("center_modes")) {
      c.chain.center_modes.clear();
      for (const auto& m : get_or<std::vector<std::string>>(p, "center_modes", {}, where)) {
        c.chain.center_modes.push_back(parse_center_mode(m));
      }
    }
  }
  if (j.contains("evaluation")) {
    const auto& e = j.at("evaluation");
    const std::string where = source + ".evaluation";
    detail::require_keys(e, {"exclude_invalid", "per_subject_average", "fill_start"}, where);
    c.exclude_invalid = get_or<bool>(e, "exclude_invalid", c.exclude_invalid, where);
    c.per_subject_average = get_or<bool>(e, "per_subject_average", c.per_subject_average, where);
    c.fill_start = get_or<double>(e, "fill_start", c.fill_start, where);
  }
  c.chain.segment_average = c.per_subject_average;
  c.validate();
  return c;
}

namespace {

json config_json(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  json data = json::object();
  if (c.manifest) data["manifest"] = c.manifest->generic_string();
  if (c.synth) data["synth"] = detail::synth_to_json(*c.synth);
  j["data"] = data;
  j["dimension"] = std::string(to_string(c.dimension));
  j["modalities"] = c.modalities;
  j["fusion"] = {{"scheme", std::string(to_string(c.scheme))},
                 {"late_weights", c.late_weights ? json(*c.late_weights) : json(nullptr)}};
  j["feature_label"] = c.feature_label;
  j["delay_frames"] = {{"arousal", c.delay_frames.at(AffectDimension::Arousal)},
                       {"valence", c.delay_frames.at(AffectDimension::Valence)}};
  j["svr"] = {{"c", c.grid.c_values},
              {"epsilon", c.grid.epsilon_values},
              {"kernels", kernels_to_json(c.grid.kernels)},
              {"objective", std::string(to_string(c.objective))},
              {"tol", c.tol},
              {"max_passes", c.max_passes},
              {"cache_mb", c.cache_mb},
              {"fatal_nonconvergence", c.fatal_nonconvergence},
              {"max_train_rows", c.max_train_rows}};
  json beta_modes = json::array();
  for (auto m : c.chain.beta_modes) beta_modes.push_back(std::string(to_string(m)));
  json center_modes = json::array();
  for (auto m : c.chain.center_modes) center_modes.push_back(std::string(to_string(m)));
  j["postprocess"] = {{"enabled", c.postprocess},
                      {"windows_s", c.chain.windows_s},
                      {"beta_modes", beta_modes},
                      {"center_modes", center_modes}};
  j["evaluation"] = {{"exclude_invalid", c.exclude_invalid},
                     {"per_subject_average", c.per_subject_average},
                     {"fill_start", c.fill_start}};
  j["seed"] = c.seed;
  j["jobs"] = c.jobs;
  j["output_dir"] = c.output_dir.generic_string();
  return j;
}

}  // namespace

std::string ExperimentConfig::to_json_text() const { return config_json(*this).dump(2) + "\n"; }

namespace {

json canonical_json(const ExperimentConfig& c) {
  json j = config_json(c);
  j.erase("jobs");
  j.erase("output_dir");
  return j;
}

}  // namespace

std::string ExperimentConfig::canonical_json_text() const { return canonical_json(*this).dump(2) + "\n"; }

std::string ExperimentConfig::hash() const { return fnv1a_hex(canonical_json(*this).dump()); }

void ExperimentConfig::validate() const {
  if (manifest.has_value() == synth.has_value()) {
    throw UsageError("config: exactly one of data.manifest and data.synth is required");
  }
  if (modalities.empty()) throw UsageError("config: at least one modality is required");
  if (scheme == FusionScheme::None) {
    if (modalities.size() != 1) {
      throw UsageError("config: fusion scheme 'none' takes exactly one modality");
    }
  } else {
    FusionConfig{scheme, modalities, late_weights}.validate();
  }
  if (late_weights && scheme != FusionScheme::Late) {
    throw UsageError("config: late_weights only apply to late fusion");
  }
  if (!delay_frames.contains(dimension)) throw UsageError("config: no delay for the dimension");
  grid.validate();
  if (!(tol > 0.0)) throw UsageError("config: svr.tol must be positive");
  if (max_passes == 0) throw UsageError("config: svr.max_passes must be positive");
  for (double w : chain.windows_s) {
    if (!(w >= kMinMedianWindow && w <= kMaxMedianWindow)) {
      throw UsageError("config: median windows must lie in [0.4, 8] s");
    }
  }
  if (chain.beta_modes.empty() || chain.center_modes.empty()) {
    throw UsageError("config: beta_modes and center_modes must be non-empty");
  }
  if (!std::isfinite(fill_start)) throw UsageError("config: fill_start must be finite");
  if (synth) {
    synth->validate();
    for (const auto& m : modalities) {
      const bool found = std::any_of(synth->modalities.begin(), synth->modalities.end(),
                                     [&](const ModalitySpec& s) { return s.name == m; });
      if (!found) throw UsageError("config: modality '" + m + "' is not generated by data.synth");
    }
  }
}

std::string ExperimentConfig::effective_feature_label() const {
  if (!feature_label.empty()) return feature_label;
  std::string out;
  for (const auto& m : modalities) out += (out.empty() ? "" : "+") + m;
  return out;
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

const FeatureStream& stream_of(const SubjectRecord& s, const std::string& modality) {
  const auto it = s.streams.find(modality);
  if (it == s.streams.end()) {
    throw DataError("subject '" + s.subject_id + "' has no '" + modality + "' features");
  }
  return it->second;
}

Matrix valid_rows(const FeatureStream& stream) {
  Matrix out(0, stream.dim());
  for (std::size_t t = 0; t < stream.size(); ++t) {
    if (stream.mask[t]) out.append_row(stream.frames.row(t));
  }
  return out;
}

struct BranchRun {
  BranchReport report;
  SvrModel model;
  std::vector<std::vector<double>> train_pred;  // per subject, full length
  std::vector<std::vector<double>> dev_pred;
};

BranchRun run_branch(const std::string& label, const std::vector<FeatureStream>& train_streams,
                     const std::vector<SubjectRecord>& train, const std::vector<FeatureStream>& dev_streams,
                     const std::vector<SubjectRecord>& dev, const ExperimentConfig& config) {
  TrainingSet train_set;
  for (std::size_t i = 0; i < train.size(); ++i) {
    train_set.append(apply_mask_for_training(train_streams[i], train[i].gold.at(config.dimension)));
  }
  TrainingSet dev_set;
  for (std::size_t i = 0; i < dev.size(); ++i) {
    dev_set.append(apply_mask_for_training(dev_streams[i], dev[i].gold.at(config.dimension)));
  }
  train_set = subsample_rows(train_set, config.max_train_rows, config.seed);

  SolverOptions options;
  options.tol = config.tol;
  options.max_passes = config.max_passes;
  options.cache_mb = config.cache_mb;

  BranchRun run;
  auto grid = grid_search(config.grid, train_set, dev_set, config.objective, options, config.jobs);
  if (config.fatal_nonconvergence && grid.best_model.warning()) {
    throw NumericalError("branch '" + label + "': SMO hit max_passes before converging");
  }
  run.report.label = label;
  run.report.hyper = grid.best;
  run.report.support_count = grid.best_model.dual_coefs().size();
  run.report.train_rows = train_set.size();
  run.report.converged = !grid.best_model.warning();
  run.report.grid = std::move(grid.table);
  run.model = std::move(grid.best_model);

  auto predict_all = [&](const std::vector<FeatureStream>& streams) {
    std::vector<std::vector<double>> out;
    for (const auto& s : streams) {
      const Matrix rows = valid_rows(s);
      const auto pred = rows.rows() > 0 ? run.model.predict(rows) : std::vector<double>{};
      out.push_back(impute_predictions(pred, s.mask, config.fill_start));
    }
    return out;
  };
  run.train_pred = predict_all(train_streams);
  run.dev_pred = predict_all(dev_streams);
  return run;
}

/// Concatenated evaluation view over a split.
struct EvalView {
  std::vector<double> pred;
  std::vector<double> gold;
  std::vector<std::size_t> segments;
  std::vector<std::string> subject;
  std::vector<std::size_t> frame;
  std::vector<bool> valid;
};

EvalView assemble(const std::vector<std::vector<double>>& preds,
                  const std::vector<SubjectRecord>& subjects, const std::vector<FrameMask>& masks,
                  AffectDimension dimension, bool only_valid) {
  EvalView v;
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    const auto& gold = subjects[i].gold.at(dimension).values;
    std::size_t count = 0;
    for (std::size_t t = 0; t < gold.size(); ++t) {
      if (only_valid && !masks[i][t]) continue;
      v.pred.push_back(preds[i][t]);
      v.gold.push_back(gold[t]);
      v.subject.push_back(subjects[i].subject_id);
      v.frame.push_back(t);
      v.valid.push_back(masks[i][t]);
      ++count;
    }
    if (count > 0) v.segments.push_back(count);
  }
  if (v.pred.size() < 2) throw DataError("evaluation: fewer than 2 frames to score");
  return v;
}

EvaluationReport score(std::span<const double> pred, const EvalView& view, bool per_subject) {
  auto r = ccc(pred, view.gold);
  if (per_subject) r.ccc = mean_segment_ccc(pred, view.gold, view.segments);
  return r;
}

struct Finished {
  PostProcessParams post;
  bool tuned = false;
  double empty_chain_ccc = 0.0;
  std::size_t trials = 0;
  std::vector<StageReport> stages;
  std::map<std::string, std::vector<double>> stage_predictions;
};

Finished finish(const EvalView& train, const EvalView& dev, double frame_period,
                const ExperimentConfig& config) {
  Finished f;
  if (config.postprocess) {
    auto tuning = tune_chain(dev.pred, dev.gold, train.pred, train.gold, frame_period, config.chain,
                             dev.segments, config.jobs);
    f.post = std::move(tuning.params);
    f.tuned = true;
    f.empty_chain_ccc = tuning.empty_chain_ccc;
    f.trials = tuning.table.size();
  } else {
    f.empty_chain_ccc = score(dev.pred, dev, config.per_subject_average).ccc;
  }

  const auto outputs = f.post.apply_stages(dev.pred, frame_period, dev.segments);
  std::vector<double> current = dev.pred;
  f.stages.push_back({"raw", score(current, dev, config.per_subject_average)});
  f.stage_predictions["raw"] = current;
  for (ChainStep step : {ChainStep::Median, ChainStep::Scale, ChainStep::Center}) {
    const auto it = std::find(f.post.steps.begin(), f.post.steps.end(), step);
    if (it != f.post.steps.end()) current = outputs[static_cast<std::size_t>(it - f.post.steps.begin())];
    const std::string name(to_string(step));
    f.stages.push_back({name, score(current, dev, config.per_subject_average)});
    f.stage_predictions[name] = current;
  }
  f.stages.push_back({"final", score(current, dev, config.per_subject_average)});
  f.stage_predictions["final"] = current;
  return f;
}

double frame_period_of(const DatasetSplit& data) {
  for (const auto& s : data.train) {
    for (const auto& [name, stream] : s.streams) return stream.frame_period_s;
  }
  return kDefaultFramePeriod;
}

struct Compensated {
  std::vector<SubjectRecord> train;
  std::vector<SubjectRecord> dev;
};

Compensated compensate(const ExperimentConfig& config, const DatasetSplit& data) {
  data.validate();
  return {compensate_delay(data.train, config.dimension, config.delay()),
          compensate_delay(data.dev, config.dimension, config.delay())};
}

std::vector<FeatureStream> streams_for(const std::vector<SubjectRecord>& subjects,
                                       const std::string& modality) {
  std::vector<FeatureStream> out;
  for (const auto& s : subjects) out.push_back(stream_of(s, modality));
  return out;
}

std::vector<FrameMask> masks_of(const std::vector<FeatureStream>& streams) {
  std::vector<FrameMask> out;
  for (const auto& s : streams) out.push_back(s.mask);
  return out;
}

RunReport base_report(const ExperimentConfig& config) {
  RunReport r;
  r.name = config.name;
  r.config_hash = config.hash();
  r.dimension = config.dimension;
  r.scheme = config.scheme;
  r.modalities = config.modalities;
  r.feature_label = config.effective_feature_label();
  r.delay_frames = config.delay();
  r.exclude_invalid = config.exclude_invalid;
  r.per_subject_average = config.per_subject_average;
  return r;
}

void fill_from(RunArtifacts& out, const EvalView& dev, Finished&& f) {
  auto& r = out.report;
  r.post = std::move(f.post);
  r.post_dev_tuned = f.tuned;
  r.empty_chain_ccc = f.empty_chain_ccc;
  r.chain_trials = f.trials;
  r.stages = std::move(f.stages);
  out.subject = dev.subject;
  out.frame = dev.frame;
  out.valid = dev.valid;
  out.gold = dev.gold;
  out.stage_predictions = std::move(f.stage_predictions);
}

/// Grid search, prediction and post-processing for a single modality.
UnimodalScore score_unimodal(const std::string& modality, const BranchRun& branch,
                             const Compensated& data, const std::vector<FrameMask>& train_masks,
                             const std::vector<FrameMask>& dev_masks, double period,
                             const ExperimentConfig& config) {
  const auto train_view = assemble(branch.train_pred, data.train, train_masks, config.dimension, true);
  const auto dev_view =
      assemble(branch.dev_pred, data.dev, dev_masks, config.dimension, config.exclude_invalid);
  const auto f = finish(train_view, dev_view, period, config);
  return {modality, f.stages.front().eval.ccc, f.stages.back().eval.ccc};
}

}  // namespace

std::vector<SubjectRecord> compensate_delay(std::span<const SubjectRecord> subjects,
                                            AffectDimension dimension, std::size_t delay) {
  std::vector<SubjectRecord> out;
  for (const auto& s : subjects) {
    const auto it = s.gold.find(dimension);
    if (it == s.gold.end()) {
      throw DataError("subject '" + s.subject_id + "' has no " + std::string(to_string(dimension)) +
                      " annotation");
    }
    SubjectRecord rec;
    rec.subject_id = s.subject_id;
    rec.gold[dimension] = shift_gold(it->second, delay);
    const std::size_t frames = rec.gold[dimension].size();
    for (const auto& [name, stream] : s.streams) rec.streams[name] = truncate_stream(stream, frames);
    out.push_back(std::move(rec));
  }
  return out;
}

DatasetSplit load_experiment_data(const ExperimentConfig& config) {
  if (config.synth) return generate_synthetic(*config.synth);
  if (config.manifest) return DatasetManifest::load(*config.manifest).load_dataset();
  throw UsageError("config: no data source");
}

RunArtifacts run_unimodal(const ExperimentConfig& config, const DatasetSplit& data) {
  config.validate();
  if (config.scheme != FusionScheme::None || config.modalities.size() != 1) {
    throw UsageError("run_unimodal: needs exactly one modality and no fusion");
  }
  RunArtifacts out;
  out.report = base_report(config);
  const double period = frame_period_of(data);
  const auto& modality = config.modalities.front();

  auto start = Clock::now();
  const auto comp = compensate(config, data);
  const auto train_streams = streams_for(comp.train, modality);
  const auto dev_streams = streams_for(comp.dev, modality);
  out.report.timing_s["prepare"] = seconds_since(start);

  start = Clock::now();
  auto branch = run_branch(modality, train_streams, comp.train, dev_streams, comp.dev, config);
  out.report.timing_s["train"] = seconds_since(start);

  start = Clock::now();
  const auto train_view =
      assemble(branch.train_pred, comp.train, masks_of(train_streams), config.dimension, true);
  const auto dev_view = assemble(branch.dev_pred, comp.dev, masks_of(dev_streams), config.dimension,
                                 config.exclude_invalid);
  fill_from(out, dev_view, finish(train_view, dev_view, period, config));
  out.report.timing_s["postprocess"] = seconds_since(start);

  out.report.branches.push_back(std::move(branch.report));
  out.models.push_back(std::move(branch.model));
  return out;
}

RunArtifacts run_fusion(const ExperimentConfig& config, const DatasetSplit& data) {
  config.validate();
  if (config.scheme == FusionScheme::None) throw UsageError("run_fusion: fusion scheme is 'none'");
  RunArtifacts out;
  out.report = base_report(config);
  const double period = frame_period_of(data);

  auto start = Clock::now();
  const auto comp = compensate(config, data);
  std::vector<std::vector<FeatureStream>> train_by_mod, dev_by_mod;
  for (const auto& m : config.modalities) {
    train_by_mod.push_back(streams_for(comp.train, m));
    dev_by_mod.push_back(streams_for(comp.dev, m));
  }
  auto fuse_subjects = [&](const std::vector<std::vector<FeatureStream>>& by_mod, std::size_t count) {
    std::vector<FeatureStream> fused;
    for (std::size_t i = 0; i < count; ++i) {
      std::vector<FeatureStream> parts;
      for (const auto& mod : by_mod) parts.push_back(mod[i]);
      fused.push_back(early_fuse(parts));
    }
    return fused;
  };
  const auto train_fused = fuse_subjects(train_by_mod, comp.train.size());
  const auto dev_fused = fuse_subjects(dev_by_mod, comp.dev.size());
  out.report.timing_s["prepare"] = seconds_since(start);

  // Per-modality branches: the late-fusion members and the unimodal baselines.
  start = Clock::now();
  std::vector<BranchRun> singles;
  for (std::size_t m = 0; m < config.modalities.size(); ++m) {
    singles.push_back(run_branch(config.modalities[m], train_by_mod[m], comp.train, dev_by_mod[m],
                                 comp.dev, config));
  }

  std::vector<std::vector<double>> train_pred, dev_pred;
  if (config.scheme == FusionScheme::Early) {
    auto branch = run_branch(train_fused.front().modality, train_fused, comp.train, dev_fused,
                             comp.dev, config);
    train_pred = std::move(branch.train_pred);
    dev_pred = std::move(branch.dev_pred);
    out.report.branches.push_back(std::move(branch.report));
    out.models.push_back(std::move(branch.model));
  } else {
    auto fuse_late = [&](bool use_train, std::size_t count) {
      std::vector<std::vector<double>> fused;
      for (std::size_t i = 0; i < count; ++i) {
        std::vector<std::vector<double>> members;
        for (const auto& b : singles) members.push_back(use_train ? b.train_pred[i] : b.dev_pred[i]);
        if (config.late_weights) {
          fused.push_back(late_fuse(members, std::span<const double>(*config.late_weights)));
        } else {
          fused.push_back(late_fuse(members));
        }
      }
      return fused;
    };
    train_pred = fuse_late(true, comp.train.size());
    dev_pred = fuse_late(false, comp.dev.size());
    for (const auto& b : singles) {
      out.report.branches.push_back(b.report);
      out.models.push_back(b.model);
    }
  }
  out.report.timing_s["train"] = seconds_since(start);

  start = Clock::now();
  const auto train_view =
      assemble(train_pred, comp.train, masks_of(train_fused), config.dimension, true);
  const auto dev_view =
      assemble(dev_pred, comp.dev, masks_of(dev_fused), config.dimension, config.exclude_invalid);
  fill_from(out, dev_view, finish(train_view, dev_view, period, config));

  for (std::size_t m = 0; m < config.modalities.size(); ++m) {
    out.report.unimodal.push_back(score_unimodal(config.modalities[m], singles[m], comp,
                                                 masks_of(train_by_mod[m]), masks_of(dev_by_mod[m]),
                                                 period, config));
  }
  out.report.timing_s["postprocess"] = seconds_since(start);
  return out;
}

RunArtifacts run_experiment(const ExperimentConfig& config, const DatasetSplit& data) {
  return config.scheme == FusionScheme::None ? run_unimodal(config, data) : run_fusion(config, data);
}

RunArtifacts run_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto start = Clock::now();
  const auto data = load_experiment_data(config);
  const double load_s = seconds_since(start);
  auto run = run_experiment(config, data);
  run.report.timing_s["load"] = load_s;
  return run;
}

// ---------------------------------------------------------------------------
// Reports

double RunReport::final_ccc() const { return stage("final").eval.ccc; }

const StageReport& RunReport::stage(std::string_view name) const {
  for (const auto& s : stages) {
    if (s.name == name) return s;
  }
  throw DataError("report has no stage '" + std::string(name) + "'");
}

namespace {

json eval_json(const EvaluationReport& e) {
  return {{"ccc", e.ccc},           {"mae", e.mae},           {"pearson", e.pearson},
          {"mean_pred", e.mean_pred}, {"mean_gold", e.mean_gold}, {"var_pred", e.var_pred},
          {"var_gold", e.var_gold},   {"n", e.n}};
}

EvaluationReport eval_from_json(const json& j) {
  EvaluationReport e;
  e.ccc = j.at("ccc").get<double>();
  e.mae = j.at("mae").get<double>();
  e.pearson = j.at("pearson").get<double>();
  e.mean_pred = j.at("mean_pred").get<double>();
  e.mean_gold = j.at("mean_gold").get<double>();
  e.var_pred = j.at("var_pred").get<double>();
  e.var_gold = j.at("var_gold").get<double>();
  e.n = j.at("n").get<std::size_t>();
  e.degenerate = e.var_pred == 0.0 || e.var_gold == 0.0;
  return e;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

std::string RunReport::to_json_text() const {
  json j;
  j["format"] = "affect-run-report/1";
  j["name"] = name;
  j["config_hash"] = config_hash;
  j["dimension"] = std::string(to_string(dimension));
  j["scheme"] = std::string(to_string(scheme));
  j["modalities"] = modalities;
  j["feature_label"] = feature_label;
  j["delay_frames"] = delay_frames;
  j["evaluation"] = {{"exclude_invalid", exclude_invalid}, {"per_subject_average", per_subject_average}};

  j["branches"] = json::array();
  for (const auto& b : branches) {
    json grid = json::array();
    for (const auto& cell : b.grid) {
      grid.push_back({{"c", cell.hyper.c},
                      {"epsilon", cell.hyper.epsilon},
                      {"kernel", cell.hyper.kernel.to_string()},
                      {"score", cell.error ? json(nullptr) : json(cell.score)},
                      {"support_count", cell.support_count},
                      {"converged", cell.converged},
                      {"error", cell.error ? json(*cell.error) : json(nullptr)}});
    }
    j["branches"].push_back({{"label", b.label},
                             {"c", b.hyper.c},
                             {"epsilon", b.hyper.epsilon},
                             {"kernel", b.hyper.kernel.to_string()},
                             {"support_count", b.support_count},
                             {"train_rows", b.train_rows},
                             {"converged", b.converged},
                             {"grid", grid}});
  }
  j["unimodal"] = json::array();
  for (const auto& u : unimodal) {
    j["unimodal"].push_back({{"modality", u.modality}, {"raw_ccc", u.raw_ccc}, {"final_ccc", u.final_ccc}});
  }
  json steps = json::array();
  for (auto s : post.steps) steps.push_back(std::string(to_string(s)));
  j["postprocess"] = {{"dev_tuned", post_dev_tuned},
                      {"empty_chain_ccc", empty_chain_ccc},
                      {"trials", chain_trials},
                      {"steps", steps},
                      {"median_window_s", optional_json(post.median_window_s)},
                      {"beta", optional_json(post.beta)},
                      {"beta_mode", std::string(to_string(post.beta_mode))},
                      {"gold_mean_train", optional_json(post.gold_mean_train)},
                      {"pred_mean_train", optional_json(post.pred_mean_train)},
                      {"center_mode", std::string(to_string(post.center_mode))}};
  j["stages"] = json::array();
  for (const auto& s : stages) {
    json e = eval_json(s.eval);
    e["name"] = s.name;
    j["stages"].push_back(std::move(e));
  }
  return j.dump(2) + "\n";
}

RunReport RunReport::from_json_text(std::string_view text, const std::string& source) {
  const json j = detail::parse_json(text, source);
  RunReport r;
  try {
    if (j.at("format").get<std::string>() != "affect-run-report/1") {
      throw DataError(source + ": unsupported report format");
    }
    r.name = j.at("name").get<std::string>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.dimension = parse_dimension(j.at("dimension").get<std::string>());
    r.scheme = parse_fusion_scheme(j.at("scheme").get<std::string>());
    r.modalities = j.at("modalities").get<std::vector<std::string>>();
    r.feature_label = j.at("feature_label").get<std::string>();
    r.delay_frames = j.at("delay_frames").get<std::size_t>();
    r.exclude_invalid = j.at("evaluation").at("exclude_invalid").get<bool>();
    r.per_subject_average = j.at("evaluation").at("per_subject_average").get<bool>();
    for (const auto& b : j.at("branches")) {
      BranchReport br;
      br.label = b.at("label").get<std::string>();
      br.hyper = {b.at("c").get<double>(), b.at("epsilon").get<double>(),
                  Kernel::parse(b.at("kernel").get<std::string>())};
      br.support_count = b.at("support_count").get<std::size_t>();
      br.train_rows = b.at("train_rows").get<std::size_t>();
      br.converged = b.at("converged").get<bool>();
      for (const auto& g : b.at("grid")) {
        GridCell cell;
        cell.hyper = {g.at("c").get<double>(), g.at("epsilon").get<double>(),
                      Kernel::parse(g.at("kernel").get<std::string>())};
        if (!g.at("score").is_null()) cell.score = g.at("score").get<double>();
        cell.support_count = g.at("support_count").get<std::size_t>();
        cell.converged = g.at("converged").get<bool>();
        if (!g.at("error").is_null()) cell.error = g.at("error").get<std::string>();
        br.grid.push_back(std::move(cell));
      }
      r.branches.push_back(std::move(br));
    }
    for (const auto& u : j.at("unimodal")) {
      r.unimodal.push_back({u.at("modality").get<std::string>(), u.at("raw_ccc").get<double>(),
                            u.at("final_ccc").get<double>()});
    }
    const auto& p = j.at("postprocess");
    r.post_dev_tuned = p.at("dev_tuned").get<bool>();
    r.empty_chain_ccc = p.at("empty_chain_ccc").get<double>();
    r.chain_trials = p.at("trials").get<std::size_t>();
    for (const auto& s : p.at("steps")) {
      const auto name = s.get<std::string>();
      if (name == "median") r.post.steps.push_back(ChainStep::Median);
      else if (name == "scale") r.post.steps.push_back(ChainStep::Scale);
      else if (name == "center") r.post.steps.push_back(ChainStep::Center);
      else throw DataError(source + ": unknown post-process step '" + name + "'");
    }
    r.post.median_window_s = optional_from(p.at("median_window_s"));
    r.post.beta = optional_from(p.at("beta"));
    r.post.beta_mode = parse_beta_mode(p.at("beta_mode").get<std::string>());
    r.post.gold_mean_train = optional_from(p.at("gold_mean_train"));
    r.post.pred_mean_train = optional_from(p.at("pred_mean_train"));
    r.post.center_mode = parse_center_mode(p.at("center_mode").get<std::string>());
    for (const auto& s : j.at("stages")) {
      r.stages.push_back({s.at("name").get<std::string>(), eval_from_json(s)});
    }
  } catch (const json::exception& e) {
    throw DataError(source + ": " + e.what());
  }
  if (r.stages.empty()) throw DataError(source + ": report has no stages");
  return r;
}

namespace {

constexpr std::array<const char*, 5> kStageNames{"raw", "median", "scale", "center", "final"};

std::string sanitize(std::string label) {
  for (auto& ch : label) {
    const bool ok = std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_';
    if (!ok) ch = '_';
  }
  return label;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

}  // namespace

EmittedFiles emit_report(const RunArtifacts& run, const ExperimentConfig& config, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw DataError("cannot create output directory '" + dir.string() + "'");
  }
  const auto& r = run.report;
  const std::string tag = r.config_hash;
  EmittedFiles files;

  files.config = dir / ("config-" + tag + ".json");
  write_text(files.config, config.canonical_json_text());

  files.report = dir / ("report-" + tag + ".json");
  write_text(files.report, r.to_json_text());

  json timing = json::object();
  for (const auto& [k, v] : r.timing_s) timing[k] = v;
  files.timing = dir / ("timing-" + tag + ".json");
  write_text(files.timing, timing.dump(2) + "\n");

  files.table = dir / ("table-" + tag + ".txt");
  write_text(files.table, format_table(std::span(&r, 1)));

  files.postprocess = dir / ("postprocess-" + tag + ".txt");
  write_text(files.postprocess, r.post.to_text());

  std::string csv = "subject,frame,valid,gold";
  for (const char* s : kStageNames) csv += std::string(",") + s;
  csv += "\n";
  for (std::size_t k = 0; k < run.gold.size(); ++k) {
    csv += run.subject[k] + "," + std::to_string(run.frame[k]) + "," + (run.valid[k] ? "1" : "0") +
           "," + format_double(run.gold[k]);
    for (const char* s : kStageNames) csv += "," + format_double(run.stage_predictions.at(s)[k]);
    csv += "\n";
  }
  files.predictions = dir / ("predictions-" + tag + ".csv");
  write_text(files.predictions, csv);

  for (std::size_t b = 0; b < run.models.size(); ++b) {
    const auto path = dir / ("model-" + tag + "-" + std::to_string(b) + "-" +
                             sanitize(r.branches[b].label) + ".txt");
    write_text(path, run.models[b].to_text());
    files.models.push_back(path);
  }
  return files;
}

std::string format_table(std::span<const RunReport> reports) {
  std::vector<std::array<std::string, 4>> rows;
  rows.push_back({"Modality", "Feature", "Fusion", "CCC"});
  for (const auto& r : reports) {
    std::string modality;
    for (const auto& m : r.modalities) modality += (modality.empty() ? "" : " + ") + m;
    std::string fusion = r.scheme == FusionScheme::Early  ? "Early"
                         : r.scheme == FusionScheme::Late ? "Late"
                                                          : "-";
    rows.push_back({modality, r.feature_label, fusion, format_fixed(r.final_ccc(), 6)});
  }
  std::array<std::size_t, 4> width{};
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < 4; ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::string out;
  auto line = [&](const std::array<std::string, 4>& row) {
    for (std::size_t c = 0; c < 4; ++c) {
      out += row[c];
      out += c + 1 < 4 ? std::string(width[c] - row[c].size(), ' ') + " | " : "\n";
    }
  };
  line(rows.front());
  for (std::size_t c = 0; c < 4; ++c) {
    out += std::string(width[c], '-') + (c + 1 < 4 ? "-+-" : "\n");
  }
  for (std::size_t k = 1; k < rows.size(); ++k) line(rows[k]);
  return out;
}

AuditResult audit_report(const RunReport& report, const fs::path& predictions_csv) {
  std::ifstream in(predictions_csv, std::ios::binary);
  if (!in) throw DataError("cannot open '" + predictions_csv.string() + "'");
  std::string line;
  std::getline(in, line);
  const auto header = split(line, ',');
  std::map<std::string, std::size_t, std::less<>> column;
  for (std::size_t c = 0; c < header.size(); ++c) column[std::string(header[c])] = c;
  if (!column.contains("subject") || !column.contains("gold")) {
    throw DataError(predictions_csv.string() + ": missing subject/gold columns");
  }

  std::vector<double> gold;
  std::map<std::string, std::vector<double>> stages;
  std::vector<std::size_t> segments;
  std::string last_subject;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) {
      throw DataError(predictions_csv.string() + ":" + std::to_string(line_no) + ": ragged row");
    }
    auto real = [&](std::string_view name) {
      double v = 0.0;
      if (!parse_double(cells[column.at(std::string(name))], v)) {
        throw DataError(predictions_csv.string() + ":" + std::to_string(line_no) + ": bad number");
      }
      return v;
    };
    const std::string subject(cells[column.at("subject")]);
    if (segments.empty() || subject != last_subject) {
      segments.push_back(0);
      last_subject = subject;
    }
    ++segments.back();
    gold.push_back(real("gold"));
    for (const auto& s : report.stages) {
      if (column.contains(s.name)) stages[s.name].push_back(real(s.name));
    }
  }

  AuditResult result;
  for (const auto& s : report.stages) {
    const auto it = stages.find(s.name);
    if (it == stages.end()) throw DataError("predictions file lacks stage '" + s.name + "'");
    const double value = report.per_subject_average ? mean_segment_ccc(it->second, gold, segments)
                                                    : ccc(it->second, gold).ccc;
    result.recomputed_ccc[s.name] = value;
    result.max_abs_diff = std::max(result.max_abs_diff, std::fabs(value - s.eval.ccc));
  }
  return result;
}

}  // namespace affect
