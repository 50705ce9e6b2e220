#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "affect/fusion.hpp"
#include "affect/ingest.hpp"
#include "affect/metrics.hpp"
#include "affect/postprocess.hpp"
#include "affect/svr.hpp"
#include "affect/timeseries.hpp"

namespace affect {

/// Reaction-lag compensation defaults, in frames at 25 fps (2.8 s and 2.0 s).
inline constexpr std::size_t kDefaultArousalDelay = 70;
inline constexpr std::size_t kDefaultValenceDelay = 50;

/// Everything that defines a run. Serialized as JSON (see README for the
/// schema); `jobs` and `output_dir` never change results and are left out of
/// the config hash.
struct ExperimentConfig {
  std::string name = "experiment";

  // Exactly one data source.
  std::optional<std::filesystem::path> manifest;
  std::optional<SynthSpec> synth;

  AffectDimension dimension = AffectDimension::Arousal;
  std::vector<std::string> modalities;
  FusionScheme scheme = FusionScheme::None;
  std::optional<std::vector<double>> late_weights;
  /// Label for the "Feature" column of the results table; defaults to the
  /// modality names.
  std::string feature_label;
  std::map<AffectDimension, std::size_t> delay_frames{
      {AffectDimension::Arousal, kDefaultArousalDelay},
      {AffectDimension::Valence, kDefaultValenceDelay}};

  GridSpec grid = GridSpec::defaults();
  Objective objective = Objective::Ccc;
  double tol = 1e-3;
  std::size_t max_passes = 10000;
  std::size_t cache_mb = 256;
  bool fatal_nonconvergence = false;
  /// 0 keeps every training row; otherwise a seeded subsample.
  std::size_t max_train_rows = 0;

  bool postprocess = true;
  ChainSearchSpace chain;

  /// Score only frames valid in every modality instead of imputing the rest.
  bool exclude_invalid = false;
  bool per_subject_average = false;
  double fill_start = 0.0;

  std::uint64_t seed = 1;
  std::size_t jobs = 0;
  std::filesystem::path output_dir = "out";

  static ExperimentConfig from_json_text(std::string_view text,
                                         const std::string& source = "config");
  std::string to_json_text() const;
  /// to_json_text() without `jobs` and `output_dir`.
  std::string canonical_json_text() const;
  /// FNV-1a of the canonical JSON without `jobs` and `output_dir`.
  std::string hash() const;
  void validate() const;

  std::size_t delay() const { return delay_frames.at(dimension); }
  std::string effective_feature_label() const;
};

struct StageReport {
  std::string name;  // raw, median, scale, center, final
  EvaluationReport eval;
};

/// One trained regressor: the whole run for unimodal and early fusion, one
/// per modality for late fusion.
struct BranchReport {
  std::string label;
  SvrHyperParams hyper;
  std::size_t support_count = 0;
  std::size_t train_rows = 0;
  bool converged = true;
  std::vector<GridCell> grid;
};

struct UnimodalScore {
  std::string modality;
  double raw_ccc = 0.0;
  double final_ccc = 0.0;
};

struct RunReport {
  std::string name;
  std::string config_hash;
  AffectDimension dimension = AffectDimension::Arousal;
  FusionScheme scheme = FusionScheme::None;
  std::vector<std::string> modalities;
  std::string feature_label;
  std::size_t delay_frames = 0;
  bool exclude_invalid = false;
  bool per_subject_average = false;

  std::vector<BranchReport> branches;
  std::vector<UnimodalScore> unimodal;  // fusion runs only
  PostProcessParams post;
  bool post_dev_tuned = false;
  double empty_chain_ccc = 0.0;
  std::size_t chain_trials = 0;
  std::vector<StageReport> stages;

  /// Wall-clock seconds per stage. Written to a separate file so the machine
  /// report is reproducible byte for byte.
  std::map<std::string, double> timing_s;

  double final_ccc() const;
  const StageReport& stage(std::string_view name) const;

  std::string to_json_text() const;
  static RunReport from_json_text(std::string_view text, const std::string& source = "report");
};

/// Dev-split predictions behind a report, one entry per evaluated frame.
struct RunArtifacts {
  RunReport report;
  std::vector<std::string> subject;
  std::vector<std::size_t> frame;
  std::vector<bool> valid;
  std::vector<double> gold;
  std::map<std::string, std::vector<double>> stage_predictions;
  std::vector<SvrModel> models;  // parallel to report.branches
};

/// Applies delay compensation to every subject: gold is advanced by `delay`
/// frames and feature streams are cut to the shortened length.
std::vector<SubjectRecord> compensate_delay(std::span<const SubjectRecord> subjects,
                                            AffectDimension dimension, std::size_t delay);

/// Loads the configured data (manifest or synthetic).
DatasetSplit load_experiment_data(const ExperimentConfig& config);

/// Exactly one modality, no fusion.
RunArtifacts run_unimodal(const ExperimentConfig& config, const DatasetSplit& data);
/// Two or more modalities, early or late fusion; also scores each modality
/// alone for comparison.
RunArtifacts run_fusion(const ExperimentConfig& config, const DatasetSplit& data);
/// Dispatches on the config's scheme.
RunArtifacts run_experiment(const ExperimentConfig& config, const DatasetSplit& data);
RunArtifacts run_experiment(const ExperimentConfig& config);

struct EmittedFiles {
  std::filesystem::path report;       // machine-readable JSON
  std::filesystem::path timing;
  std::filesystem::path table;        // human-readable
  std::filesystem::path predictions;  // per-frame CSV
  std::filesystem::path postprocess;
  std::filesystem::path config;       // effective config echo
  std::vector<std::filesystem::path> models;
};

/// Writes every artifact of a run into `dir`; file names embed the config
/// hash.
EmittedFiles emit_report(const RunArtifacts& run, const ExperimentConfig& config,
                         const std::filesystem::path& dir);

/// Results table with columns Modality | Feature | Fusion | CCC, one row per
/// report, CCC at 6 decimals.
std::string format_table(std::span<const RunReport> reports);

struct AuditResult {
  std::map<std::string, double> recomputed_ccc;
  double max_abs_diff = 0.0;
};

/// Recomputes every stage CCC from a predictions CSV and compares it with
/// the report.
AuditResult audit_report(const RunReport& report, const std::filesystem::path& predictions_csv);

}  // namespace affect
