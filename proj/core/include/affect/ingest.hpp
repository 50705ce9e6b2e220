#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "affect/timeseries.hpp"

namespace affect {

// Feature file (ASCII, LF, comma-separated, '.' decimal point):
//   frame,valid,f0,f1,...,f{dim-1}
//   0,1,0.25,-1.5
//   1,0,0,0
// `frame` counts up from 0; `valid` is 0 or 1.
//
// Annotation / prediction file:
//   frame,value
//   0,0.125

FeatureStream read_features(std::istream& in, const std::string& modality,
                            double frame_period_s = kDefaultFramePeriod,
                            const std::string& source = "<stream>");
FeatureStream load_features(const std::filesystem::path& path, const std::string& modality,
                            double frame_period_s = kDefaultFramePeriod);
void write_features(std::ostream& out, const FeatureStream& stream);
void save_features(const std::filesystem::path& path, const FeatureStream& stream);

/// Gold traces must lie in [-1, 1]; set `check_range` false for predictions.
AffectTrace read_annotations(std::istream& in, AffectDimension dimension,
                             double frame_period_s = kDefaultFramePeriod,
                             bool check_range = true, const std::string& source = "<stream>");
AffectTrace load_annotations(const std::filesystem::path& path, AffectDimension dimension,
                             double frame_period_s = kDefaultFramePeriod,
                             bool check_range = true);
void write_annotations(std::ostream& out, std::span<const double> values);
void save_annotations(const std::filesystem::path& path, std::span<const double> values);

enum class Split { Train, Dev };

struct ManifestEntry {
  std::string subject_id;
  Split split = Split::Train;
  std::map<std::string, std::filesystem::path> features;         // modality -> file
  std::map<AffectDimension, std::filesystem::path> annotations;  // dimension -> file
};

/// JSON dataset index. Paths are relative to the manifest's directory.
///   {"format": "affect-manifest/1", "frame_period_s": 0.04,
///    "subjects": [{"id": "...", "split": "train",
///                  "features": {"video": "features/x.csv"},
///                  "annotations": {"arousal": "annotations/x.csv"}}]}
struct DatasetManifest {
  std::filesystem::path root;
  double frame_period_s = kDefaultFramePeriod;
  std::vector<ManifestEntry> subjects;

  static DatasetManifest load(const std::filesystem::path& manifest_file);
  void save(const std::filesystem::path& manifest_file) const;
  std::string to_json_text() const;

  /// Splits non-empty and every referenced file present.
  void validate() const;
  DatasetSplit load_dataset() const;
};

struct ModalitySpec {
  std::string name;
  std::size_t dim = 1;
  double noise_sigma = 0.0;
  double invalid_fraction = 0.0;
  /// Column k copies arousal (k even) or valence (k odd) with no offset,
  /// instead of a random mix of both.
  bool identity_projection = false;
};

/// Seeded stand-in for a restricted affect corpus.
struct SynthSpec {
  std::size_t n_subjects_train = 9;
  std::size_t n_subjects_dev = 9;
  std::size_t frames_per_subject = 1500;
  double latent_bandwidth_hz = 0.1;
  double frame_period_s = kDefaultFramePeriod;
  std::size_t annotation_lag_frames = 0;
  std::vector<ModalitySpec> modalities{{"video", 8, 0.5, 0.0, false}};
  std::uint64_t seed = 1;

  void validate() const;

  /// {"subjects_train": 9, "subjects_dev": 9, "frames_per_subject": 1500,
  ///  "latent_bandwidth_hz": 0.1, "frame_period_s": 0.04,
  ///  "annotation_lag_frames": 0, "seed": 1,
  ///  "modalities": [{"name": "video", "dim": 8, "noise_sigma": 0.5,
  ///                  "invalid_fraction": 0, "identity_projection": false}]}
  /// Missing keys keep their defaults; unknown keys are rejected.
  static SynthSpec from_json_text(std::string_view text);
  std::string to_json_text() const;
};

/// Per subject and dimension, a latent trace (sum of sinusoids below the
/// bandwidth, squashed by tanh into (-1, 1)). Gold lags the latent by
/// `annotation_lag_frames`; each modality is a fixed linear projection of
/// the (arousal, valence) latents plus white noise, with a random set of
/// invalid frames (features zeroed). Uses Prng, so output is identical on
/// every platform for a given seed.
DatasetSplit generate_synthetic(const SynthSpec& spec);

/// Writes feature and annotation files plus manifest.json under `out_dir`.
DatasetManifest write_dataset(const DatasetSplit& data, const std::filesystem::path& out_dir);

}  // namespace affect
