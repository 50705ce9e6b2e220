#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "affect/matrix.hpp"

namespace affect {

/// Default frame period: 25 frames per second.
inline constexpr double kDefaultFramePeriod = 0.04;

enum class AffectDimension { Arousal, Valence };

std::string_view to_string(AffectDimension dimension);
/// Accepts "arousal" / "valence" (case-sensitive). Throws DataError otherwise.
AffectDimension parse_dimension(std::string_view text);

/// Per-frame scalar annotation or prediction for one affect dimension.
struct AffectTrace {
  AffectDimension dimension = AffectDimension::Arousal;
  double frame_period_s = kDefaultFramePeriod;
  std::vector<double> values;
  std::string subject_id;

  std::size_t size() const noexcept { return values.size(); }

  /// Checks finiteness and frame period; gold traces must also lie in [-1, 1].
  void validate(bool is_gold) const;
};

/// Per-frame validity; false marks frames where the modality produced nothing
/// usable (e.g. no face detected).
struct FrameMask {
  std::vector<bool> valid;

  static FrameMask all_valid(std::size_t frames) { return {std::vector<bool>(frames, true)}; }

  std::size_t size() const noexcept { return valid.size(); }
  std::size_t valid_count() const noexcept;
  bool operator[](std::size_t i) const { return valid[i]; }

  friend bool operator==(const FrameMask&, const FrameMask&) = default;
};

/// Per-frame feature vectors for one modality.
struct FeatureStream {
  std::string modality;
  Matrix frames;  // rows = frames, cols = dim
  FrameMask mask;
  double frame_period_s = kDefaultFramePeriod;

  std::size_t dim() const noexcept { return frames.cols(); }
  std::size_t size() const noexcept { return frames.rows(); }

  void validate() const;
};

struct SubjectRecord {
  std::string subject_id;
  std::map<std::string, FeatureStream> streams;
  std::map<AffectDimension, AffectTrace> gold;

  /// Same frame period everywhere and, when `require_equal_length`, the same
  /// frame count for every stream and trace.
  void validate(bool require_equal_length) const;
};

struct DatasetSplit {
  std::vector<SubjectRecord> train;
  std::vector<SubjectRecord> dev;

  /// Both splits non-empty and subject ids disjoint.
  void validate() const;
};

/// Feature rows paired with regression targets.
struct TrainingSet {
  Matrix features;
  std::vector<double> targets;

  std::size_t size() const noexcept { return targets.size(); }
  void append(const TrainingSet& other);
};

/// Advances the gold trace by `delay_frames`: output[t] = gold[t + delay].
/// The last `delay_frames` frames are dropped; callers truncate feature
/// streams to the returned length (see truncate_stream).
AffectTrace shift_gold(const AffectTrace& gold, std::size_t delay_frames);

/// First `frames` frames of a stream.
FeatureStream truncate_stream(const FeatureStream& stream, std::size_t frames);

/// Valid rows of `stream` with the matching gold values, in frame order.
TrainingSet apply_mask_for_training(const FeatureStream& stream, const AffectTrace& gold);

/// Expands one prediction per valid frame into a full-length sequence.
/// Invalid frames hold the last valid prediction; leading invalid frames get
/// `fill_start`.
std::vector<double> impute_predictions(std::span<const double> pred, const FrameMask& mask,
                                       double fill_start = 0.0);

struct DelayScan {
  std::size_t best_delay = 0;
  std::vector<std::pair<std::size_t, double>> ccc_per_delay;  // in candidate order
};

/// CCC between shift_gold(gold, d) and the first size-d predictions, for each
/// candidate d. Ties resolve to the smallest delay.
DelayScan scan_delay(const AffectTrace& gold, std::span<const double> pred,
                     std::span<const std::size_t> candidate_delays);

}  // namespace affect
