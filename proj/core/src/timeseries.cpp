#include "affect/timeseries.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>

#include "affect/error.hpp"
#include "affect/metrics.hpp"

namespace affect {

std::string_view to_string(AffectDimension dimension) {
  return dimension == AffectDimension::Arousal ? "arousal" : "valence";
}

AffectDimension parse_dimension(std::string_view text) {
  if (text == "arousal") return AffectDimension::Arousal;
  if (text == "valence") return AffectDimension::Valence;
  throw DataError("unknown affect dimension '" + std::string(text) +
                  "' (expected arousal or valence)");
}

void AffectTrace::validate(bool is_gold) const {
  if (!(frame_period_s > 0.0) || !std::isfinite(frame_period_s)) {
    throw DataError("trace '" + subject_id + "': frame period must be positive");
  }
  for (std::size_t t = 0; t < values.size(); ++t) {
    const double v = values[t];
    if (!std::isfinite(v)) {
      throw DataError("trace '" + subject_id + "': non-finite value at frame " +
                      std::to_string(t));
    }
    if (is_gold && (v < -1.0 || v > 1.0)) {
      throw DataError("trace '" + subject_id + "': gold value out of [-1, 1] at frame " +
                      std::to_string(t));
    }
  }
}

std::size_t FrameMask::valid_count() const noexcept {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), true));
}

void FeatureStream::validate() const {
  if (dim() == 0) throw DataError("stream '" + modality + "': dimension must be positive");
  if (mask.size() != size()) {
    throw DataError("stream '" + modality + "': mask length " + std::to_string(mask.size()) +
                    " != frame count " + std::to_string(size()));
  }
  if (!(frame_period_s > 0.0)) {
    throw DataError("stream '" + modality + "': frame period must be positive");
  }
  for (std::size_t t = 0; t < size(); ++t) {
    if (!mask[t]) continue;
    for (double v : frames.row(t)) {
      if (!std::isfinite(v)) {
        throw DataError("stream '" + modality + "': non-finite value on valid frame " +
                        std::to_string(t));
      }
    }
  }
}

void SubjectRecord::validate(bool require_equal_length) const {
  std::optional<double> period;
  std::optional<std::size_t> length;
  auto check = [&](double p, std::size_t n, const std::string& what) {
    if (!period) period = p;
    if (!length) length = n;
    if (p != *period) {
      throw DataError("subject '" + subject_id + "': " + what + " has a different frame period");
    }
    if (require_equal_length && n != *length) {
      throw DataError("subject '" + subject_id + "': " + what + " has " + std::to_string(n) +
                      " frames, expected " + std::to_string(*length));
    }
  };
  for (const auto& [name, stream] : streams) {
    stream.validate();
    check(stream.frame_period_s, stream.size(), "stream '" + name + "'");
  }
  for (const auto& [dim, trace] : gold) {
    trace.validate(true);
    check(trace.frame_period_s, trace.size(), "gold " + std::string(to_string(dim)));
  }
}

void DatasetSplit::validate() const {
  if (train.empty() || dev.empty()) throw DataError("dataset split: train and dev must be non-empty");
  std::set<std::string> ids;
  for (const auto& s : train) ids.insert(s.subject_id);
  for (const auto& s : dev) {
    if (ids.contains(s.subject_id)) {
      throw DataError("dataset split: subject '" + s.subject_id + "' is in both train and dev");
    }
  }
}

void TrainingSet::append(const TrainingSet& other) {
  for (std::size_t r = 0; r < other.features.rows(); ++r) features.append_row(other.features.row(r));
  targets.insert(targets.end(), other.targets.begin(), other.targets.end());
}

AffectTrace shift_gold(const AffectTrace& gold, std::size_t delay_frames) {
  if (delay_frames >= gold.size()) {
    throw DataError("delay exceeds trace: delay " + std::to_string(delay_frames) +
                    " >= length " + std::to_string(gold.size()));
  }
  AffectTrace out{gold.dimension, gold.frame_period_s, {}, gold.subject_id};
  out.values.assign(gold.values.begin() + static_cast<std::ptrdiff_t>(delay_frames),
                    gold.values.end());
  return out;
}

FeatureStream truncate_stream(const FeatureStream& stream, std::size_t frames) {
  if (frames > stream.size()) {
    throw DataError("cannot truncate stream '" + stream.modality + "' of " +
                    std::to_string(stream.size()) + " frames to " + std::to_string(frames));
  }
  FeatureStream out;
  out.modality = stream.modality;
  out.frame_period_s = stream.frame_period_s;
  out.frames = stream.frames.head(frames);
  out.mask.valid.assign(stream.mask.valid.begin(),
                        stream.mask.valid.begin() + static_cast<std::ptrdiff_t>(frames));
  return out;
}

TrainingSet apply_mask_for_training(const FeatureStream& stream, const AffectTrace& gold) {
  if (stream.size() != gold.size()) {
    throw DataError("stream '" + stream.modality + "' has " + std::to_string(stream.size()) +
                    " frames but gold has " + std::to_string(gold.size()));
  }
  if (stream.mask.size() != stream.size()) throw DataError("mask length mismatch");
  TrainingSet out;
  out.features = Matrix(0, stream.dim());
  out.features.reserve_rows(stream.mask.valid_count());
  for (std::size_t t = 0; t < stream.size(); ++t) {
    if (!stream.mask[t]) continue;
    out.features.append_row(stream.frames.row(t));
    out.targets.push_back(gold.values[t]);
  }
  if (out.targets.empty()) throw DataError("empty training set: no valid frames in '" + stream.modality + "'");
  return out;
}

std::vector<double> impute_predictions(std::span<const double> pred, const FrameMask& mask,
                                       double fill_start) {
  if (pred.size() != mask.valid_count()) {
    throw DataError("impute: " + std::to_string(pred.size()) + " predictions for " +
                    std::to_string(mask.valid_count()) + " valid frames");
  }
  std::vector<double> out(mask.size());
  double last = fill_start;
  std::size_t next = 0;
  for (std::size_t t = 0; t < mask.size(); ++t) {
    if (mask[t]) last = pred[next++];
    out[t] = last;
  }
  return out;
}

DelayScan scan_delay(const AffectTrace& gold, std::span<const double> pred,
                     std::span<const std::size_t> candidate_delays) {
  if (candidate_delays.empty()) throw DataError("scan_delay: empty candidate list");
  if (pred.size() != gold.size()) {
    throw DataError("scan_delay: prediction length " + std::to_string(pred.size()) +
                    " != gold length " + std::to_string(gold.size()));
  }
  DelayScan scan;
  double best = -std::numeric_limits<double>::infinity();
  bool have_best = false;
  for (std::size_t d : candidate_delays) {
    const auto shifted = shift_gold(gold, d);
    const double score = ccc(pred.first(shifted.size()), shifted.values).ccc;
    scan.ccc_per_delay.emplace_back(d, score);
    if (!have_best || score > best || (score == best && d < scan.best_delay)) {
      best = score;
      scan.best_delay = d;
      have_best = true;
    }
  }
  return scan;
}

}  // namespace affect
