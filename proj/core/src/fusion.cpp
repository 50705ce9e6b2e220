#include "affect/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "affect/error.hpp"
#include "affect/metrics.hpp"

namespace affect {
namespace {

void check_weights(std::span<const double> weights, std::size_t count) {
  if (weights.size() != count) {
    throw DataError("fusion: " + std::to_string(weights.size()) + " weights for " +
                    std::to_string(count) + " modalities");
  }
  CompensatedSum total;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw DataError("fusion: weights must be non-negative");
    total.add(w);
  }
  if (std::fabs(static_cast<double>(total.value()) - 1.0) > 1e-12) {
    throw DataError("fusion: weights must sum to 1");
  }
}

}  // namespace

std::string_view to_string(FusionScheme scheme) {
  switch (scheme) {
    case FusionScheme::None: return "none";
    case FusionScheme::Early: return "early";
    case FusionScheme::Late: return "late";
  }
  return "none";
}

FusionScheme parse_fusion_scheme(std::string_view text) {
  if (text == "none") return FusionScheme::None;
  if (text == "early") return FusionScheme::Early;
  if (text == "late") return FusionScheme::Late;
  throw DataError("unknown fusion scheme '" + std::string(text) + "' (expected none, early, late)");
}

void FusionConfig::validate() const {
  if (modalities.size() < 2) throw DataError("fusion: at least two modalities are required");
  if (late_weights) check_weights(*late_weights, modalities.size());
}

FeatureStream early_fuse(std::span<const FeatureStream> streams) {
  if (streams.empty()) throw DataError("early_fuse: no streams");
  const std::size_t frames = streams.front().size();
  const double period = streams.front().frame_period_s;
  std::size_t dim = 0;
  FeatureStream out;
  for (const auto& s : streams) {
    if (s.size() != frames) {
      throw DataError("early_fuse: stream '" + s.modality + "' has " + std::to_string(s.size()) +
                      " frames, expected " + std::to_string(frames));
    }
    if (s.frame_period_s != period) {
      throw DataError("early_fuse: stream '" + s.modality + "' has a different frame period");
    }
    dim += s.dim();
    out.modality += (out.modality.empty() ? "" : "+") + s.modality;
  }
  out.frame_period_s = period;
  out.frames = Matrix(frames, dim);
  out.mask = FrameMask::all_valid(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    auto dst = out.frames.row(t);
    std::size_t offset = 0;
    bool valid = true;
    for (const auto& s : streams) {
      const auto src = s.frames.row(t);
      std::copy(src.begin(), src.end(), dst.begin() + static_cast<std::ptrdiff_t>(offset));
      offset += src.size();
      valid = valid && s.mask[t];
    }
    out.mask.valid[t] = valid;
  }
  return out;
}

std::vector<double> late_fuse(std::span<const std::vector<double>> predictions,
                              std::optional<std::span<const double>> weights) {
  if (predictions.empty()) throw DataError("late_fuse: no predictions");
  const std::size_t n = predictions.front().size();
  for (const auto& p : predictions) {
    if (p.size() != n) {
      throw DataError("late_fuse: length mismatch (" + std::to_string(p.size()) + " vs " +
                      std::to_string(n) + ")");
    }
  }
  if (weights) check_weights(*weights, predictions.size());
  const auto count = static_cast<double>(predictions.size());

  std::vector<double> out(n);
  for (std::size_t t = 0; t < n; ++t) {
    double acc = 0.0;
    double lo = predictions.front()[t];
    double hi = lo;
    for (std::size_t m = 0; m < predictions.size(); ++m) {
      const double v = predictions[m][t];
      acc += weights ? (*weights)[m] * v : v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    // A convex combination; clamp away rounding excursions past the inputs.
    out[t] = std::clamp(weights ? acc : acc / count, lo, hi);
  }
  return out;
}

}  // namespace affect
