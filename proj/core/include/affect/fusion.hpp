#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "affect/timeseries.hpp"

namespace affect {

enum class FusionScheme { None, Early, Late };

std::string_view to_string(FusionScheme scheme);
FusionScheme parse_fusion_scheme(std::string_view text);

struct FusionConfig {
  FusionScheme scheme = FusionScheme::Early;
  std::vector<std::string> modalities;  // concatenation / averaging order
  std::optional<std::vector<double>> late_weights;

  /// At least two modalities; weights non-negative, one per modality, summing
  /// to 1 within 1e-12.
  void validate() const;
};

/// Frame-wise concatenation in the given order. The fused mask is the AND of
/// the input masks; the modality label is the input labels joined with '+'.
FeatureStream early_fuse(std::span<const FeatureStream> streams);

/// Frame-wise weighted mean of per-modality predictions (uniform when no
/// weights are given).
std::vector<double> late_fuse(std::span<const std::vector<double>> predictions,
                              std::optional<std::span<const double>> weights = std::nullopt);

}  // namespace affect
