#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace affect {

inline constexpr double kMinMedianWindow = 0.4;
inline constexpr double kMaxMedianWindow = 8.0;

/// How the scaling factor is fitted on training predictions.
enum class BetaMode {
  StdRatio,   // std(gold) / std(pred)
  MeanRatio,  // mean(gold) / mean(pred)
};

/// How predictions are re-centred.
enum class CenterMode {
  SubtractGoldMean,  // y' = y - mean(gold_train)
  BiasCorrection,    // y' = y + (mean(gold_train) - mean(pred_train))
};

enum class ChainStep { Median, Scale, Center };

std::string_view to_string(BetaMode mode);
std::string_view to_string(CenterMode mode);
std::string_view to_string(ChainStep step);
BetaMode parse_beta_mode(std::string_view text);
CenterMode parse_center_mode(std::string_view text);

/// Odd frame count for a median window: round(window_s / period), bumped to
/// the next odd number when even.
std::size_t median_window_frames(double window_s, double frame_period_s);

/// Sliding median. Near the edges the window shrinks symmetrically so it
/// stays centred on the frame and never reads outside the sequence.
std::vector<double> median_filter(std::span<const double> pred, double window_s,
                                  double frame_period_s, bool allow_any_window = false);

double fit_beta(std::span<const double> gold_train, std::span<const double> pred_train,
                BetaMode mode = BetaMode::StdRatio);

std::vector<double> apply_scaling(std::span<const double> pred, double beta);

std::vector<double> apply_centering(std::span<const double> pred, double gold_mean,
                                    CenterMode mode = CenterMode::BiasCorrection,
                                    double pred_mean = 0.0);

/// A fitted post-processing chain. Steps run in `steps` order; parameters of
/// disabled steps are empty.
struct PostProcessParams {
  std::optional<double> median_window_s;
  std::optional<double> beta;
  std::optional<double> gold_mean_train;
  std::optional<double> pred_mean_train;
  BetaMode beta_mode = BetaMode::StdRatio;
  CenterMode center_mode = CenterMode::BiasCorrection;
  std::vector<ChainStep> steps;

  std::size_t enabled_steps() const noexcept { return steps.size(); }

  /// Applies the chain; the median filter runs independently inside each
  /// segment (one per subject). Empty `segments` means one segment.
  std::vector<double> apply(std::span<const double> pred, double frame_period_s,
                            std::span<const std::size_t> segments = {}) const;

  /// Output after each step, in `steps` order.
  std::vector<std::vector<double>> apply_stages(std::span<const double> pred,
                                                double frame_period_s,
                                                std::span<const std::size_t> segments = {}) const;

  /// `key=value` lines; round-trips exactly, including step order.
  std::string to_text() const;
  static PostProcessParams from_text(std::string_view text);

  friend bool operator==(const PostProcessParams&, const PostProcessParams&) = default;
};

/// Which steps to enable; fitted values come from fit_chain.
struct ChainChoice {
  std::optional<double> median_window_s;
  bool scale = false;
  bool center = false;
  BetaMode beta_mode = BetaMode::StdRatio;
  CenterMode center_mode = CenterMode::BiasCorrection;
};

/// Fits beta and the means on training data only. Order is median, scale,
/// centre. pred_mean_train is the mean of the (scaled, when enabled) training
/// predictions, so centring zeroes the training mean gap.
PostProcessParams fit_chain(const ChainChoice& choice, std::span<const double> pred_train,
                            std::span<const double> gold_train);

struct ChainSearchSpace {
  std::vector<double> windows_s{0.4, 0.8, 1.6, 2.0, 2.8, 4.0, 8.0};
  std::vector<BetaMode> beta_modes{BetaMode::StdRatio, BetaMode::MeanRatio};
  std::vector<CenterMode> center_modes{CenterMode::BiasCorrection};
  /// Score by mean per-segment CCC instead of CCC over the concatenation.
  bool segment_average = false;

  /// (|windows| + 1) x 2 x 2 x |beta_modes| x |center_modes|.
  std::size_t size() const {
    return (windows_s.size() + 1) * 4 * beta_modes.size() * center_modes.size();
  }
};

struct ChainTrial {
  ChainChoice choice;
  double dev_ccc = 0.0;
  std::optional<std::string> error;
};

struct ChainTuning {
  PostProcessParams params;
  std::size_t best_index = 0;
  double empty_chain_ccc = 0.0;
  std::vector<ChainTrial> table;
};

/// Exhaustive search over the space, fitting on train and scoring on dev.
/// Scores within 1e-12 of the best are ties, resolved by fewer enabled steps,
/// then the smaller window, then search order.
ChainTuning tune_chain(std::span<const double> raw_dev_pred, std::span<const double> gold_dev,
                       std::span<const double> raw_train_pred,
                       std::span<const double> gold_train, double frame_period_s,
                       const ChainSearchSpace& space = {},
                       std::span<const std::size_t> dev_segments = {}, std::size_t jobs = 1);

}  // namespace affect
