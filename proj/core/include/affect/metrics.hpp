#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace affect {

/// CCC, MAE and Pearson correlation for one prediction/gold pair, together
/// with the population moments they are built from.
///
/// Degenerate inputs (a constant sequence) set `degenerate`: Pearson is then
/// 0, and CCC is 1 when both sequences are the same constant, else 0.
struct EvaluationReport {
  double ccc = 0.0;
  double mae = 0.0;
  double pearson = 0.0;
  double mean_pred = 0.0;
  double mean_gold = 0.0;
  double var_pred = 0.0;
  double var_gold = 0.0;
  std::size_t n = 0;
  bool degenerate = false;

  /// One `key=value` line per field, keys in the order
  /// ccc, mae, pearson, mean_pred, mean_gold, var_pred, var_gold, n.
  std::string to_record() const;
  static EvaluationReport from_record(std::string_view text);
};

/// Neumaier-compensated accumulator in extended precision.
class CompensatedSum {
 public:
  void add(long double x) {
    const long double t = sum_ + x;
    if ((sum_ >= 0 ? sum_ : -sum_) >= (x >= 0 ? x : -x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  long double value() const { return sum_ + comp_; }

 private:
  long double sum_ = 0.0L;
  long double comp_ = 0.0L;
};

double mae(std::span<const double> pred, std::span<const double> gold);
double pearson(std::span<const double> pred, std::span<const double> gold);
EvaluationReport ccc(std::span<const double> pred, std::span<const double> gold);

/// Mean of per-segment CCC values; segments are consecutive runs of the given
/// lengths (one per subject).
double mean_segment_ccc(std::span<const double> pred, std::span<const double> gold,
                        std::span<const std::size_t> segment_lengths);

}  // namespace affect
