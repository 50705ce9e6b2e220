#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "affect/matrix.hpp"
#include "affect/timeseries.hpp"

namespace affect {

enum class KernelType { Linear, Rbf };

struct Kernel {
  KernelType type = KernelType::Linear;
  double gamma = 1.0;  // Rbf only

  static Kernel linear() { return {}; }
  static Kernel rbf(double gamma) { return {KernelType::Rbf, gamma}; }

  double operator()(std::span<const double> a, std::span<const double> b) const;

  /// "linear" or "rbf:<gamma>".
  std::string to_string() const;
  static Kernel parse(std::string_view text);

  friend bool operator==(const Kernel&, const Kernel&) = default;
};

struct SvrHyperParams {
  double c = 1.0;
  double epsilon = 0.1;
  Kernel kernel;

  void validate() const;
  friend bool operator==(const SvrHyperParams&, const SvrHyperParams&) = default;
};

/// Per-column affine map to zero mean and unit population variance.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;  // population std; constant columns store 1

  std::size_t dim() const noexcept { return mean.size(); }
  void transform_row(std::span<const double> in, std::span<double> out) const;
  Matrix transform(const Matrix& x) const;

  friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

Standardizer standardize_fit(const Matrix& x);

enum class Termination { Converged, MaxPassesExhausted };

struct SolverOptions {
  /// Stop once the maximal KKT violation falls below tol.
  double tol = 1e-3;
  /// Pair updates are capped at max_passes * n (n = training rows).
  std::size_t max_passes = 10000;
  /// Budget for cached kernel rows.
  std::size_t cache_mb = 256;
  /// Called after every pair update with the current dual objective.
  std::function<void(std::size_t iteration, double dual_objective)> on_iteration;
};

/// Solution of the epsilon-SVR dual
///   max  -1/2 b'Kb - eps * sum|b_i| + y'b   s.t. sum b_i = 0, |b_i| <= C
/// where b_i = alpha_i - alpha_i*.
struct DualSolution {
  std::vector<double> coefs;
  double bias = 0.0;
  double objective = 0.0;
  std::size_t iterations = 0;
  Termination termination = Termination::Converged;
};

/// SMO on rows that are already in kernel input space (no standardization).
DualSolution solve_dual(const Matrix& x, std::span<const double> y, const SvrHyperParams& hyper,
                        const SolverOptions& options = {});

/// Dual objective (maximization form, see DualSolution) for given coefficients.
double dual_objective(const Matrix& x, std::span<const double> y, std::span<const double> coefs,
                      const SvrHyperParams& hyper);

class SvrModel {
 public:
  SvrModel() = default;
  SvrModel(Standardizer standardizer, SvrHyperParams hyper, Matrix support_vectors,
           std::vector<double> dual_coefs, double bias);

  const Standardizer& standardizer() const noexcept { return standardizer_; }
  const SvrHyperParams& hyper() const noexcept { return hyper_; }
  const Matrix& support_vectors() const noexcept { return support_vectors_; }
  const std::vector<double>& dual_coefs() const noexcept { return dual_coefs_; }
  double bias() const noexcept { return bias_; }
  std::size_t input_dim() const noexcept { return standardizer_.dim(); }

  /// Training diagnostics; not part of the serialized form.
  Termination termination = Termination::Converged;
  std::size_t iterations = 0;
  double objective = 0.0;
  bool warning() const noexcept { return termination != Termination::Converged; }

  std::vector<double> predict(const Matrix& x) const;
  double predict_row(std::span<const double> raw_row) const;

  /// Versioned text form, every real at round-trip precision.
  void save(std::ostream& out) const;
  static SvrModel load(std::istream& in);
  std::string to_text() const;
  static SvrModel from_text(const std::string& text);

  friend bool operator==(const SvrModel& a, const SvrModel& b) {
    return a.standardizer_ == b.standardizer_ && a.hyper_ == b.hyper_ &&
           a.support_vectors_ == b.support_vectors_ && a.dual_coefs_ == b.dual_coefs_ &&
           a.bias_ == b.bias_;
  }

 private:
  Standardizer standardizer_;
  SvrHyperParams hyper_;
  Matrix support_vectors_;  // standardized
  std::vector<double> dual_coefs_;
  double bias_ = 0.0;
  std::vector<double> linear_weights_;  // sum_i coef_i * sv_i, linear kernel only
};

/// Standardizes x, solves the dual, and keeps rows with non-zero coefficient.
SvrModel train_svr(const Matrix& x, std::span<const double> y, const SvrHyperParams& hyper,
                   const SolverOptions& options = {});

std::vector<double> predict(const SvrModel& model, const Matrix& x);

/// Keeps at most max_rows rows, chosen uniformly at random with a seeded
/// partial shuffle; the chosen rows stay in their original order.
TrainingSet subsample_rows(const TrainingSet& data, std::size_t max_rows, std::uint64_t seed);

struct GridSpec {
  std::vector<double> c_values;
  std::vector<double> epsilon_values;
  std::vector<Kernel> kernels{Kernel::linear()};

  /// C in {1e-3 .. 1e2} and epsilon in {1e-4 .. 1e-1}, log-spaced, linear kernel.
  static GridSpec defaults();
  void validate() const;
  std::vector<SvrHyperParams> cells() const;
};

enum class Objective { Ccc, Pearson, Mae };

std::string_view to_string(Objective objective);
Objective parse_objective(std::string_view text);

struct GridCell {
  SvrHyperParams hyper;
  double score = 0.0;
  std::size_t support_count = 0;
  bool converged = true;
  std::optional<std::string> error;
};

struct GridResult {
  std::size_t best_index = 0;
  SvrHyperParams best;
  SvrModel best_model;
  std::vector<GridCell> table;  // in GridSpec::cells() order
};

/// Trains one model per grid cell and scores it on `dev`. Objective CCC and
/// Pearson are maximized, MAE minimized; ties go to smaller C, then smaller
/// epsilon. Cells run on up to `jobs` threads with identical results for any
/// job count.
GridResult grid_search(const GridSpec& grid, const TrainingSet& train, const TrainingSet& dev,
                       Objective objective = Objective::Ccc, const SolverOptions& options = {},
                       std::size_t jobs = 1);

}  // namespace affect
