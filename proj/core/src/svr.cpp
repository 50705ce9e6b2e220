#include "affect/svr.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <list>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "affect/error.hpp"
#include "affect/format.hpp"
#include "affect/metrics.hpp"
#include "affect/parallel.hpp"
#include "affect/prng.hpp"

namespace affect {

// ---------------------------------------------------------------------------
// Kernel / hyperparameters

double Kernel::operator()(std::span<const double> a, std::span<const double> b) const {
  if (type == KernelType::Linear) {
    double dot = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) dot += a[k] * b[k];
    return dot;
  }
  double dist2 = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    dist2 += d * d;
  }
  return std::exp(-gamma * dist2);
}

std::string Kernel::to_string() const {
  return type == KernelType::Linear ? "linear" : "rbf:" + format_double(gamma);
}

Kernel Kernel::parse(std::string_view text) {
  if (text == "linear") return linear();
  if (text.starts_with("rbf:")) {
    double g = 0.0;
    if (parse_double(text.substr(4), g) && g > 0.0) return rbf(g);
  }
  throw DataError("invalid kernel '" + std::string(text) + "' (expected linear or rbf:<gamma>)");
}

void SvrHyperParams::validate() const {
  if (!(c > 0.0) || !std::isfinite(c)) throw DataError("SVR: C must be positive");
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw DataError("SVR: epsilon must be >= 0");
  if (kernel.type == KernelType::Rbf && !(kernel.gamma > 0.0)) {
    throw DataError("SVR: rbf gamma must be positive");
  }
}

// ---------------------------------------------------------------------------
// Standardizer

void Standardizer::transform_row(std::span<const double> in, std::span<double> out) const {
  for (std::size_t k = 0; k < in.size(); ++k) out[k] = (in[k] - mean[k]) / scale[k];
}

Matrix Standardizer::transform(const Matrix& x) const {
  if (x.cols() != dim()) {
    throw DataError("standardizer expects " + std::to_string(dim()) + " columns, got " +
                    std::to_string(x.cols()));
  }
  Matrix out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) transform_row(x.row(r), out.row(r));
  return out;
}

Standardizer standardize_fit(const Matrix& x) {
  if (x.rows() < 2 || x.cols() == 0) {
    throw DataError("standardize_fit: need at least 2 rows and 1 column");
  }
  Standardizer s;
  s.mean.resize(x.cols());
  s.scale.resize(x.cols());
  const auto n = static_cast<long double>(x.rows());
  for (std::size_t c = 0; c < x.cols(); ++c) {
    bool constant = true;
    CompensatedSum sum;
    for (std::size_t r = 0; r < x.rows(); ++r) {
      sum.add(x(r, c));
      constant = constant && x(r, c) == x(0, c);
    }
    if (constant) {
      s.mean[c] = x(0, c);
      s.scale[c] = 1.0;
      continue;
    }
    const long double mean = sum.value() / n;
    CompensatedSum var;
    for (std::size_t r = 0; r < x.rows(); ++r) {
      const long double d = x(r, c) - mean;
      var.add(d * d);
    }
    const double std_dev = static_cast<double>(std::sqrt(var.value() / n));
    s.mean[c] = static_cast<double>(mean);
    s.scale[c] = std_dev > 0.0 ? std_dev : 1.0;
  }
  return s;
}

// ---------------------------------------------------------------------------
// SMO

namespace {

constexpr double kTau = 1e-12;

/// LRU cache of kernel rows K(i, .) over the training points.
class KernelRowCache {
 public:
  KernelRowCache(const Matrix& x, const Kernel& kernel, std::size_t budget_mb)
      : x_(x), kernel_(kernel) {
    const std::size_t row_bytes = std::max<std::size_t>(1, x.rows()) * sizeof(double);
    capacity_ = std::max<std::size_t>(2, budget_mb * 1024 * 1024 / row_bytes);
    diag_.resize(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) diag_[i] = kernel_(x.row(i), x.row(i));
  }

  double diag(std::size_t i) const { return diag_[i]; }

  /// Valid until `capacity - 1` further distinct rows have been requested.
  std::span<const double> row(std::size_t i) {
    if (auto it = index_.find(i); it != index_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second);
      return it->second->values;
    }
    if (lru_.size() >= capacity_) {
      index_.erase(lru_.back().key);
      lru_.splice(lru_.begin(), lru_, std::prev(lru_.end()));
      lru_.front().key = i;
    } else {
      lru_.emplace_front(Entry{i, std::vector<double>(x_.rows())});
    }
    auto& values = lru_.front().values;
    const auto xi = x_.row(i);
    for (std::size_t j = 0; j < x_.rows(); ++j) values[j] = kernel_(xi, x_.row(j));
    index_[i] = lru_.begin();
    return values;
  }

 private:
  struct Entry {
    std::size_t key;
    std::vector<double> values;
  };
  const Matrix& x_;
  Kernel kernel_;
  std::size_t capacity_ = 2;
  std::vector<double> diag_;
  std::list<Entry> lru_;
  std::unordered_map<std::size_t, std::list<Entry>::iterator> index_;
};

}  // namespace

// The dual is solved in the doubled form over 2n variables a_t in [0, C]:
//   min 1/2 a'Qa + p'a   s.t. s'a = 0
// with s_t = +1 (t < n), -1 (t >= n), p_t = eps - y_t or eps + y_{t-n}, and
// Q_tu = s_t s_u K(t mod n, u mod n). Coefficients are b_i = a_i - a_{i+n}.
// Working pairs: i is the maximal KKT violator, j the partner in the
// violating set with the largest second-order decrease.
DualSolution solve_dual(const Matrix& x, std::span<const double> y, const SvrHyperParams& hyper,
                        const SolverOptions& options) {
  hyper.validate();
  const std::size_t n = x.rows();
  if (n < 2 || y.size() != n) {
    throw DataError("solve_dual: need >= 2 rows with one target each (rows=" + std::to_string(n) +
                    ", targets=" + std::to_string(y.size()) + ")");
  }
  if (!(options.tol > 0.0)) throw DataError("solve_dual: tol must be positive");
  for (double v : x.data()) {
    if (!std::isfinite(v)) throw DataError("solve_dual: non-finite feature value");
  }
  for (double v : y) {
    if (!std::isfinite(v)) throw DataError("solve_dual: non-finite target value");
  }

  const std::size_t m = 2 * n;
  const double c = hyper.c;
  const double eps = hyper.epsilon;
  KernelRowCache cache(x, hyper.kernel, options.cache_mb);

  auto sign = [n](std::size_t t) { return t < n ? 1.0 : -1.0; };
  auto point = [n](std::size_t t) { return t < n ? t : t - n; };

  std::vector<double> alpha(m, 0.0);
  std::vector<double> p(m);
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = eps - y[i];
    p[i + n] = eps + y[i];
  }
  std::vector<double> grad = p;

  auto at_upper = [&](std::size_t t) { return alpha[t] >= c; };
  auto at_lower = [&](std::size_t t) { return alpha[t] <= 0.0; };

  const std::size_t max_iter =
      options.max_passes > std::numeric_limits<std::size_t>::max() / n
          ? std::numeric_limits<std::size_t>::max()
          : options.max_passes * n;

  DualSolution sol;
  sol.termination = Termination::MaxPassesExhausted;
  std::size_t iter = 0;
  // Selection and gradient loops walk the two halves separately: t < n has
  // sign +1, t >= n has sign -1, and both halves share kernel row entries.
  while (iter < max_iter) {
    // Maximal violator over the "up" set.
    double g_max = -std::numeric_limits<double>::infinity();
    std::size_t i = m;
    for (std::size_t t = 0; t < n; ++t) {
      if (alpha[t] < c && -grad[t] > g_max) {
        g_max = -grad[t];
        i = t;
      }
    }
    for (std::size_t t = n; t < m; ++t) {
      if (alpha[t] > 0.0 && grad[t] > g_max) {
        g_max = grad[t];
        i = t;
      }
    }
    if (i == m) {
      sol.termination = Termination::Converged;
      break;
    }

    const auto k_i = cache.row(point(i));
    const double kii = cache.diag(point(i));
    double g_min = std::numeric_limits<double>::infinity();
    double best_gain = std::numeric_limits<double>::infinity();
    std::size_t j = m;
    auto consider = [&](std::size_t t, double v, std::size_t pt) {
      g_min = std::min(g_min, v);
      const double b = g_max - v;
      if (b <= 0.0) return;
      double a = kii + cache.diag(pt) - 2.0 * k_i[pt];
      if (a <= 0.0) a = kTau;
      const double gain = -(b * b) / a;
      if (gain < best_gain) {
        best_gain = gain;
        j = t;
      }
    };
    for (std::size_t t = 0; t < n; ++t) {
      if (alpha[t] > 0.0) consider(t, -grad[t], t);
    }
    for (std::size_t t = n; t < m; ++t) {
      if (alpha[t] < c) consider(t, grad[t], t - n);
    }
    if (g_max - g_min < options.tol || j == m) {
      sol.termination = Termination::Converged;
      break;
    }

    // Two-variable analytic step with box clipping.
    const auto k_j = cache.row(point(j));
    const auto k_i_again = cache.row(point(i));
    const double kjj = cache.diag(point(j));
    const double kij = k_i_again[point(j)];
    const double old_i = alpha[i];
    const double old_j = alpha[j];
    if (sign(i) != sign(j)) {
      double quad = kii + kjj - 2.0 * kij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) {
          alpha[j] = 0.0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = -diff;
      }
      if (diff > 0.0) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = c - diff;
        }
      } else if (alpha[j] > c) {
        alpha[j] = c;
        alpha[i] = c + diff;
      }
    } else {
      double quad = kii + kjj - 2.0 * kij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = sum - c;
        }
      } else if (alpha[j] < 0.0) {
        alpha[j] = 0.0;
        alpha[i] = sum;
      }
      if (sum > c) {
        if (alpha[j] > c) {
          alpha[j] = c;
          alpha[i] = sum - c;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = sum;
      }
    }

    const double w_i = sign(i) * (alpha[i] - old_i);
    const double w_j = sign(j) * (alpha[j] - old_j);
    const double* ki = k_i_again.data();
    const double* kj = k_j.data();
    double* g_up = grad.data();
    double* g_dn = grad.data() + n;
    for (std::size_t q = 0; q < n; ++q) {
      const double d = w_i * ki[q] + w_j * kj[q];
      g_up[q] += d;
      g_dn[q] -= d;
    }
    ++iter;

    if (options.on_iteration) {
      long double f = 0.0L;
      for (std::size_t t = 0; t < m; ++t) f += alpha[t] * (grad[t] + p[t]);
      options.on_iteration(iter, static_cast<double>(-0.5L * f));
    }
  }
  sol.iterations = iter;

  // Bias: average over free variables, else midpoint of the feasible interval.
  double upper = std::numeric_limits<double>::infinity();
  double lower = -std::numeric_limits<double>::infinity();
  long double free_sum = 0.0L;
  std::size_t free_count = 0;
  for (std::size_t t = 0; t < m; ++t) {
    const double yg = sign(t) * grad[t];
    if (at_upper(t)) {
      if (sign(t) < 0) upper = std::min(upper, yg);
      else lower = std::max(lower, yg);
    } else if (at_lower(t)) {
      if (sign(t) > 0) upper = std::min(upper, yg);
      else lower = std::max(lower, yg);
    } else {
      free_sum += yg;
      ++free_count;
    }
  }
  const double rho = free_count > 0 ? static_cast<double>(free_sum / free_count)
                                     : 0.5 * (upper + lower);
  sol.bias = -rho;

  sol.coefs.resize(n);
  for (std::size_t k = 0; k < n; ++k) sol.coefs[k] = alpha[k] - alpha[k + n];
  sol.objective = dual_objective(x, y, sol.coefs, hyper);
  return sol;
}

double dual_objective(const Matrix& x, std::span<const double> y, std::span<const double> coefs,
                      const SvrHyperParams& hyper) {
  const std::size_t n = x.rows();
  long double quad = 0.0L;
  long double linear = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    if (coefs[i] == 0.0) continue;
    long double row = 0.0L;
    for (std::size_t j = 0; j < n; ++j) {
      if (coefs[j] != 0.0) row += coefs[j] * hyper.kernel(x.row(i), x.row(j));
    }
    quad += coefs[i] * row;
    linear += y[i] * coefs[i] - hyper.epsilon * std::fabs(coefs[i]);
  }
  return static_cast<double>(-0.5L * quad + linear);
}

// ---------------------------------------------------------------------------
// Model

SvrModel::SvrModel(Standardizer standardizer, SvrHyperParams hyper, Matrix support_vectors,
                   std::vector<double> dual_coefs, double bias)
    : standardizer_(std::move(standardizer)),
      hyper_(hyper),
      support_vectors_(std::move(support_vectors)),
      dual_coefs_(std::move(dual_coefs)),
      bias_(bias) {
  if (support_vectors_.rows() != dual_coefs_.size()) {
    throw DataError("SVR model: support vector count does not match coefficient count");
  }
  if (support_vectors_.rows() > 0 && support_vectors_.cols() != standardizer_.dim()) {
    throw DataError("SVR model: support vector width does not match standardizer");
  }
  if (hyper_.kernel.type == KernelType::Linear) {
    linear_weights_.assign(standardizer_.dim(), 0.0);
    for (std::size_t s = 0; s < support_vectors_.rows(); ++s) {
      const auto sv = support_vectors_.row(s);
      for (std::size_t k = 0; k < sv.size(); ++k) linear_weights_[k] += dual_coefs_[s] * sv[k];
    }
  }
}

double SvrModel::predict_row(std::span<const double> raw_row) const {
  if (raw_row.size() != input_dim()) {
    throw DataError("SVR predict: expected " + std::to_string(input_dim()) + " features, got " +
                    std::to_string(raw_row.size()));
  }
  std::vector<double> z(raw_row.size());
  standardizer_.transform_row(raw_row, z);
  double out = bias_;
  if (hyper_.kernel.type == KernelType::Linear) {
    for (std::size_t k = 0; k < z.size(); ++k) out += linear_weights_[k] * z[k];
    return out;
  }
  for (std::size_t s = 0; s < support_vectors_.rows(); ++s) {
    out += dual_coefs_[s] * hyper_.kernel(support_vectors_.row(s), z);
  }
  return out;
}

std::vector<double> SvrModel::predict(const Matrix& x) const {
  if (x.cols() != input_dim()) {
    throw DataError("SVR predict: expected " + std::to_string(input_dim()) + " features, got " +
                    std::to_string(x.cols()));
  }
  std::vector<double> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) out[r] = predict_row(x.row(r));
  return out;
}

std::vector<double> predict(const SvrModel& model, const Matrix& x) { return model.predict(x); }

// Text layout (version 1):
//   affect-svr-model 1
//   kernel <linear|rbf:gamma>
//   c <real>
//   epsilon <real>
//   bias <real>
//   dim <d>
//   mean <d reals>
//   scale <d reals>
//   support <m>
//   <coef> <d reals>      (m lines)
void SvrModel::save(std::ostream& out) const {
  auto reals = [&](std::span<const double> v) {
    for (std::size_t k = 0; k < v.size(); ++k) out << (k ? " " : "") << format_double(v[k]);
  };
  out << "affect-svr-model 1\n";
  out << "kernel " << hyper_.kernel.to_string() << "\n";
  out << "c " << format_double(hyper_.c) << "\n";
  out << "epsilon " << format_double(hyper_.epsilon) << "\n";
  out << "bias " << format_double(bias_) << "\n";
  out << "dim " << standardizer_.dim() << "\n";
  out << "mean ";
  reals(standardizer_.mean);
  out << "\nscale ";
  reals(standardizer_.scale);
  out << "\nsupport " << support_vectors_.rows() << "\n";
  for (std::size_t s = 0; s < support_vectors_.rows(); ++s) {
    out << format_double(dual_coefs_[s]);
    for (double v : support_vectors_.row(s)) out << ' ' << format_double(v);
    out << '\n';
  }
}

SvrModel SvrModel::load(std::istream& in) {
  std::size_t line_no = 0;
  std::string line;
  auto next_line = [&]() -> std::vector<std::string_view> {
    if (!std::getline(in, line)) {
      throw DataError("SVR model: unexpected end of file after line " + std::to_string(line_no));
    }
    ++line_no;
    auto fields = split(trim(line), ' ');
    std::erase_if(fields, [](std::string_view f) { return f.empty(); });
    return fields;
  };
  auto fail = [&](const std::string& what) {
    return DataError("SVR model line " + std::to_string(line_no) + ": " + what);
  };
  auto real = [&](std::string_view s) {
    double v = 0.0;
    if (!parse_double(s, v)) throw fail("invalid number '" + std::string(s) + "'");
    return v;
  };
  auto keyed = [&](std::string_view key) {
    auto f = next_line();
    if (f.empty() || f[0] != key) throw fail("expected '" + std::string(key) + "'");
    return f;
  };

  auto header = next_line();
  if (header.size() != 2 || header[0] != "affect-svr-model" || header[1] != "1") {
    throw fail("unsupported header");
  }
  SvrHyperParams hyper;
  auto f = keyed("kernel");
  if (f.size() != 2) throw fail("kernel takes one value");
  hyper.kernel = Kernel::parse(f[1]);
  f = keyed("c");
  if (f.size() != 2) throw fail("c takes one value");
  hyper.c = real(f[1]);
  f = keyed("epsilon");
  if (f.size() != 2) throw fail("epsilon takes one value");
  hyper.epsilon = real(f[1]);
  f = keyed("bias");
  if (f.size() != 2) throw fail("bias takes one value");
  const double bias = real(f[1]);
  f = keyed("dim");
  std::uint64_t dim = 0;
  if (f.size() != 2 || !parse_uint(f[1], dim) || dim == 0) throw fail("invalid dim");

  Standardizer st;
  f = keyed("mean");
  if (f.size() != dim + 1) throw fail("mean needs " + std::to_string(dim) + " values");
  for (std::size_t k = 1; k < f.size(); ++k) st.mean.push_back(real(f[k]));
  f = keyed("scale");
  if (f.size() != dim + 1) throw fail("scale needs " + std::to_string(dim) + " values");
  for (std::size_t k = 1; k < f.size(); ++k) st.scale.push_back(real(f[k]));

  f = keyed("support");
  std::uint64_t count = 0;
  if (f.size() != 2 || !parse_uint(f[1], count)) throw fail("invalid support count");
  Matrix sv(0, dim);
  std::vector<double> coefs;
  std::vector<double> row(dim);
  for (std::uint64_t s = 0; s < count; ++s) {
    f = next_line();
    if (f.size() != dim + 1) throw fail("support row needs " + std::to_string(dim + 1) + " values");
    coefs.push_back(real(f[0]));
    for (std::size_t k = 0; k < dim; ++k) row[k] = real(f[k + 1]);
    sv.append_row(row);
  }
  hyper.validate();
  return SvrModel(std::move(st), hyper, std::move(sv), std::move(coefs), bias);
}

std::string SvrModel::to_text() const {
  std::ostringstream out;
  save(out);
  return out.str();
}

SvrModel SvrModel::from_text(const std::string& text) {
  std::istringstream in(text);
  return load(in);
}

SvrModel train_svr(const Matrix& x, std::span<const double> y, const SvrHyperParams& hyper,
                   const SolverOptions& options) {
  hyper.validate();
  if (x.rows() != y.size()) {
    throw DataError("train_svr: " + std::to_string(x.rows()) + " rows but " +
                    std::to_string(y.size()) + " targets");
  }
  if (x.rows() < 2) throw DataError("train_svr: need at least 2 rows");
  for (double v : x.data()) {
    if (!std::isfinite(v)) throw DataError("train_svr: non-finite feature value");
  }
  auto standardizer = standardize_fit(x);
  const Matrix z = standardizer.transform(x);
  const DualSolution sol = solve_dual(z, y, hyper, options);

  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < sol.coefs.size(); ++i) {
    if (sol.coefs[i] != 0.0) keep.push_back(i);
  }
  std::vector<double> coefs;
  coefs.reserve(keep.size());
  for (auto i : keep) coefs.push_back(sol.coefs[i]);
  Matrix sv = z.select_rows(keep);
  if (keep.empty()) sv = Matrix(0, z.cols());

  SvrModel model(std::move(standardizer), hyper, std::move(sv), std::move(coefs), sol.bias);
  model.termination = sol.termination;
  model.iterations = sol.iterations;
  model.objective = sol.objective;
  return model;
}

TrainingSet subsample_rows(const TrainingSet& data, std::size_t max_rows, std::uint64_t seed) {
  if (max_rows == 0 || data.size() <= max_rows) return data;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Prng rng(seed);
  for (std::size_t k = 0; k < max_rows; ++k) {
    const std::size_t pick = k + rng.index(order.size() - k);
    std::swap(order[k], order[pick]);
  }
  order.resize(max_rows);
  std::sort(order.begin(), order.end());
  TrainingSet out;
  out.features = data.features.select_rows(order);
  out.targets.reserve(max_rows);
  for (auto i : order) out.targets.push_back(data.targets[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Grid search

GridSpec GridSpec::defaults() {
  GridSpec g;
  g.c_values = {1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0};
  g.epsilon_values = {1e-4, 1e-3, 1e-2, 1e-1};
  return g;
}

void GridSpec::validate() const {
  if (c_values.empty() || epsilon_values.empty() || kernels.empty()) {
    throw DataError("grid: C, epsilon and kernel lists must be non-empty");
  }
  for (const auto& h : cells()) h.validate();
}

std::vector<SvrHyperParams> GridSpec::cells() const {
  std::vector<SvrHyperParams> out;
  for (const auto& k : kernels) {
    for (double c : c_values) {
      for (double e : epsilon_values) out.push_back({c, e, k});
    }
  }
  return out;
}

std::string_view to_string(Objective objective) {
  switch (objective) {
    case Objective::Ccc: return "ccc";
    case Objective::Pearson: return "pearson";
    case Objective::Mae: return "mae";
  }
  return "ccc";
}

Objective parse_objective(std::string_view text) {
  if (text == "ccc") return Objective::Ccc;
  if (text == "pearson") return Objective::Pearson;
  if (text == "mae") return Objective::Mae;
  throw DataError("unknown objective '" + std::string(text) + "'");
}

GridResult grid_search(const GridSpec& grid, const TrainingSet& train, const TrainingSet& dev,
                       Objective objective, const SolverOptions& options, std::size_t jobs) {
  grid.validate();
  if (dev.size() < 2) throw DataError("grid_search: dev set needs at least 2 rows");
  const auto cells = grid.cells();
  std::vector<GridCell> table(cells.size());
  std::vector<std::optional<SvrModel>> models(cells.size());

  parallel_for(cells.size(), jobs, [&](std::size_t k) {
    GridCell& cell = table[k];
    cell.hyper = cells[k];
    try {
      SvrModel model = train_svr(train.features, train.targets, cells[k], options);
      const auto pred = model.predict(dev.features);
      switch (objective) {
        case Objective::Ccc: cell.score = ccc(pred, dev.targets).ccc; break;
        case Objective::Pearson: cell.score = pearson(pred, dev.targets); break;
        case Objective::Mae: cell.score = mae(pred, dev.targets); break;
      }
      cell.support_count = model.dual_coefs().size();
      cell.converged = !model.warning();
      models[k] = std::move(model);
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
  });

  const bool minimize = objective == Objective::Mae;
  std::optional<std::size_t> best;
  for (std::size_t k = 0; k < table.size(); ++k) {
    if (table[k].error || std::isnan(table[k].score)) continue;
    if (!best) {
      best = k;
      continue;
    }
    const auto& a = table[k];
    const auto& b = table[*best];
    const bool better = minimize ? a.score < b.score : a.score > b.score;
    const bool tie = a.score == b.score;
    const bool smaller = a.hyper.c < b.hyper.c ||
                         (a.hyper.c == b.hyper.c && a.hyper.epsilon < b.hyper.epsilon);
    if (better || (tie && smaller)) best = k;
  }
  if (!best) {
    throw NumericalError("grid_search: every cell failed (first error: " +
                         table.front().error.value_or("unknown") + ")");
  }
  GridResult result;
  result.best_index = *best;
  result.best = table[*best].hyper;
  result.best_model = std::move(*models[*best]);
  result.table = std::move(table);
  return result;
}

}  // namespace affect
