#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. Nothing here calls into affect_core's numerics.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "affect/matrix.hpp"
#include "affect/prng.hpp"
#include "affect/svr.hpp"

namespace affect::oracle {

struct Moments {
  long double mean_p = 0, mean_g = 0, var_p = 0, var_g = 0, cov = 0;
};

/// Two-pass population moments in long double.
Moments moments(std::span<const double> pred, std::span<const double> gold);
double ccc(std::span<const double> pred, std::span<const double> gold);
double pearson(std::span<const double> pred, std::span<const double> gold);
double mae(std::span<const double> pred, std::span<const double> gold);

/// Median of each centred window (shrinking symmetrically at the edges),
/// computed by copying and fully sorting the window.
std::vector<double> median_filter(std::span<const double> x, std::size_t window_frames);

/// Index-walking hold-last fill.
std::vector<double> impute(std::span<const double> pred, const std::vector<bool>& mask,
                           double fill_start);

/// Exhaustive active-set enumeration of the epsilon-SVR dual
///   max -1/2 b'Kb - eps*sum|b| + y'b,  sum b = 0, |b_i| <= C.
/// Every coefficient is tried at -C, 0, +C, free positive and free negative;
/// free sets are solved from their KKT system. Exponential in n, so only for
/// n <= 7 or so.
struct QpSolution {
  std::vector<double> coefs;
  double objective = 0.0;
};
QpSolution svr_dual_bruteforce(const Matrix& x, std::span<const double> y,
                               const SvrHyperParams& hyper);

/// Dual objective evaluated from scratch with an explicit double kernel loop.
double svr_dual_objective(const Matrix& x, std::span<const double> y,
                          std::span<const double> coefs, const SvrHyperParams& hyper);

/// Largest KKT violation of (coefs, bias) for the epsilon-SVR primal/dual pair.
double svr_kkt_violation(const Matrix& x, std::span<const double> y,
                         std::span<const double> coefs, double bias, const SvrHyperParams& hyper);

// Random data helpers.
std::vector<double> random_vector(Prng& rng, std::size_t n, double lo, double hi);
/// gold ~ N(0,1); pred = rho * gold + noise + offset, scaled.
void correlated_pair(Prng& rng, std::size_t n, std::vector<double>& pred, std::vector<double>& gold);

}  // namespace affect::oracle
