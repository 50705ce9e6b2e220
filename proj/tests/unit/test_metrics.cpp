#include <doctest.h>

#include <cmath>
#include <vector>

#include "affect/error.hpp"
#include "affect/metrics.hpp"
#include "affect/prng.hpp"
#include "oracles.hpp"

using namespace affect;

namespace {

bool rel_close(double a, double b, double tol) { return std::fabs(a - b) <= tol * std::fabs(b); }

}  // namespace

TEST_CASE("mae") {
  const std::vector<double> g{0.1, -0.3, 0.7};
  CHECK(mae(g, g) == 0.0);
  CHECK(mae(std::vector<double>{0, 0}, std::vector<double>{1, -1}) == 1.0);
  CHECK_THROWS_AS(mae(std::vector<double>{}, std::vector<double>{}), DataError);
  CHECK_THROWS_AS(mae(std::vector<double>{1}, std::vector<double>{1, 2}), DataError);
}

TEST_CASE("pearson identities") {
  const std::vector<double> g{0.1, -0.3, 0.7, 0.2};
  std::vector<double> neg(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) neg[i] = -g[i];
  CHECK(pearson(g, g) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(pearson(neg, g) == doctest::Approx(-1.0).epsilon(1e-15));
}

TEST_CASE("ccc identities") {
  const std::vector<double> g{0.1, -0.3, 0.7, 0.2};
  CHECK(ccc(g, g).ccc == doctest::Approx(1.0).epsilon(1e-15));

  // constant shift: 2 var / (2 var + c^2)
  const double c = 0.4;
  std::vector<double> shifted(g);
  for (auto& v : shifted) v += c;
  const auto m = oracle::moments(g, g);
  const double var = static_cast<double>(m.var_g);
  const auto r = ccc(shifted, g);
  CHECK(r.ccc == doctest::Approx(2 * var / (2 * var + c * c)).epsilon(1e-12));
  CHECK(r.pearson == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.ccc < r.pearson);
}

TEST_CASE("degenerate inputs") {
  const std::vector<double> k(5, 0.3), g{0.1, 0.2, 0.3, 0.4, 0.5};
  auto r = ccc(k, g);
  CHECK(r.degenerate);
  CHECK(r.ccc == 0.0);
  CHECK(r.pearson == 0.0);
  r = ccc(k, k);
  CHECK(r.degenerate);
  CHECK(r.ccc == 1.0);
  CHECK_THROWS_AS(ccc(std::vector<double>{1}, std::vector<double>{1}), DataError);
  CHECK_THROWS_AS(ccc(std::vector<double>{1, std::nan("")}, std::vector<double>{1, 2}), DataError);
}

TEST_CASE("against moment oracles on random pairs") {
  Prng rng(17);
  for (int k = 0; k < 200; ++k) {
    std::vector<double> p, g;
    oracle::correlated_pair(rng, 2 + rng.index(2000), p, g);
    const auto r = ccc(p, g);
    CHECK(rel_close(r.ccc, oracle::ccc(p, g), 1e-12));
    CHECK(rel_close(r.pearson, oracle::pearson(p, g), 1e-12));
    CHECK(rel_close(r.mae, oracle::mae(p, g), 1e-12));
    CHECK(std::fabs(r.ccc) <= std::fabs(r.pearson) + 1e-15);
    CHECK(std::fabs(r.pearson) <= 1.0);
  }
}

TEST_CASE("large offsets do not lose precision") {
  std::vector<double> g(1000), p(1000);
  Prng rng(3);
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = 1e6 + rng.normal();
    p[i] = g[i] + 0.1 * rng.normal();
  }
  CHECK(rel_close(ccc(p, g).ccc, oracle::ccc(p, g), 1e-9));
}

TEST_CASE("mean_segment_ccc") {
  std::vector<double> g{0.1, 0.2, 0.3, 0.5, 0.1, 0.9};
  std::vector<double> p{0.1, 0.2, 0.3, 0.1, 0.5, 0.9};
  const std::vector<std::size_t> seg{3, 3};
  const double expect =
      0.5 * (1.0 + oracle::ccc(std::span(p).subspan(3), std::span(g).subspan(3)));
  CHECK(mean_segment_ccc(p, g, seg) == doctest::Approx(expect).epsilon(1e-14));
  const std::vector<std::size_t> bad{3, 2};
  CHECK_THROWS_AS(mean_segment_ccc(p, g, bad), DataError);
}

TEST_CASE("record round-trip") {
  std::vector<double> p, g;
  Prng rng(8);
  oracle::correlated_pair(rng, 100, p, g);
  const auto r = ccc(p, g);
  const auto back = EvaluationReport::from_record(r.to_record());
  CHECK(back.ccc == r.ccc);
  CHECK(back.mae == r.mae);
  CHECK(back.var_gold == r.var_gold);
  CHECK(back.n == r.n);
  CHECK(r.to_record().rfind("ccc=", 0) == 0);
}
