#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "affect/error.hpp"
#include "affect/prng.hpp"
#include "affect/timeseries.hpp"
#include "oracles.hpp"

using namespace affect;

namespace {

AffectTrace trace(std::vector<double> v) {
  AffectTrace t;
  t.values = std::move(v);
  return t;
}

FeatureStream stream(std::size_t frames, std::vector<bool> mask = {}) {
  FeatureStream s;
  s.modality = "m";
  s.frames = Matrix(frames, 1);
  for (std::size_t t = 0; t < frames; ++t) s.frames(t, 0) = 100.0 + t;
  s.mask = mask.empty() ? FrameMask::all_valid(frames) : FrameMask{mask};
  return s;
}

}  // namespace

TEST_CASE("shift_gold") {
  const auto g = trace({1, 2, 3, 4, 5});
  CHECK(shift_gold(g, 0).values == g.values);
  CHECK(shift_gold(g, 2).values == std::vector<double>{3, 4, 5});
  CHECK_THROWS_AS(shift_gold(g, 5), DataError);
  // 70 frames of 40 ms
  CHECK(70 * kDefaultFramePeriod == doctest::Approx(2.8));
}

TEST_CASE("shifted gold pairs with the leading feature frames") {
  const auto g = trace({1, 2, 3, 4, 5});
  const auto shifted = shift_gold(g, 2);
  const auto s = truncate_stream(stream(5), shifted.size());
  const auto set = apply_mask_for_training(s, shifted);
  REQUIRE(set.size() == 3);
  CHECK(set.features(0, 0) == 100.0);
  CHECK(set.features(2, 0) == 102.0);
  CHECK(set.targets == std::vector<double>{3, 4, 5});
}

TEST_CASE("apply_mask_for_training") {
  const auto g = trace({0.1, 0.2, 0.3});
  CHECK(apply_mask_for_training(stream(3), g).size() == 3);
  const auto set = apply_mask_for_training(stream(3, {true, false, true}), g);
  CHECK(set.targets == std::vector<double>{0.1, 0.3});
  CHECK(set.features(1, 0) == 102.0);
  CHECK_THROWS_AS(apply_mask_for_training(stream(3, {false, false, false}), g), DataError);
  CHECK_THROWS_AS(apply_mask_for_training(stream(4), g), DataError);
}

TEST_CASE("impute_predictions") {
  const std::vector<double> p{1.5, 2.5};
  CHECK(impute_predictions(p, FrameMask::all_valid(2)) == p);
  const auto out = impute_predictions(p, FrameMask{{false, true, false, true}}, 0.0);
  CHECK(out == std::vector<double>{0.0, 1.5, 1.5, 2.5});

  Prng rng(4);
  for (int k = 0; k < 200; ++k) {
    const std::size_t n = 1 + rng.index(50);
    std::vector<bool> mask(n);
    std::size_t valid = 0;
    for (std::size_t t = 0; t < n; ++t) valid += (mask[t] = rng.uniform() < 0.6) ? 1 : 0;
    const auto pred = oracle::random_vector(rng, valid, -1, 1);
    CHECK(impute_predictions(pred, FrameMask{mask}, 0.25) == oracle::impute(pred, mask, 0.25));
  }
}

TEST_CASE("scan_delay recovers an injected lag") {
  std::vector<double> latent(400);
  for (std::size_t t = 0; t < latent.size(); ++t) {
    latent[t] = 0.6 * std::sin(2 * std::numbers::pi * t / 97.0) + 0.3 * std::sin(t / 13.0);
  }
  // gold lags the prediction by 10 frames
  std::vector<double> g2(380);
  for (std::size_t t = 0; t < 380; ++t) g2[t] = t >= 10 ? latent[t - 10] : latent[0];
  std::vector<std::size_t> cands(21);
  for (std::size_t d = 0; d <= 20; ++d) cands[d] = d;
  const auto scan = scan_delay(trace(g2), std::span(latent).first(380), cands);
  CHECK(scan.best_delay == 10);
  CHECK(scan.ccc_per_delay.size() == 21);

  const std::vector<std::size_t> zero{0};
  CHECK(scan_delay(trace(g2), std::span(latent).first(380), zero).best_delay == 0);
  CHECK_THROWS_AS(scan_delay(trace(g2), std::span(latent).first(380), std::span<const std::size_t>{}),
                  DataError);
}

TEST_CASE("scan_delay on white noise stays near zero") {
  Prng rng(2);
  const auto g = oracle::random_vector(rng, 3000, -1, 1);
  const auto p = oracle::random_vector(rng, 3000, -1, 1);
  std::vector<std::size_t> cands{0, 5, 10, 20};
  for (const auto& [d, c] : scan_delay(trace(g), p, cands).ccc_per_delay) {
    CHECK(std::fabs(c) < 0.08);
  }
}

TEST_CASE("validation") {
  auto t = trace({0.5, 1.5});
  CHECK_NOTHROW(t.validate(false));
  CHECK_THROWS_AS(t.validate(true), DataError);
  t.values = {0.0, std::nan("")};
  CHECK_THROWS_AS(t.validate(false), DataError);

  DatasetSplit split;
  SubjectRecord a;
  a.subject_id = "a";
  split.train = {a};
  CHECK_THROWS_AS(split.validate(), DataError);
  split.dev = {a};
  CHECK_THROWS_AS(split.validate(), DataError);
  a.subject_id = "b";
  split.dev = {a};
  CHECK_NOTHROW(split.validate());
}

TEST_CASE("parse_dimension") {
  CHECK(parse_dimension("arousal") == AffectDimension::Arousal);
  CHECK(parse_dimension("valence") == AffectDimension::Valence);
  CHECK_THROWS_AS(parse_dimension("Arousal"), DataError);
}
