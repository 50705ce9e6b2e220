#include "affect/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "affect/error.hpp"
#include "affect/format.hpp"
#include "affect/metrics.hpp"
#include "affect/parallel.hpp"

namespace affect {
namespace {

long double mean_of(std::span<const double> x) {
  CompensatedSum s;
  for (double v : x) s.add(v);
  return s.value() / static_cast<long double>(x.size());
}

long double std_of(std::span<const double> x) {
  const long double m = mean_of(x);
  CompensatedSum s;
  for (double v : x) {
    const long double d = v - m;
    s.add(d * d);
  }
  return std::sqrt(s.value() / static_cast<long double>(x.size()));
}

std::vector<std::size_t> resolve_segments(std::span<const std::size_t> segments, std::size_t n) {
  if (segments.empty()) return {n};
  std::size_t total = 0;
  for (auto s : segments) total += s;
  if (total != n) {
    throw DataError("post-process: segment lengths sum to " + std::to_string(total) +
                    ", sequence has " + std::to_string(n));
  }
  return {segments.begin(), segments.end()};
}

}  // namespace

std::string_view to_string(BetaMode mode) {
  return mode == BetaMode::StdRatio ? "std-ratio" : "mean-ratio";
}

std::string_view to_string(CenterMode mode) {
  return mode == CenterMode::BiasCorrection ? "bias-correction" : "subtract-gold-mean";
}

std::string_view to_string(ChainStep step) {
  switch (step) {
    case ChainStep::Median: return "median";
    case ChainStep::Scale: return "scale";
    case ChainStep::Center: return "center";
  }
  return "median";
}

BetaMode parse_beta_mode(std::string_view text) {
  if (text == "std-ratio") return BetaMode::StdRatio;
  if (text == "mean-ratio") return BetaMode::MeanRatio;
  throw DataError("unknown beta mode '" + std::string(text) + "' (expected std-ratio, mean-ratio)");
}

CenterMode parse_center_mode(std::string_view text) {
  if (text == "bias-correction") return CenterMode::BiasCorrection;
  if (text == "subtract-gold-mean") return CenterMode::SubtractGoldMean;
  throw DataError("unknown center mode '" + std::string(text) +
                  "' (expected bias-correction, subtract-gold-mean)");
}

std::size_t median_window_frames(double window_s, double frame_period_s) {
  if (!(frame_period_s > 0.0)) throw DataError("median filter: frame period must be positive");
  auto frames = static_cast<std::size_t>(std::llround(window_s / frame_period_s));
  if (frames == 0) frames = 1;
  if (frames % 2 == 0) ++frames;
  return frames;
}

std::vector<double> median_filter(std::span<const double> pred, double window_s,
                                  double frame_period_s, bool allow_any_window) {
  if (pred.empty()) throw DataError("median filter: empty sequence");
  if (!allow_any_window && !(window_s >= kMinMedianWindow && window_s <= kMaxMedianWindow)) {
    throw DataError("median filter: window " + format_double(window_s) +
                    " s outside [0.4, 8] s");
  }
  if (!(window_s > 0.0)) throw DataError("median filter: window must be positive");
  const std::size_t half = median_window_frames(window_s, frame_period_s) / 2;
  const std::size_t n = pred.size();
  std::vector<double> out(n);
  std::vector<double> scratch;
  scratch.reserve(2 * half + 1);
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t h = std::min({half, t, n - 1 - t});
    scratch.assign(pred.begin() + static_cast<std::ptrdiff_t>(t - h),
                   pred.begin() + static_cast<std::ptrdiff_t>(t + h + 1));
    auto mid = scratch.begin() + static_cast<std::ptrdiff_t>(h);
    std::nth_element(scratch.begin(), mid, scratch.end());
    out[t] = *mid;
  }
  return out;
}

double fit_beta(std::span<const double> gold_train, std::span<const double> pred_train,
                BetaMode mode) {
  if (gold_train.size() != pred_train.size() || gold_train.size() < 2) {
    throw DataError("fit_beta: need equal-length sequences of at least 2 values");
  }
  long double num = 0.0L;
  long double den = 0.0L;
  if (mode == BetaMode::StdRatio) {
    num = std_of(gold_train);
    den = std_of(pred_train);
  } else {
    num = mean_of(gold_train);
    den = mean_of(pred_train);
  }
  if (den == 0.0L) throw DataError("degenerate predictions: scaling denominator is zero");
  const double beta = static_cast<double>(num / den);
  if (!std::isfinite(beta)) throw DataError("degenerate predictions: scaling factor not finite");
  return beta;
}

std::vector<double> apply_scaling(std::span<const double> pred, double beta) {
  std::vector<double> out(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) out[i] = beta * pred[i];
  return out;
}

std::vector<double> apply_centering(std::span<const double> pred, double gold_mean,
                                    CenterMode mode, double pred_mean) {
  const double shift = mode == CenterMode::BiasCorrection ? gold_mean - pred_mean : -gold_mean;
  std::vector<double> out(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) out[i] = pred[i] + shift;
  return out;
}

// ---------------------------------------------------------------------------

std::vector<std::vector<double>> PostProcessParams::apply_stages(
    std::span<const double> pred, double frame_period_s,
    std::span<const std::size_t> segments) const {
  const auto segs = resolve_segments(segments, pred.size());
  std::vector<std::vector<double>> stages;
  std::vector<double> current(pred.begin(), pred.end());
  for (ChainStep step : steps) {
    switch (step) {
      case ChainStep::Median: {
        if (!median_window_s) throw DataError("post-process: median step without a window");
        std::vector<double> filtered;
        filtered.reserve(current.size());
        std::size_t offset = 0;
        for (auto len : segs) {
          if (len == 0) continue;
          auto part = median_filter(std::span(current).subspan(offset, len), *median_window_s,
                                    frame_period_s);
          filtered.insert(filtered.end(), part.begin(), part.end());
          offset += len;
        }
        current = std::move(filtered);
        break;
      }
      case ChainStep::Scale:
        if (!beta) throw DataError("post-process: scale step without beta");
        current = apply_scaling(current, *beta);
        break;
      case ChainStep::Center:
        if (!gold_mean_train) throw DataError("post-process: center step without gold mean");
        current = apply_centering(current, *gold_mean_train, center_mode,
                                  pred_mean_train.value_or(0.0));
        break;
    }
    stages.push_back(current);
  }
  return stages;
}

std::vector<double> PostProcessParams::apply(std::span<const double> pred, double frame_period_s,
                                             std::span<const std::size_t> segments) const {
  auto stages = apply_stages(pred, frame_period_s, segments);
  if (stages.empty()) return {pred.begin(), pred.end()};
  return std::move(stages.back());
}

std::string PostProcessParams::to_text() const {
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : "none"; };
  std::string steps_text;
  for (auto s : steps) steps_text += (steps_text.empty() ? "" : ",") + std::string(to_string(s));
  std::string out;
  out += "steps=" + (steps_text.empty() ? std::string("none") : steps_text) + "\n";
  out += "median_window_s=" + opt(median_window_s) + "\n";
  out += "beta=" + opt(beta) + "\n";
  out += "beta_mode=" + std::string(to_string(beta_mode)) + "\n";
  out += "gold_mean_train=" + opt(gold_mean_train) + "\n";
  out += "pred_mean_train=" + opt(pred_mean_train) + "\n";
  out += "center_mode=" + std::string(to_string(center_mode)) + "\n";
  return out;
}

PostProcessParams PostProcessParams::from_text(std::string_view text) {
  std::map<std::string, std::string, std::less<>> kv;
  for (auto line : split(text, '\n')) {
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw DataError("post-process params: missing '='");
    kv.emplace(std::string(line.substr(0, eq)), std::string(line.substr(eq + 1)));
  }
  auto get = [&](std::string_view key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw DataError("post-process params: missing '" + std::string(key) + "'");
    return it->second;
  };
  auto opt = [&](std::string_view key) -> std::optional<double> {
    const auto& v = get(key);
    if (v == "none") return std::nullopt;
    double d = 0.0;
    if (!parse_double(v, d)) throw DataError("post-process params: invalid '" + std::string(key) + "'");
    return d;
  };
  PostProcessParams p;
  const auto& steps_text = get("steps");
  if (steps_text != "none") {
    for (auto s : split(steps_text, ',')) {
      if (s == "median") p.steps.push_back(ChainStep::Median);
      else if (s == "scale") p.steps.push_back(ChainStep::Scale);
      else if (s == "center") p.steps.push_back(ChainStep::Center);
      else throw DataError("post-process params: unknown step '" + std::string(s) + "'");
    }
  }
  p.median_window_s = opt("median_window_s");
  p.beta = opt("beta");
  p.beta_mode = parse_beta_mode(get("beta_mode"));
  p.gold_mean_train = opt("gold_mean_train");
  p.pred_mean_train = opt("pred_mean_train");
  p.center_mode = parse_center_mode(get("center_mode"));
  return p;
}

PostProcessParams fit_chain(const ChainChoice& choice, std::span<const double> pred_train,
                            std::span<const double> gold_train) {
  if (pred_train.size() != gold_train.size()) {
    throw DataError("fit_chain: training prediction/gold length mismatch");
  }
  PostProcessParams p;
  p.beta_mode = choice.beta_mode;
  p.center_mode = choice.center_mode;
  if (choice.median_window_s) {
    if (!(*choice.median_window_s >= kMinMedianWindow && *choice.median_window_s <= kMaxMedianWindow)) {
      throw DataError("fit_chain: median window outside [0.4, 8] s");
    }
    p.median_window_s = choice.median_window_s;
    p.steps.push_back(ChainStep::Median);
  }
  if (choice.scale) {
    const double beta = fit_beta(gold_train, pred_train, choice.beta_mode);
    if (!(beta > 0.0)) throw DataError("degenerate predictions: scaling factor must be positive");
    p.beta = beta;
    p.steps.push_back(ChainStep::Scale);
  }
  if (choice.center) {
    if (gold_train.empty()) throw DataError("fit_chain: empty training data");
    p.gold_mean_train = static_cast<double>(mean_of(gold_train));
    const auto scaled = p.beta ? apply_scaling(pred_train, *p.beta)
                               : std::vector<double>(pred_train.begin(), pred_train.end());
    p.pred_mean_train = static_cast<double>(mean_of(scaled));
    p.steps.push_back(ChainStep::Center);
  }
  return p;
}

ChainTuning tune_chain(std::span<const double> raw_dev_pred, std::span<const double> gold_dev,
                       std::span<const double> raw_train_pred,
                       std::span<const double> gold_train, double frame_period_s,
                       const ChainSearchSpace& space, std::span<const std::size_t> dev_segments,
                       std::size_t jobs) {
  if (raw_dev_pred.size() != gold_dev.size()) throw DataError("tune_chain: dev length mismatch");
  if (raw_train_pred.size() != gold_train.size()) throw DataError("tune_chain: train length mismatch");
  if (space.beta_modes.empty() || space.center_modes.empty()) {
    throw DataError("tune_chain: beta and center mode lists must be non-empty");
  }
  const auto segs = resolve_segments(dev_segments, raw_dev_pred.size());

  std::vector<std::optional<double>> windows{std::nullopt};
  for (double w : space.windows_s) windows.emplace_back(w);

  std::vector<ChainTrial> table;
  table.reserve(space.size());
  for (const auto& w : windows) {
    for (bool scale : {false, true}) {
      for (bool center : {false, true}) {
        for (auto bm : space.beta_modes) {
          for (auto cm : space.center_modes) {
            table.push_back({ChainChoice{w, scale, center, bm, cm}, 0.0, std::nullopt});
          }
        }
      }
    }
  }

  auto score = [&](std::span<const double> pred) {
    return space.segment_average ? mean_segment_ccc(pred, gold_dev, segs)
                                 : ccc(pred, gold_dev).ccc;
  };

  std::vector<PostProcessParams> fitted(table.size());
  parallel_for(table.size(), jobs, [&](std::size_t k) {
    try {
      fitted[k] = fit_chain(table[k].choice, raw_train_pred, gold_train);
      table[k].dev_ccc = score(fitted[k].apply(raw_dev_pred, frame_period_s, segs));
    } catch (const std::exception& e) {
      table[k].error = e.what();
    }
  });

  double best_score = -std::numeric_limits<double>::infinity();
  for (const auto& t : table) {
    if (!t.error && t.dev_ccc > best_score) best_score = t.dev_ccc;
  }
  auto steps_of = [](const ChainChoice& c) {
    return (c.median_window_s ? 1 : 0) + (c.scale ? 1 : 0) + (c.center ? 1 : 0);
  };
  std::optional<std::size_t> best;
  for (std::size_t k = 0; k < table.size(); ++k) {
    const auto& t = table[k];
    if (t.error || t.dev_ccc < best_score - 1e-12) continue;
    if (!best) {
      best = k;
      continue;
    }
    const auto& b = table[*best].choice;
    const int sa = steps_of(t.choice);
    const int sb = steps_of(b);
    const double wa = t.choice.median_window_s.value_or(0.0);
    const double wb = b.median_window_s.value_or(0.0);
    if (sa < sb || (sa == sb && wa < wb)) best = k;
  }
  if (!best) throw DataError("tune_chain: every configuration failed");

  ChainTuning result;
  result.best_index = *best;
  result.params = fitted[*best];
  result.empty_chain_ccc = table.front().dev_ccc;
  result.table = std::move(table);
  return result;
}

}  // namespace affect
