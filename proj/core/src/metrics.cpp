#include "affect/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "affect/error.hpp"
#include "affect/format.hpp"

namespace affect {
namespace {

void check_pair(std::span<const double> pred, std::span<const double> gold, std::size_t min_len,
                const char* what) {
  if (pred.size() != gold.size()) {
    throw DataError(std::string(what) + ": length mismatch (" + std::to_string(pred.size()) +
                    " vs " + std::to_string(gold.size()) + ")");
  }
  if (pred.size() < min_len) {
    throw DataError(std::string(what) + ": need at least " + std::to_string(min_len) +
                    " values, got " + std::to_string(pred.size()));
  }
  const auto finite = [](double v) { return std::isfinite(v); };
  if (!std::all_of(pred.begin(), pred.end(), finite) || !std::all_of(gold.begin(), gold.end(), finite)) {
    throw DataError(std::string(what) + ": non-finite value");
  }
}

bool is_constant(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); });
}

struct Moments {
  long double mean_p = 0, mean_g = 0, var_p = 0, var_g = 0, cov = 0;
};

Moments moments(std::span<const double> pred, std::span<const double> gold) {
  const auto n = static_cast<long double>(pred.size());
  CompensatedSum sp, sg;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    sp.add(pred[i]);
    sg.add(gold[i]);
  }
  Moments m;
  m.mean_p = sp.value() / n;
  m.mean_g = sg.value() / n;
  CompensatedSum vp, vg, cv;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const long double dp = pred[i] - m.mean_p;
    const long double dg = gold[i] - m.mean_g;
    vp.add(dp * dp);
    vg.add(dg * dg);
    cv.add(dp * dg);
  }
  m.var_p = vp.value() / n;
  m.var_g = vg.value() / n;
  m.cov = cv.value() / n;
  return m;
}

}  // namespace

double mae(std::span<const double> pred, std::span<const double> gold) {
  check_pair(pred, gold, 1, "mae");
  CompensatedSum s;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    s.add(std::fabs(static_cast<long double>(pred[i]) - gold[i]));
  }
  return static_cast<double>(s.value() / static_cast<long double>(pred.size()));
}

double pearson(std::span<const double> pred, std::span<const double> gold) {
  check_pair(pred, gold, 2, "pearson");
  if (is_constant(pred) || is_constant(gold)) return 0.0;
  const auto m = moments(pred, gold);
  return static_cast<double>(m.cov / std::sqrt(m.var_p * m.var_g));
}

EvaluationReport ccc(std::span<const double> pred, std::span<const double> gold) {
  check_pair(pred, gold, 2, "ccc");
  const auto m = moments(pred, gold);
  EvaluationReport r;
  r.n = pred.size();
  r.mae = mae(pred, gold);
  r.mean_pred = static_cast<double>(m.mean_p);
  r.mean_gold = static_cast<double>(m.mean_g);

  const bool const_p = is_constant(pred);
  const bool const_g = is_constant(gold);
  if (const_p || const_g) {
    r.degenerate = true;
    r.var_pred = const_p ? 0.0 : static_cast<double>(m.var_p);
    r.var_gold = const_g ? 0.0 : static_cast<double>(m.var_g);
    r.pearson = 0.0;
    r.ccc = (const_p && const_g && pred.front() == gold.front()) ? 1.0 : 0.0;
    return r;
  }

  r.var_pred = static_cast<double>(m.var_p);
  r.var_gold = static_cast<double>(m.var_g);
  r.pearson = static_cast<double>(m.cov / std::sqrt(m.var_p * m.var_g));
  const long double diff = m.mean_p - m.mean_g;
  r.ccc = static_cast<double>(2.0L * m.cov / (m.var_p + m.var_g + diff * diff));
  return r;
}

double mean_segment_ccc(std::span<const double> pred, std::span<const double> gold,
                        std::span<const std::size_t> segment_lengths) {
  check_pair(pred, gold, 2, "mean_segment_ccc");
  std::size_t total = 0;
  for (auto len : segment_lengths) total += len;
  if (total != pred.size() || segment_lengths.empty()) {
    throw DataError("mean_segment_ccc: segment lengths do not cover the sequence");
  }
  CompensatedSum acc;
  std::size_t offset = 0;
  for (auto len : segment_lengths) {
    acc.add(ccc(pred.subspan(offset, len), gold.subspan(offset, len)).ccc);
    offset += len;
  }
  return static_cast<double>(acc.value() / static_cast<long double>(segment_lengths.size()));
}

std::string EvaluationReport::to_record() const {
  std::string out;
  out += "ccc=" + format_double(ccc) + "\n";
  out += "mae=" + format_double(mae) + "\n";
  out += "pearson=" + format_double(pearson) + "\n";
  out += "mean_pred=" + format_double(mean_pred) + "\n";
  out += "mean_gold=" + format_double(mean_gold) + "\n";
  out += "var_pred=" + format_double(var_pred) + "\n";
  out += "var_gold=" + format_double(var_gold) + "\n";
  out += "n=" + std::to_string(n) + "\n";
  return out;
}

EvaluationReport EvaluationReport::from_record(std::string_view text) {
  std::map<std::string, std::string, std::less<>> kv;
  std::size_t line_no = 0;
  for (auto line : split(text, '\n')) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw DataError("evaluation record line " + std::to_string(line_no) + ": missing '='");
    }
    kv.emplace(std::string(line.substr(0, eq)), std::string(line.substr(eq + 1)));
  }
  auto real = [&](std::string_view key) {
    const auto it = kv.find(key);
    double v = 0.0;
    if (it == kv.end() || !parse_double(it->second, v)) {
      throw DataError("evaluation record: missing or invalid '" + std::string(key) + "'");
    }
    return v;
  };
  EvaluationReport r;
  r.ccc = real("ccc");
  r.mae = real("mae");
  r.pearson = real("pearson");
  r.mean_pred = real("mean_pred");
  r.mean_gold = real("mean_gold");
  r.var_pred = real("var_pred");
  r.var_gold = real("var_gold");
  std::uint64_t n = 0;
  const auto it = kv.find("n");
  if (it == kv.end() || !parse_uint(it->second, n)) {
    throw DataError("evaluation record: missing or invalid 'n'");
  }
  r.n = n;
  r.degenerate = r.var_pred == 0.0 || r.var_gold == 0.0;
  return r;
}

}  // namespace affect
