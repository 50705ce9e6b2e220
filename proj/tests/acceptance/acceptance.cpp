// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "affect/experiment.hpp"
#include "affect/ingest.hpp"
#include "affect/metrics.hpp"
#include "affect/postprocess.hpp"
#include "affect/prng.hpp"
#include "affect/svr.hpp"
#include "oracles.hpp"

using namespace affect;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Criterion {
  int id;
  std::string title;
  double budget_s;  // 0 = no runtime limit
  std::function<Outcome()> run;
};

double rel_diff(double a, double b) {
  if (a == b) return 0.0;
  return std::fabs(a - b) / std::max(std::fabs(b), std::numeric_limits<double>::min());
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

bool same_bits(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!same_bits(a[i], b[i])) return false;
  }
  return true;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Smooth random trace in roughly [-0.8, 0.8].
std::vector<double> smooth_trace(Prng& rng, std::size_t n) {
  std::vector<double> out(n);
  const double f1 = rng.uniform(0.002, 0.01), f2 = rng.uniform(0.01, 0.03);
  const double p1 = rng.uniform(0, 6.3), p2 = rng.uniform(0, 6.3);
  for (std::size_t t = 0; t < n; ++t) {
    out[t] = 0.5 * std::sin(6.283185307179586 * f1 * t + p1) + 0.3 * std::sin(6.283185307179586 * f2 * t + p2);
  }
  return out;
}

Outcome metric_oracles() {
  Prng rng(101);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const std::size_t n = 2 + rng.index(4999);
    std::vector<double> pred, gold;
    oracle::correlated_pair(rng, n, pred, gold);
    const auto r = ccc(pred, gold);
    worst = std::max({worst, rel_diff(r.ccc, oracle::ccc(pred, gold)),
                      rel_diff(r.pearson, oracle::pearson(pred, gold)),
                      rel_diff(r.mae, oracle::mae(pred, gold)),
                      rel_diff(mae(pred, gold), oracle::mae(pred, gold)),
                      rel_diff(pearson(pred, gold), oracle::pearson(pred, gold))});
  }
  return {worst <= 1e-12, "max relative difference " + fmt("%.3g", worst)};
}

Outcome shift_penalty() {
  Prng rng(202);
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    const std::size_t n = 2 + rng.index(3000);
    auto gold = oracle::random_vector(rng, n, -1, 1);
    gold[0] = -1.0;
    gold[1] = 1.0;
    const double c = rng.uniform(-2, 2);
    std::vector<double> pred(n);
    for (std::size_t i = 0; i < n; ++i) pred[i] = gold[i] + c;
    const auto m = oracle::moments(gold, gold);
    const double s2 = static_cast<double>(m.var_g);
    const double expected = 2 * s2 / (2 * s2 + c * c);
    worst = std::max(worst, std::fabs(ccc(pred, gold).ccc - expected));
  }
  return {worst <= 1e-10, "max abs difference " + fmt("%.3g", worst)};
}

Outcome svr_bruteforce() {
  Prng rng(303);
  SolverOptions opt;
  opt.tol = 1e-9;
  double worst_obj = 0.0, worst_kkt = 0.0;
  bool converged = true;
  for (int k = 0; k < 200; ++k) {
    const std::size_t n = 2 + rng.index(5);
    const std::size_t d = 1 + rng.index(2);
    Matrix x(n, d);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < d; ++c) x(r, c) = rng.normal();
    }
    const auto y = oracle::random_vector(rng, n, -1, 1);
    const SvrHyperParams hyper{rng.uniform(0.1, 10.0), rng.uniform(0.0, 0.5),
                               rng.uniform() < 0.5 ? Kernel::linear() : Kernel::rbf(rng.uniform(0.1, 2.0))};
    const auto sol = solve_dual(x, y, hyper, opt);
    const auto ref = oracle::svr_dual_bruteforce(x, y, hyper);
    converged = converged && sol.termination == Termination::Converged;
    worst_obj = std::max(worst_obj, std::fabs(oracle::svr_dual_objective(x, y, sol.coefs, hyper) - ref.objective));
    worst_kkt = std::max(worst_kkt, oracle::svr_kkt_violation(x, y, sol.coefs, sol.bias, hyper));
  }
  return {converged && worst_obj <= 1e-6 && worst_kkt <= opt.tol,
          "objective gap " + fmt("%.3g", worst_obj) + ", KKT violation " + fmt("%.3g", worst_kkt) +
              (converged ? "" : ", non-converged instance")};
}

ExperimentConfig base_config(const SynthSpec& spec, std::uint64_t seed) {
  ExperimentConfig c;
  c.name = "acceptance";
  c.synth = spec;
  c.synth->seed = seed;
  c.seed = seed;
  c.delay_frames[AffectDimension::Arousal] = 0;
  c.grid = GridSpec{{0.01, 0.1, 1.0}, {0.001, 0.01, 0.1}, {Kernel::linear()}};
  c.jobs = 0;
  return c;
}

Outcome noiseless_end_to_end() {
  SynthSpec spec;
  spec.n_subjects_train = 3;
  spec.n_subjects_dev = 3;
  spec.frames_per_subject = 1500;
  spec.annotation_lag_frames = 0;
  spec.modalities = {{"video", 8, 0.0, 0.0, false}};
  auto config = base_config(spec, 404);
  config.modalities = {"video"};
  const auto run = run_experiment(config);
  const double final_ccc = run.report.final_ccc();
  return {final_ccc >= 0.99, "final CCC " + fmt("%.6f", final_ccc)};
}

// One 5-minute session; the prediction is a noisy copy of the arousal latent.
Outcome delay_recovery() {
  std::vector<std::size_t> candidates(101);
  std::iota(candidates.begin(), candidates.end(), std::size_t{0});
  int hits = 0;
  std::string found;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SynthSpec spec;
    spec.n_subjects_train = 1;
    spec.n_subjects_dev = 1;
    spec.frames_per_subject = 7500;
    spec.annotation_lag_frames = 70;
    spec.modalities = {{"video", 1, 0.1, 0.0, true}};
    spec.seed = seed;
    const auto data = generate_synthetic(spec);
    const auto& subject = data.dev.front();
    const auto& stream = subject.streams.at("video");
    std::vector<double> pred(stream.size());
    for (std::size_t t = 0; t < pred.size(); ++t) pred[t] = stream.frames(t, 0);
    const auto scan = scan_delay(subject.gold.at(AffectDimension::Arousal), pred, candidates);
    hits += scan.best_delay == 70;
    found += (found.empty() ? "" : ",") + std::to_string(scan.best_delay);
  }
  return {hits == 10, std::to_string(hits) + "/10 seeds recover 70 (" + found + ")"};
}

Outcome fusion_complementarity() {
  int ok = 0;
  std::string worst;
  double worst_margin = 1e9;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SynthSpec spec;
    spec.n_subjects_train = 3;
    spec.n_subjects_dev = 3;
    spec.frames_per_subject = 600;
    spec.modalities = {{"video", 2, 0.8, 0.0, true}, {"audio", 2, 0.8, 0.0, true}};
    auto config = base_config(spec, 600 + seed);
    config.modalities = {"video", "audio"};
    config.scheme = FusionScheme::Late;
    const auto late = run_experiment(config);
    config.scheme = FusionScheme::Early;
    const auto early = run_experiment(config);

    const double best_uni = std::max(late.report.unimodal[0].final_ccc, late.report.unimodal[1].final_ccc);
    const double late_margin = late.report.final_ccc() - best_uni;
    const double early_margin = early.report.final_ccc() - 0.95 * best_uni;
    const bool pass = late_margin >= 0.0 && early_margin >= 0.0;
    ok += pass;
    if (std::min(late_margin, early_margin) < worst_margin) {
      worst_margin = std::min(late_margin, early_margin);
      worst = "seed " + std::to_string(seed) + ": unimodal " + fmt("%.4f", late.report.unimodal[0].final_ccc) +
              "/" + fmt("%.4f", late.report.unimodal[1].final_ccc) + ", late " +
              fmt("%.4f", late.report.final_ccc()) + ", early " + fmt("%.4f", early.report.final_ccc());
    }
  }
  return {ok == 10, std::to_string(ok) + "/10 seeds; tightest " + worst};
}

Outcome postprocess_oracles() {
  Prng rng(707);
  int median_mismatch = 0;
  for (int k = 0; k < 500; ++k) {
    const std::size_t n = 1 + rng.index(400);
    const std::size_t window = 10 + rng.index(191);  // 0.4 s .. 8 s at 25 fps
    std::vector<double> x = oracle::random_vector(rng, n, -1, 1);
    if (rng.uniform() < 0.3) {
      for (auto& v : x) v = static_cast<double>(rng.index(9)) / 4 - 1;  // ties
    }
    const double window_s = window * kDefaultFramePeriod;
    const auto got = median_filter(x, window_s, kDefaultFramePeriod);
    const auto want = oracle::median_filter(x, median_window_frames(window_s, kDefaultFramePeriod));
    median_mismatch += !same_bits(got, want);
  }

  double worst_std = 0.0, worst_mean = 0.0;
  for (int k = 0; k < 200; ++k) {
    const std::size_t n = 10 + rng.index(2000);
    std::vector<double> pred, gold;
    oracle::correlated_pair(rng, n, pred, gold);
    const double beta = fit_beta(gold, pred, BetaMode::StdRatio);
    if (beta > 0) {
      const auto scaled = apply_scaling(pred, beta);
      const auto ms = oracle::moments(scaled, gold);
      worst_std = std::max(worst_std, rel_diff(static_cast<double>(std::sqrt(ms.var_p)),
                                               static_cast<double>(std::sqrt(ms.var_g))));
    }
    const auto m = oracle::moments(pred, gold);
    const auto centred = apply_centering(pred, static_cast<double>(m.mean_g), CenterMode::BiasCorrection,
                                         static_cast<double>(m.mean_p));
    const auto mc = oracle::moments(centred, gold);
    worst_mean = std::max(worst_mean, static_cast<double>(std::fabs(mc.mean_p - mc.mean_g)));
  }
  return {median_mismatch == 0 && worst_std <= 1e-12 && worst_mean <= 1e-12,
          std::to_string(median_mismatch) + " median mismatches, std gap " + fmt("%.3g", worst_std) +
              ", mean gap " + fmt("%.3g", worst_mean)};
}

Outcome tuner_soundness() {
  Prng rng(808);
  int bad = 0;
  double worst = 1e9;
  for (int k = 0; k < 50; ++k) {
    const std::size_t n = 300 + rng.index(700);
    const auto gold_train = smooth_trace(rng, n);
    const auto gold_dev = smooth_trace(rng, n);
    const double scale = rng.uniform(0.2, 1.5), offset = rng.uniform(-0.3, 0.3), noise = rng.uniform(0.0, 0.6);
    const auto make_pred = [&](const std::vector<double>& g) {
      std::vector<double> p(g.size());
      for (std::size_t t = 0; t < g.size(); ++t) p[t] = scale * g[t] + offset + noise * rng.normal();
      return p;
    };
    const auto pred_train = make_pred(gold_train);
    const auto pred_dev = make_pred(gold_dev);
    const auto tuning = tune_chain(pred_dev, gold_dev, pred_train, gold_train, kDefaultFramePeriod);
    const double empty = oracle::ccc(pred_dev, gold_dev);
    const double chosen = oracle::ccc(tuning.params.apply(pred_dev, kDefaultFramePeriod), gold_dev);
    const double margin = chosen - empty;
    worst = std::min(worst, margin);
    bad += margin < -1e-12;
  }
  return {bad == 0, std::to_string(50 - bad) + "/50 scenarios; smallest gain " + fmt("%.3g", worst)};
}

Outcome determinism() {
  SynthSpec spec;
  spec.n_subjects_train = 3;
  spec.n_subjects_dev = 3;
  spec.frames_per_subject = 500;
  spec.modalities = {{"video", 4, 0.5, 0.1, false}, {"audio", 3, 0.5, 0.0, false}};
  const auto tmp = fs::temp_directory_path() / "affect_acceptance_determinism";
  fs::remove_all(tmp);
  std::size_t files = 0;
  std::vector<std::string> differing;
  for (FusionScheme scheme : {FusionScheme::Early, FusionScheme::Late}) {
    auto config = base_config(spec, 909);
    config.modalities = {"video", "audio"};
    config.scheme = scheme;
    std::map<std::string, std::string> outputs[2];
    for (int pass = 0; pass < 2; ++pass) {
      config.jobs = pass == 0 ? 1 : 8;
      const auto dir = tmp / (std::string(to_string(scheme)) + std::to_string(config.jobs));
      emit_report(run_experiment(config), config, dir);
      for (const auto& e : fs::directory_iterator(dir)) {
        const auto name = e.path().filename().string();
        if (!name.starts_with("timing-")) outputs[pass][name] = slurp(e.path());
      }
    }
    files += outputs[0].size();
    for (const auto& [name, text] : outputs[0]) {
      const auto it = outputs[1].find(name);
      if (it == outputs[1].end() || it->second != text) differing.push_back(name);
    }
    if (outputs[0].size() != outputs[1].size()) differing.push_back("(file set)");
  }
  fs::remove_all(tmp);
  std::string detail = std::to_string(files) + " artifacts compared";
  for (const auto& d : differing) detail += "; differs: " + d;
  return {differing.empty() && files > 0, detail};
}

double wild_double(Prng& rng) {
  switch (rng.index(4)) {
    case 0: return rng.normal();
    case 1: return rng.normal() * std::pow(10.0, rng.uniform(-300, 300));
    case 2: return std::bit_cast<double>(rng.next() & 0x7fefffffffffffffULL) * (rng.uniform() < 0.5 ? -1 : 1);
    default: return std::round(rng.normal() * 100) / 100;
  }
}

Outcome format_round_trips() {
  Prng rng(1010);
  int failures = 0;
  for (int k = 0; k < 100; ++k) {
    // feature file
    FeatureStream s;
    s.modality = "m";
    const std::size_t frames = 1 + rng.index(60), dim = 1 + rng.index(6);
    s.frames = Matrix(frames, dim);
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t c = 0; c < dim; ++c) s.frames(t, c) = wild_double(rng);
      s.mask.valid.push_back(rng.uniform() < 0.8);
    }
    std::stringstream fs_text;
    write_features(fs_text, s);
    const auto back = read_features(fs_text, "m");
    std::stringstream again;
    write_features(again, back);
    failures += !(same_bits(back.frames.data(), s.frames.data()) && back.mask == s.mask &&
                  again.str() == fs_text.str());

    // annotation file
    std::vector<double> gold(1 + rng.index(200));
    for (auto& g : gold) g = rng.uniform(-1, 1);
    std::stringstream an_text;
    write_annotations(an_text, gold);
    const auto trace = read_annotations(an_text, AffectDimension::Valence);
    failures += !same_bits(trace.values, gold);

    // model
    const std::size_t n = 2 + rng.index(30), d = 1 + rng.index(4);
    Matrix x(n, d);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < d; ++c) x(r, c) = rng.normal();
    }
    const auto y = oracle::random_vector(rng, n, -1, 1);
    const SvrHyperParams hyper{rng.uniform(0.01, 10), rng.uniform(0, 0.2),
                               rng.uniform() < 0.5 ? Kernel::linear() : Kernel::rbf(rng.uniform(0.01, 3))};
    const auto model = train_svr(x, y, hyper);
    const auto text = model.to_text();
    const auto loaded = SvrModel::from_text(text);
    bool same = loaded == model && loaded.to_text() == text && same_bits(loaded.bias(), model.bias()) &&
                same_bits(loaded.dual_coefs(), model.dual_coefs()) &&
                same_bits(loaded.support_vectors().data(), model.support_vectors().data()) &&
                same_bits(loaded.standardizer().mean, model.standardizer().mean) &&
                same_bits(loaded.standardizer().scale, model.standardizer().scale);
    same = same && same_bits(loaded.predict(x), model.predict(x));
    failures += !same;
  }
  return {failures == 0, std::to_string(300 - failures) + "/300 artifacts round-trip"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "metric oracle equivalence", 10, metric_oracles},
      {2, "CCC shift penalty", 0, shift_penalty},
      {3, "SVR brute-force equivalence", 60, svr_bruteforce},
      {4, "noiseless end-to-end", 30, noiseless_end_to_end},
      {5, "delay recovery", 0, delay_recovery},
      {6, "fusion complementarity", 0, fusion_complementarity},
      {7, "post-processing oracles", 0, postprocess_oracles},
      {8, "tuner soundness", 0, tuner_soundness},
      {9, "determinism across job counts", 0, determinism},
      {10, "format round-trips", 0, format_round_trips},
  };
  int failed = 0;
  // Optional arguments select criteria by number.
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_s > 0 && secs >= c.budget_s) {
      o.pass = false;
      o.detail += "; over the " + fmt("%.0f", c.budget_s) + " s budget";
    }
    failed += !o.pass;
    std::printf("%s criterion %d (%s): %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.title.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
