#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "affect/error.hpp"
#include "affect/ingest.hpp"
#include "affect/metrics.hpp"
#include "affect/prng.hpp"
#include "affect/svr.hpp"
#include "oracles.hpp"

using namespace affect;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("affect_ingest_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST_CASE("minimal feature file") {
  std::istringstream in("frame,valid,f0,f1\n0,1,0.5,-1\n1,0,0,0\n2,1,1e-3,2\n");
  const auto s = read_features(in, "video");
  CHECK(s.dim() == 2);
  CHECK(s.size() == 3);
  CHECK(s.mask.valid == std::vector<bool>{true, false, true});
  CHECK(s.frames(2, 0) == 1e-3);
}

TEST_CASE("feature parse errors carry source and line") {
  auto expect = [](const std::string& text, const std::string& fragment) {
    std::istringstream in(text);
    try {
      read_features(in, "v", kDefaultFramePeriod, "f.csv");
      FAIL("no error for: " << text);
    } catch (const DataError& e) {
      const std::string what = e.what();
      CHECK_MESSAGE(what.find(fragment) != std::string::npos, what);
    }
  };
  expect("frame,valid\n", "f.csv:1:");
  expect("frame,valid,f0\n0,1,x\n", "f.csv:2:");
  expect("frame,valid,f0\n0,2,1\n", "f.csv:2:");
  expect("frame,valid,f0\n1,1,1\n", "f.csv:2:");
  expect("frame,valid,f0\n0,1,1,2\n", "f.csv:2:");
  expect("frame,valid,f0\r\n", "f.csv:1:");
  expect("frame,valid,f0\n0,1,nan\n", "f.csv:2:");
}

TEST_CASE("annotation files") {
  std::istringstream ok("frame,value\n0,0\n1,0\n");
  const auto t = read_annotations(ok, AffectDimension::Valence);
  CHECK(t.values == std::vector<double>{0, 0});
  CHECK(t.dimension == AffectDimension::Valence);

  std::istringstream bad("frame,value\n0,0\n1,1.5\n");
  try {
    read_annotations(bad, AffectDimension::Arousal, kDefaultFramePeriod, true, "g.csv");
    FAIL("range not checked");
  } catch (const DataError& e) {
    const std::string what = e.what();
    CHECK(what.find("g.csv:3:") != std::string::npos);
    CHECK(what.find("frame 1") != std::string::npos);
  }
  std::istringstream pred("frame,value\n0,1.5\n");
  CHECK(read_annotations(pred, AffectDimension::Arousal, kDefaultFramePeriod, false).values[0] == 1.5);
}

TEST_CASE("feature and annotation round-trips are bit-exact") {
  Prng rng(99);
  for (int k = 0; k < 30; ++k) {
    FeatureStream s;
    s.modality = "m";
    const std::size_t n = 1 + rng.index(50), d = 1 + rng.index(6);
    s.frames = Matrix(n, d);
    for (std::size_t t = 0; t < n; ++t) {
      s.mask.valid.push_back(rng.uniform() < 0.8);
      for (std::size_t c = 0; c < d; ++c) s.frames(t, c) = rng.normal() * std::pow(10.0, rng.uniform(-8, 8));
    }
    std::stringstream io;
    write_features(io, s);
    const auto back = read_features(io, "m");
    CHECK(back.mask == s.mask);
    for (std::size_t i = 0; i < s.frames.data().size(); ++i) {
      CHECK(same_bits(back.frames.data()[i], s.frames.data()[i]));
    }

    const auto values = oracle::random_vector(rng, n, -1, 1);
    std::stringstream io2;
    write_annotations(io2, values);
    CHECK(read_annotations(io2, AffectDimension::Arousal).values == values);
  }
}

TEST_CASE("synthetic data is deterministic and well formed") {
  SynthSpec spec;
  spec.n_subjects_train = 2;
  spec.n_subjects_dev = 2;
  spec.frames_per_subject = 300;
  spec.modalities = {{"video", 3, 0.2, 0.22, false}, {"audio", 2, 0.1, 0.0, false}};
  spec.seed = 5;
  const auto a = generate_synthetic(spec);
  const auto b = generate_synthetic(spec);
  REQUIRE(a.train.size() == 2);
  REQUIRE(a.dev.size() == 2);
  CHECK(a.train[0].subject_id == "train_01");
  CHECK(a.dev[1].subject_id == "dev_02");
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& s = a.train[i];
    CHECK(s.streams.at("video").frames == b.train[i].streams.at("video").frames);
    CHECK(s.streams.at("video").mask.valid_count() == 300 - 66);  // 22% invalid
    CHECK(s.streams.at("audio").mask.valid_count() == 300);
    for (double v : s.gold.at(AffectDimension::Arousal).values) {
      CHECK(v > -1.0);
      CHECK(v < 1.0);
    }
    CHECK_NOTHROW(s.validate(true));
  }
  spec.seed = 6;
  CHECK_FALSE(generate_synthetic(spec).train[0].streams.at("video").frames ==
              a.train[0].streams.at("video").frames);
}

TEST_CASE("noiseless identity projection reproduces gold") {
  SynthSpec spec;
  spec.n_subjects_train = 1;
  spec.n_subjects_dev = 1;
  spec.frames_per_subject = 200;
  spec.modalities = {{"v", 1, 0.0, 0.0, true}};
  const auto d = generate_synthetic(spec);
  const auto& s = d.train[0];
  std::vector<double> feat(200);
  for (std::size_t t = 0; t < 200; ++t) feat[t] = s.streams.at("v").frames(t, 0);
  CHECK(feat == s.gold.at(AffectDimension::Arousal).values);
}

TEST_CASE("annotation lag delays gold against features") {
  SynthSpec spec;
  spec.n_subjects_train = 1;
  spec.n_subjects_dev = 1;
  spec.frames_per_subject = 500;
  spec.annotation_lag_frames = 30;
  spec.modalities = {{"v", 1, 0.0, 0.0, true}};
  const auto d = generate_synthetic(spec);
  const auto& s = d.train[0];
  const auto& g = s.gold.at(AffectDimension::Arousal).values;
  // gold at t + lag equals the feature at t
  for (std::size_t t = 0; t + 30 < 500; ++t) CHECK(g[t + 30] == s.streams.at("v").frames(t, 0));
}

TEST_CASE("manifest round trip through disk") {
  SynthSpec spec;
  spec.n_subjects_train = 2;
  spec.n_subjects_dev = 1;
  spec.frames_per_subject = 50;
  const auto data = generate_synthetic(spec);
  const auto dir = scratch("manifest");
  write_dataset(data, dir);
  const auto m = DatasetManifest::load(dir / "manifest.json");
  CHECK(m.subjects.size() == 3);
  CHECK_NOTHROW(m.validate());
  const auto back = m.load_dataset();
  CHECK(back.train.size() == 2);
  CHECK(back.train[1].streams.at("video").frames == data.train[1].streams.at("video").frames);
  CHECK(back.dev[0].gold.at(AffectDimension::Valence).values ==
        data.dev[0].gold.at(AffectDimension::Valence).values);

  // same seed, second directory: identical bytes
  const auto dir2 = scratch("manifest2");
  write_dataset(generate_synthetic(spec), dir2);
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), dir);
    CHECK(slurp(entry.path()) == slurp(dir2 / rel));
  }

  fs::remove(dir / "features" / "train_01.video.csv");
  CHECK_THROWS_AS(DatasetManifest::load(dir / "manifest.json").validate(), DataError);
}

TEST_CASE("manifest parse errors") {
  const auto dir = scratch("badmanifest");
  std::ofstream(dir / "m.json") << R"({"format": "affect-manifest/9", "subjects": []})";
  CHECK_THROWS_AS(DatasetManifest::load(dir / "m.json"), DataError);
  std::ofstream(dir / "n.json") << "{ not json";
  CHECK_THROWS_AS(DatasetManifest::load(dir / "n.json"), DataError);
}

TEST_CASE("synth spec json") {
  SynthSpec spec;
  spec.frames_per_subject = 321;
  spec.modalities.push_back({"audio", 88, 0.3, 0.12, false});
  const auto back = SynthSpec::from_json_text(spec.to_json_text());
  CHECK(back.frames_per_subject == 321);
  CHECK(back.modalities.size() == 2);
  CHECK(back.modalities[1].dim == 88);
  CHECK(back.to_json_text() == spec.to_json_text());
  CHECK_THROWS_AS(SynthSpec::from_json_text(R"({"frames": 3})"), DataError);
  CHECK_THROWS(SynthSpec::from_json_text(R"({"frames_per_subject": 0})").validate());
}
