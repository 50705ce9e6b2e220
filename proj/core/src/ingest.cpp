#include "affect/ingest.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "affect/error.hpp"
#include "affect/format.hpp"
#include "affect/prng.hpp"
#include "json_io.hpp"

namespace affect {
namespace fs = std::filesystem;

namespace {

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return in;
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

class LineReader {
 public:
  LineReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  bool next(std::string& line) {
    if (!std::getline(in_, line)) return false;
    ++line_no_;
    if (!line.empty() && line.back() == '\r') fail("CR line ending (files must use LF)");
    return true;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw DataError(source_ + ":" + std::to_string(line_no_) + ": " + what);
  }

  std::size_t line_no() const { return line_no_; }

 private:
  std::istream& in_;
  std::string source_;
  std::size_t line_no_ = 0;
};

}  // namespace

// ---------------------------------------------------------------------------
// Feature files

FeatureStream read_features(std::istream& in, const std::string& modality, double frame_period_s,
                            const std::string& source) {
  LineReader reader(in, source);
  std::string line;
  if (!reader.next(line)) reader.fail("missing header");
  const auto header = split(line, ',');
  if (header.size() < 3 || header[0] != "frame" || header[1] != "valid") {
    reader.fail("header must be 'frame,valid,f0,...'");
  }
  const std::size_t dim = header.size() - 2;
  for (std::size_t k = 0; k < dim; ++k) {
    if (header[k + 2] != "f" + std::to_string(k)) {
      reader.fail("header column " + std::to_string(k + 2) + " must be 'f" + std::to_string(k) + "'");
    }
  }

  FeatureStream stream;
  stream.modality = modality;
  stream.frame_period_s = frame_period_s;
  stream.frames = Matrix(0, dim);
  std::vector<double> row(dim);
  while (reader.next(line)) {
    if (line.empty()) reader.fail("empty line");
    const auto cells = split(line, ',');
    if (cells.size() != dim + 2) {
      reader.fail("expected " + std::to_string(dim + 2) + " cells, got " + std::to_string(cells.size()));
    }
    std::uint64_t frame = 0;
    if (!parse_uint(cells[0], frame) || frame != stream.frames.rows()) {
      reader.fail("frame index must be " + std::to_string(stream.frames.rows()));
    }
    if (cells[1] != "0" && cells[1] != "1") reader.fail("valid must be 0 or 1");
    for (std::size_t k = 0; k < dim; ++k) {
      if (!parse_double(cells[k + 2], row[k])) {
        reader.fail("non-numeric cell '" + std::string(cells[k + 2]) + "'");
      }
    }
    stream.frames.append_row(row);
    stream.mask.valid.push_back(cells[1] == "1");
  }
  return stream;
}

FeatureStream load_features(const fs::path& path, const std::string& modality,
                            double frame_period_s) {
  auto in = open_input(path);
  return read_features(in, modality, frame_period_s, path.string());
}

void write_features(std::ostream& out, const FeatureStream& stream) {
  out << "frame,valid";
  for (std::size_t k = 0; k < stream.dim(); ++k) out << ",f" << k;
  out << '\n';
  for (std::size_t t = 0; t < stream.size(); ++t) {
    out << t << ',' << (stream.mask[t] ? '1' : '0');
    for (double v : stream.frames.row(t)) out << ',' << format_double(v);
    out << '\n';
  }
}

void save_features(const fs::path& path, const FeatureStream& stream) {
  auto out = open_output(path);
  write_features(out, stream);
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Annotation files

AffectTrace read_annotations(std::istream& in, AffectDimension dimension, double frame_period_s,
                             bool check_range, const std::string& source) {
  LineReader reader(in, source);
  std::string line;
  if (!reader.next(line) || line != "frame,value") reader.fail("header must be 'frame,value'");
  AffectTrace trace;
  trace.dimension = dimension;
  trace.frame_period_s = frame_period_s;
  while (reader.next(line)) {
    const auto cells = split(line, ',');
    if (cells.size() != 2) reader.fail("expected 2 cells, got " + std::to_string(cells.size()));
    std::uint64_t frame = 0;
    if (!parse_uint(cells[0], frame) || frame != trace.values.size()) {
      reader.fail("frame index must be " + std::to_string(trace.values.size()));
    }
    double v = 0.0;
    if (!parse_double(cells[1], v)) reader.fail("non-numeric value '" + std::string(cells[1]) + "'");
    if (check_range && (v < -1.0 || v > 1.0)) {
      reader.fail("value " + std::string(cells[1]) + " at frame " + std::to_string(frame) +
                  " outside [-1, 1]");
    }
    trace.values.push_back(v);
  }
  return trace;
}

AffectTrace load_annotations(const fs::path& path, AffectDimension dimension,
                             double frame_period_s, bool check_range) {
  auto in = open_input(path);
  return read_annotations(in, dimension, frame_period_s, check_range, path.string());
}

void write_annotations(std::ostream& out, std::span<const double> values) {
  out << "frame,value\n";
  for (std::size_t t = 0; t < values.size(); ++t) out << t << ',' << format_double(values[t]) << '\n';
}

void save_annotations(const fs::path& path, std::span<const double> values) {
  auto out = open_output(path);
  write_annotations(out, values);
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Manifest

DatasetManifest DatasetManifest::load(const fs::path& manifest_file) {
  auto in = open_input(manifest_file);
  std::stringstream buffer;
  buffer << in.rdbuf();
  const auto j = detail::parse_json(buffer.str(), manifest_file.string());

  DatasetManifest m;
  m.root = manifest_file.has_parent_path() ? manifest_file.parent_path() : fs::path(".");
  try {
    if (j.value("format", std::string()) != "affect-manifest/1") {
      throw DataError("unsupported manifest format (expected affect-manifest/1)");
    }
    m.frame_period_s = j.value("frame_period_s", kDefaultFramePeriod);
    for (const auto& s : j.at("subjects")) {
      ManifestEntry e;
      e.subject_id = s.at("id").get<std::string>();
      const auto split_name = s.at("split").get<std::string>();
      if (split_name == "train") e.split = Split::Train;
      else if (split_name == "dev") e.split = Split::Dev;
      else throw DataError("subject '" + e.subject_id + "': split must be train or dev");
      for (const auto& [name, path] : s.at("features").items()) {
        e.features[name] = path.get<std::string>();
      }
      for (const auto& [dim, path] : s.at("annotations").items()) {
        e.annotations[parse_dimension(dim)] = path.get<std::string>();
      }
      m.subjects.push_back(std::move(e));
    }
  } catch (const detail::json::exception& e) {
    throw DataError(manifest_file.string() + ": " + e.what());
  }
  return m;
}

std::string DatasetManifest::to_json_text() const {
  detail::json j;
  j["format"] = "affect-manifest/1";
  j["frame_period_s"] = frame_period_s;
  j["subjects"] = detail::json::array();
  for (const auto& e : subjects) {
    detail::json s;
    s["id"] = e.subject_id;
    s["split"] = e.split == Split::Train ? "train" : "dev";
    s["features"] = detail::json::object();
    for (const auto& [name, path] : e.features) s["features"][name] = path.generic_string();
    s["annotations"] = detail::json::object();
    for (const auto& [dim, path] : e.annotations) {
      s["annotations"][std::string(to_string(dim))] = path.generic_string();
    }
    j["subjects"].push_back(std::move(s));
  }
  return j.dump(2) + "\n";
}

void DatasetManifest::save(const fs::path& manifest_file) const {
  auto out = open_output(manifest_file);
  out << to_json_text();
  if (!out) throw DataError("failed writing '" + manifest_file.string() + "'");
}

void DatasetManifest::validate() const {
  bool any_train = false;
  bool any_dev = false;
  for (const auto& e : subjects) {
    (e.split == Split::Train ? any_train : any_dev) = true;
    for (const auto& [name, path] : e.features) {
      if (!fs::exists(root / path)) {
        throw DataError("manifest: feature file '" + (root / path).string() + "' does not exist");
      }
    }
    for (const auto& [dim, path] : e.annotations) {
      if (!fs::exists(root / path)) {
        throw DataError("manifest: annotation file '" + (root / path).string() + "' does not exist");
      }
    }
  }
  if (!any_train || !any_dev) throw DataError("manifest: train and dev splits must be non-empty");
}

DatasetSplit DatasetManifest::load_dataset() const {
  validate();
  DatasetSplit data;
  for (const auto& e : subjects) {
    SubjectRecord rec;
    rec.subject_id = e.subject_id;
    for (const auto& [name, path] : e.features) {
      rec.streams[name] = load_features(root / path, name, frame_period_s);
    }
    for (const auto& [dim, path] : e.annotations) {
      auto trace = load_annotations(root / path, dim, frame_period_s, true);
      trace.subject_id = e.subject_id;
      rec.gold[dim] = std::move(trace);
    }
    rec.validate(true);
    (e.split == Split::Train ? data.train : data.dev).push_back(std::move(rec));
  }
  data.validate();
  return data;
}

// ---------------------------------------------------------------------------
// Synthetic data

void SynthSpec::validate() const {
  if (n_subjects_train == 0 || n_subjects_dev == 0) throw DataError("synth: subject counts must be positive");
  if (frames_per_subject < 2) throw DataError("synth: frames_per_subject must be at least 2");
  if (!(latent_bandwidth_hz > 0.0)) throw DataError("synth: latent bandwidth must be positive");
  if (!(frame_period_s > 0.0)) throw DataError("synth: frame period must be positive");
  if (modalities.empty()) throw DataError("synth: at least one modality is required");
  for (const auto& m : modalities) {
    if (m.name.empty()) throw DataError("synth: modality name must be non-empty");
    if (m.dim == 0) throw DataError("synth: modality '" + m.name + "' needs a positive dim");
    if (!(m.noise_sigma >= 0.0)) throw DataError("synth: modality '" + m.name + "' noise must be >= 0");
    if (!(m.invalid_fraction >= 0.0 && m.invalid_fraction < 1.0)) {
      throw DataError("synth: modality '" + m.name + "' invalid fraction must be in [0, 1)");
    }
  }
}

namespace {

constexpr std::size_t kLatentComponents = 6;

std::vector<double> latent_trace(Prng& rng, std::size_t length, double bandwidth_hz,
                                 double period_s) {
  std::array<double, kLatentComponents> freq{}, amp{}, phase{};
  double power = 0.0;
  for (std::size_t k = 0; k < kLatentComponents; ++k) {
    freq[k] = bandwidth_hz * rng.uniform(0.1, 1.0);
    amp[k] = rng.uniform(0.5, 1.0);
    phase[k] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    power += 0.5 * amp[k] * amp[k];
  }
  const double norm = 1.0 / std::sqrt(power);
  std::vector<double> out(length);
  for (std::size_t t = 0; t < length; ++t) {
    const double time = static_cast<double>(t) * period_s;
    double s = 0.0;
    for (std::size_t k = 0; k < kLatentComponents; ++k) {
      s += amp[k] * std::sin(2.0 * std::numbers::pi * freq[k] * time + phase[k]);
    }
    out[t] = std::tanh(0.8 * s * norm);
  }
  return out;
}

struct Projection {
  std::vector<std::array<double, 2>> weights;  // per column: (arousal, valence)
  std::vector<double> offset;
};

}  // namespace

DatasetSplit generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  Prng rng(spec.seed);

  std::vector<Projection> projections;
  for (const auto& m : spec.modalities) {
    Projection p;
    for (std::size_t k = 0; k < m.dim; ++k) {
      if (m.identity_projection) {
        p.weights.push_back(k % 2 == 0 ? std::array{1.0, 0.0} : std::array{0.0, 1.0});
        p.offset.push_back(0.0);
      } else {
        const double wa = rng.normal();
        const double wv = rng.normal();
        p.weights.push_back({wa, wv});
        p.offset.push_back(0.5 * rng.normal());
      }
    }
    projections.push_back(std::move(p));
  }

  const std::size_t frames = spec.frames_per_subject;
  const std::size_t lag = spec.annotation_lag_frames;
  auto make_subject = [&](const std::string& id) {
    SubjectRecord rec;
    rec.subject_id = id;
    std::array<std::vector<double>, 2> latent;
    for (std::size_t d = 0; d < 2; ++d) {
      latent[d] = latent_trace(rng, frames + lag, spec.latent_bandwidth_hz, spec.frame_period_s);
      AffectTrace gold;
      gold.dimension = d == 0 ? AffectDimension::Arousal : AffectDimension::Valence;
      gold.frame_period_s = spec.frame_period_s;
      gold.subject_id = id;
      gold.values.assign(latent[d].begin(), latent[d].begin() + static_cast<std::ptrdiff_t>(frames));
      rec.gold[gold.dimension] = std::move(gold);
    }
    for (std::size_t m = 0; m < spec.modalities.size(); ++m) {
      const auto& ms = spec.modalities[m];
      const auto& proj = projections[m];
      FeatureStream s;
      s.modality = ms.name;
      s.frame_period_s = spec.frame_period_s;
      s.frames = Matrix(frames, ms.dim);
      for (std::size_t t = 0; t < frames; ++t) {
        const double a = latent[0][t + lag];
        const double v = latent[1][t + lag];
        for (std::size_t k = 0; k < ms.dim; ++k) {
          const double noise = ms.noise_sigma > 0.0 ? ms.noise_sigma * rng.normal() : 0.0;
          s.frames(t, k) = proj.weights[k][0] * a + proj.weights[k][1] * v + proj.offset[k] + noise;
        }
      }
      s.mask = FrameMask::all_valid(frames);
      const auto invalid = static_cast<std::size_t>(
          std::llround(ms.invalid_fraction * static_cast<double>(frames)));
      std::vector<std::size_t> order(frames);
      std::iota(order.begin(), order.end(), std::size_t{0});
      for (std::size_t k = 0; k < invalid; ++k) {
        std::swap(order[k], order[k + rng.index(frames - k)]);
        const std::size_t t = order[k];
        s.mask.valid[t] = false;
        for (auto& x : s.frames.row(t)) x = 0.0;
      }
      rec.streams[ms.name] = std::move(s);
    }
    return rec;
  };

  DatasetSplit data;
  auto id = [](const char* prefix, std::size_t i) {
    std::string num = std::to_string(i + 1);
    if (num.size() < 2) num = "0" + num;
    return std::string(prefix) + num;
  };
  for (std::size_t i = 0; i < spec.n_subjects_train; ++i) data.train.push_back(make_subject(id("train_", i)));
  for (std::size_t i = 0; i < spec.n_subjects_dev; ++i) data.dev.push_back(make_subject(id("dev_", i)));
  return data;
}

namespace detail {

json synth_to_json(const SynthSpec& spec) {
  json j;
  j["subjects_train"] = spec.n_subjects_train;
  j["subjects_dev"] = spec.n_subjects_dev;
  j["frames_per_subject"] = spec.frames_per_subject;
  j["latent_bandwidth_hz"] = spec.latent_bandwidth_hz;
  j["frame_period_s"] = spec.frame_period_s;
  j["annotation_lag_frames"] = spec.annotation_lag_frames;
  j["seed"] = spec.seed;
  j["modalities"] = json::array();
  for (const auto& m : spec.modalities) {
    j["modalities"].push_back({{"name", m.name},
                               {"dim", m.dim},
                               {"noise_sigma", m.noise_sigma},
                               {"invalid_fraction", m.invalid_fraction},
                               {"identity_projection", m.identity_projection}});
  }
  return j;
}

SynthSpec synth_from_json(const json& j) {
  require_keys(j, {"subjects_train", "subjects_dev", "frames_per_subject", "latent_bandwidth_hz",
                   "frame_period_s", "annotation_lag_frames", "seed", "modalities"},
               "synth");
  SynthSpec s;
  try {
    s.n_subjects_train = j.value("subjects_train", s.n_subjects_train);
    s.n_subjects_dev = j.value("subjects_dev", s.n_subjects_dev);
    s.frames_per_subject = j.value("frames_per_subject", s.frames_per_subject);
    s.latent_bandwidth_hz = j.value("latent_bandwidth_hz", s.latent_bandwidth_hz);
    s.frame_period_s = j.value("frame_period_s", s.frame_period_s);
    s.annotation_lag_frames = j.value("annotation_lag_frames", s.annotation_lag_frames);
    s.seed = j.value("seed", s.seed);
    if (j.contains("modalities")) {
      s.modalities.clear();
      for (const auto& m : j.at("modalities")) {
        require_keys(m, {"name", "dim", "noise_sigma", "invalid_fraction", "identity_projection"},
                     "synth.modalities[]");
        ModalitySpec ms;
        ms.name = m.at("name").get<std::string>();
        ms.dim = m.value("dim", ms.dim);
        ms.noise_sigma = m.value("noise_sigma", ms.noise_sigma);
        ms.invalid_fraction = m.value("invalid_fraction", ms.invalid_fraction);
        ms.identity_projection = m.value("identity_projection", ms.identity_projection);
        s.modalities.push_back(std::move(ms));
      }
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("synth: ") + e.what());
  }
  s.validate();
  return s;
}

}  // namespace detail

SynthSpec SynthSpec::from_json_text(std::string_view text) {
  return detail::synth_from_json(detail::parse_json(text, "synth spec"));
}

std::string SynthSpec::to_json_text() const { return detail::synth_to_json(*this).dump(2) + "\n"; }

DatasetManifest write_dataset(const DatasetSplit& data, const fs::path& out_dir) {
  DatasetManifest m;
  m.root = out_dir;
  bool have_period = false;
  auto emit = [&](const SubjectRecord& rec, Split split) {
    ManifestEntry e;
    e.subject_id = rec.subject_id;
    e.split = split;
    for (const auto& [name, stream] : rec.streams) {
      if (!have_period) {
        m.frame_period_s = stream.frame_period_s;
        have_period = true;
      }
      const fs::path rel = fs::path("features") / (rec.subject_id + "." + name + ".csv");
      save_features(out_dir / rel, stream);
      e.features[name] = rel;
    }
    for (const auto& [dim, trace] : rec.gold) {
      const fs::path rel =
          fs::path("annotations") / (rec.subject_id + "." + std::string(to_string(dim)) + ".csv");
      save_annotations(out_dir / rel, trace.values);
      e.annotations[dim] = rel;
    }
    m.subjects.push_back(std::move(e));
  };
  for (const auto& r : data.train) emit(r, Split::Train);
  for (const auto& r : data.dev) emit(r, Split::Dev);
  m.save(out_dir / "manifest.json");
  return m;
}

}  // namespace affect
