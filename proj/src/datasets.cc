// Copyright 2026 The lmactd Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "lmactd/datasets.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "lmactd/error.h"
#include "lmactd/hashing.h"
#include "lmactd/wav_io.h"

namespace lmactd {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kMinBandHz = 200.0;

double Uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::vector<double> Gaussian(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> out(n);
  for (auto& v : out) v = dist(rng);
  return out;
}

// Zero-phase FFT-domain filter: spectrum multiplied by gain(f).
template <typename Gain>
std::vector<double> FftFilter(const std::vector<double>& x, int sample_rate, Gain gain) {
  auto t = torch::from_blob(const_cast<double*>(x.data()),
                            {static_cast<int64_t>(x.size())}, torch::kFloat64);
  auto spec = torch::fft::rfft(t);
  const int64_t bins = spec.size(0);
  auto g = torch::empty({bins}, torch::kFloat64);
  auto ga = g.accessor<double, 1>();
  for (int64_t k = 0; k < bins; ++k) {
    ga[k] = gain(static_cast<double>(k) * sample_rate / static_cast<double>(x.size()));
  }
  auto y = torch::fft::irfft(spec * g, static_cast<int64_t>(x.size())).contiguous();
  return std::vector<double>(y.data_ptr<double>(), y.data_ptr<double>() + y.numel());
}

// Tukey window value for position u in [0, 1].
double Tukey(double u, double taper) {
  if (u < 0.0 || u > 1.0) return 0.0;
  if (taper <= 0.0) return 1.0;
  const double h = taper / 2.0;
  if (u < h) return 0.5 * (1.0 - std::cos(std::numbers::pi * u / h));
  if (u > 1.0 - h) return 0.5 * (1.0 - std::cos(std::numbers::pi * (1.0 - u) / h));
  return 1.0;
}

double Rms(const std::vector<double>& x, std::size_t begin, std::size_t end) {
  double acc = 0.0;
  for (std::size_t i = begin; i < end; ++i) acc += x[i] * x[i];
  return end > begin ? std::sqrt(acc / static_cast<double>(end - begin)) : 0.0;
}

// One class prototype inside [a, b] Hz.
std::vector<double> RenderPrototype(PrototypeKind kind, double a, double b, std::size_t T,
                                    int sr, std::mt19937_64& rng, std::size_t* active_begin,
                                    std::size_t* active_end) {
  std::vector<double> y(T, 0.0);
  const double clip = static_cast<double>(T) / sr;
  const double w = b - a;
  auto place = [&](double lo_frac, double hi_frac) {
    const double dur = Uniform(rng, lo_frac, hi_frac) * clip;
    const double onset = Uniform(rng, 0.0, clip - dur);
    *active_begin = static_cast<std::size_t>(onset * sr);
    *active_end = std::min(T, static_cast<std::size_t>((onset + dur) * sr));
    return std::pair{onset, dur};
  };

  switch (kind) {
    case PrototypeKind::kToneBurst: {
      const double f = Uniform(rng, a + 0.2 * w, b - 0.2 * w);
      const double phase = Uniform(rng, 0.0, kTwoPi);
      auto [onset, dur] = place(0.25, 0.5);
      for (std::size_t t = *active_begin; t < *active_end; ++t) {
        const double s = static_cast<double>(t) / sr;
        y[t] = Tukey((s - onset) / dur, 0.5) * std::sin(kTwoPi * f * s + phase);
      }
      break;
    }
    case PrototypeKind::kChirp: {
      double f0 = a + 0.1 * w, f1 = b - 0.1 * w;
      if (rng() & 1u) std::swap(f0, f1);
      auto [onset, dur] = place(0.4, 0.7);
      for (std::size_t t = *active_begin; t < *active_end; ++t) {
        const double s = static_cast<double>(t) / sr - onset;
        const double ph = kTwoPi * (f0 * s + 0.5 * (f1 - f0) * s * s / dur);
        y[t] = Tukey(s / dur, 0.2) * std::sin(ph);
      }
      break;
    }
    case PrototypeKind::kAmNoiseBand: {
      const double lo = a + 0.05 * w, hi = b - 0.05 * w;
      auto band = FftFilter(Gaussian(T, rng), sr,
                            [&](double f) { return (f >= lo && f <= hi) ? 1.0 : 0.0; });
      const double rate = Uniform(rng, 3.0, 8.0);
      const double phase = Uniform(rng, 0.0, kTwoPi);
      auto [onset, dur] = place(0.5, 0.9);
      for (std::size_t t = *active_begin; t < *active_end; ++t) {
        const double s = static_cast<double>(t) / sr;
        const double am = 1.0 - 0.8 * 0.5 * (1.0 + std::cos(kTwoPi * rate * s + phase));
        y[t] = Tukey((s - onset) / dur, 0.2) * am * band[t];
      }
      break;
    }
    case PrototypeKind::kHarmonicStack: {
      const double f0 = 0.25 * w * Uniform(rng, 0.9, 1.1);
      std::vector<double> partials;
      for (int n = 1; n * f0 <= b; ++n) {
        if (n * f0 >= a + 0.05 * w && n * f0 <= b - 0.05 * w) partials.push_back(n * f0);
      }
      auto [onset, dur] = place(0.3, 0.6);
      for (std::size_t p = 0; p < partials.size(); ++p) {
        const double amp = 1.0 / static_cast<double>(p + 1);
        const double phase = Uniform(rng, 0.0, kTwoPi);
        for (std::size_t t = *active_begin; t < *active_end; ++t) {
          const double s = static_cast<double>(t) / sr;
          y[t] += amp * Tukey((s - onset) / dur, 0.25) * std::sin(kTwoPi * partials[p] * s + phase);
        }
      }
      break;
    }
    case PrototypeKind::kClickTrain: {
      const double fc = Uniform(rng, a + 0.4 * w, b - 0.4 * w);
      const double rate = Uniform(rng, 6.0, 12.0);
      const double grain = 0.012;
      const auto glen = static_cast<std::size_t>(grain * sr);
      double at = Uniform(rng, 0.0, 1.0 / rate);
      *active_begin = T;
      *active_end = 0;
      while (at + grain < clip) {
        const auto start = static_cast<std::size_t>(at * sr);
        for (std::size_t i = 0; i < glen && start + i < T; ++i) {
          const double u = static_cast<double>(i) / static_cast<double>(glen - 1);
          y[start + i] += 0.5 * (1.0 - std::cos(kTwoPi * u)) *
                          std::sin(kTwoPi * fc * static_cast<double>(i) / sr);
        }
        *active_begin = std::min(*active_begin, start);
        *active_end = std::max(*active_end, std::min(T, start + glen));
        at += (1.0 / rate) * Uniform(rng, 0.85, 1.15);
      }
      break;
    }
  }
  return y;
}

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  for (auto& s : out) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    s = b == std::string::npos ? "" : s.substr(b, e - b + 1);
  }
  return out;
}

std::string CsvField(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

}  // namespace

const char* SplitName(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    case Split::kTest: return "test";
  }
  return "?";
}

Split ParseSplit(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "valid" || name == "validation") return Split::kValid;
  if (name == "test") return Split::kTest;
  throw InvalidArgument("unknown split '" + name + "'");
}

const char* ContaminationName(ContaminationKind k) {
  switch (k) {
    case ContaminationKind::kNone: return "none";
    case ContaminationKind::kInClassMixture: return "in-class-mixture";
    case ContaminationKind::kWhiteNoise: return "white-noise";
    case ContaminationKind::kSpeechLike: return "speech-like";
    case ContaminationKind::kAugmentation: return "augmentation";
  }
  return "?";
}

ContaminationKind ParseContamination(const std::string& name) {
  for (auto k : {ContaminationKind::kNone, ContaminationKind::kInClassMixture,
                 ContaminationKind::kWhiteNoise, ContaminationKind::kSpeechLike,
                 ContaminationKind::kAugmentation}) {
    if (name == ContaminationName(k)) return k;
  }
  throw InvalidArgument("unknown contamination mode '" + name + "'");
}

const char* PrototypeName(PrototypeKind k) {
  switch (k) {
    case PrototypeKind::kToneBurst: return "tone_burst";
    case PrototypeKind::kChirp: return "chirp";
    case PrototypeKind::kAmNoiseBand: return "am_noise_band";
    case PrototypeKind::kHarmonicStack: return "harmonic_stack";
    case PrototypeKind::kClickTrain: return "click_train";
  }
  return "?";
}

std::vector<std::size_t> Corpus::Indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].split == split) out.push_back(i);
  }
  return out;
}

void Corpus::Validate() const {
  LMACTD_CHECK(!samples.empty(), InvalidArgument, "corpus is empty");
  LMACTD_CHECK(!class_names.empty(), InvalidArgument, "corpus has no classes");
  for (const auto& s : samples) {
    LMACTD_CHECK(s.wave.sample_rate == sample_rate, InvalidArgument,
                 "sample '" + s.id + "' has rate " + std::to_string(s.wave.sample_rate) +
                     ", corpus rate is " + std::to_string(sample_rate));
    LMACTD_CHECK(s.class_id >= 0 && s.class_id < NumClasses(), InvalidArgument,
                 "sample '" + s.id + "' has out-of-range class id");
    LMACTD_CHECK(s.contamination.kind == ContaminationKind::kNone ||
                     std::isfinite(s.contamination.snr_db),
                 InvalidArgument, "sample '" + s.id + "' has non-finite contamination SNR");
  }
}

std::string Corpus::Digest() const {
  Sha256 h;
  for (const auto& n : class_names) h.Update(n).Update("\n");
  h.UpdatePod<int32_t>(sample_rate);
  for (const auto& s : samples) {
    h.Update(s.id).UpdatePod<int32_t>(s.class_id).UpdatePod<int32_t>(static_cast<int32_t>(s.split));
    h.UpdatePod<int32_t>(static_cast<int32_t>(s.contamination.kind));
    h.Update(s.wave.samples.data(), s.wave.samples.size() * sizeof(float));
  }
  return h.HexDigest();
}

std::vector<ClassBand> SyntheticBandLayout(int num_classes, int sample_rate) {
  LMACTD_CHECK(num_classes >= 2, InvalidArgument, "need at least 2 classes");
  const double lo = 150.0, hi = 0.45 * sample_rate;
  const double width = (hi - lo) / num_classes;
  LMACTD_CHECK(width >= kMinBandHz, InvalidArgument,
               "infeasible band layout: " + std::to_string(num_classes) + " classes at " +
                   std::to_string(sample_rate) + " Hz gives " + std::to_string(width) +
                   " Hz bands (< " + std::to_string(kMinBandHz) + ")");
  std::vector<ClassBand> bands(num_classes);
  for (int k = 0; k < num_classes; ++k) {
    bands[k] = {lo + k * width, lo + (k + 1) * width, static_cast<PrototypeKind>(k % 5)};
  }
  return bands;
}

SplitCounts StratifiedSplitCounts(int per_class) {
  SplitCounts c;
  c.valid = std::max(1, per_class / 5);
  c.test = c.valid;
  c.train = per_class - c.valid - c.test;
  return c;
}

Corpus GenerateSyntheticCorpus(const SyntheticCorpusOptions& opts) {
  LMACTD_CHECK(opts.per_class >= 4, InvalidArgument, "per_class must be >= 4");
  LMACTD_CHECK(opts.sample_rate > 0 && opts.clip_seconds > 0.0, InvalidArgument,
               "clip length and sample rate must be positive");
  const auto T = static_cast<std::size_t>(std::llround(opts.clip_seconds * opts.sample_rate));
  LMACTD_CHECK(T >= static_cast<std::size_t>(RegularizerStftConfig().window_length),
               InvalidArgument, "clip shorter than one STFT window");
  const auto bands = SyntheticBandLayout(opts.num_classes, opts.sample_rate);
  const SplitCounts counts = StratifiedSplitCounts(opts.per_class);

  Corpus corpus;
  corpus.sample_rate = opts.sample_rate;
  for (int k = 0; k < opts.num_classes; ++k) {
    corpus.class_names.push_back("c" + std::to_string(k) + "_" + PrototypeName(bands[k].kind));
  }
  for (int k = 0; k < opts.num_classes; ++k) {
    const ClassBand& band = bands[k];
    const double inset = 0.1 * (band.hi_hz - band.lo_hz);
    for (int n = 0; n < opts.per_class; ++n) {
      std::seed_seq seq{static_cast<uint32_t>(opts.seed), static_cast<uint32_t>(opts.seed >> 32),
                        static_cast<uint32_t>(k), static_cast<uint32_t>(n)};
      std::mt19937_64 rng(seq);
      std::size_t b = 0, e = T;
      auto y = RenderPrototype(band.kind, band.lo_hz + inset, band.hi_hz - inset, T,
                               opts.sample_rate, rng, &b, &e);
      // Broadband floor 25-35 dB below the active prototype.
      const double level = Rms(y, b, e) * std::pow(10.0, -Uniform(rng, 25.0, 35.0) / 20.0);
      const auto floor = Gaussian(T, rng);
      double peak = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        y[t] += level * floor[t];
        peak = std::max(peak, std::abs(y[t]));
      }
      const double target = Uniform(rng, 0.3, 0.9);
      std::vector<float> samples(T);
      for (std::size_t t = 0; t < T; ++t) {
        samples[t] = static_cast<float>(peak > 0.0 ? y[t] * target / peak : 0.0);
      }
      LabeledSample s;
      s.id = corpus.class_names[k] + "_" + std::to_string(n);
      s.wave = Waveform(std::move(samples), opts.sample_rate);
      s.class_id = k;
      s.split = n < counts.train ? Split::kTrain
                : n < counts.train + counts.valid ? Split::kValid
                                                  : Split::kTest;
      corpus.samples.push_back(std::move(s));
    }
  }
  corpus.provenance = {{"generator", "synthetic"},
                       {"num_classes", opts.num_classes},
                       {"per_class", opts.per_class},
                       {"clip_seconds", opts.clip_seconds},
                       {"sample_rate", opts.sample_rate},
                       {"seed", opts.seed}};
  nlohmann::json jb = nlohmann::json::array();
  for (const auto& b : bands) {
    jb.push_back({{"lo_hz", b.lo_hz}, {"hi_hz", b.hi_hz}, {"prototype", PrototypeName(b.kind)}});
  }
  corpus.provenance["bands"] = jb;
  corpus.Validate();
  return corpus;
}

Corpus LoadWavCorpus(const std::filesystem::path& root, const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  LMACTD_CHECK(in.good(), IoError, "cannot open manifest " + manifest.string());
  std::string line;
  LMACTD_CHECK(static_cast<bool>(std::getline(in, line)), IoError,
               "empty manifest " + manifest.string());
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line = line.substr(3);
  const auto header = SplitCsvLine(line);
  LMACTD_CHECK(header == std::vector<std::string>({"relative_path", "class_name", "split"}),
               IoError, "manifest header must be relative_path,class_name,split");

  struct Row {
    std::string path, cls;
    Split split;
  };
  std::vector<Row> rows;
  std::set<std::string> seen;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = SplitCsvLine(line);
    LMACTD_CHECK(f.size() == 3, IoError,
                 manifest.string() + ":" + std::to_string(line_no) + ": expected 3 columns");
    LMACTD_CHECK(seen.insert(f[0]).second, IoError,
                 "duplicate entry '" + f[0] + "' in " + manifest.string());
    rows.push_back({f[0], f[1], ParseSplit(f[2])});
  }
  LMACTD_CHECK(!rows.empty(), IoError, "manifest has no rows: " + manifest.string());

  std::set<std::string> names;
  for (const auto& r : rows) names.insert(r.cls);
  Corpus corpus;
  corpus.class_names.assign(names.begin(), names.end());
  std::map<std::string, int> ids;
  for (std::size_t i = 0; i < corpus.class_names.size(); ++i) ids[corpus.class_names[i]] = i;

  for (const auto& r : rows) {
    const auto path = root / r.path;
    LMACTD_CHECK(std::filesystem::exists(path), IoError, "missing file " + path.string());
    LabeledSample s;
    s.id = r.path;
    s.wave = ReadWav(path);
    s.wave.Validate();
    if (corpus.samples.empty()) corpus.sample_rate = s.wave.sample_rate;
    LMACTD_CHECK(s.wave.sample_rate == corpus.sample_rate, IoError,
                 "inconsistent sample rate in " + path.string() + ": " +
                     std::to_string(s.wave.sample_rate) + " vs " +
                     std::to_string(corpus.sample_rate));
    s.class_id = ids.at(r.cls);
    s.split = r.split;
    corpus.samples.push_back(std::move(s));
  }
  corpus.provenance = {{"manifest", manifest.string()}, {"root", root.string()}};
  corpus.Validate();
  return corpus;
}

void ExportCorpus(const Corpus& corpus, const std::filesystem::path& dir) {
  corpus.Validate();
  std::filesystem::create_directories(dir / "audio");
  std::ofstream csv(dir / "manifest.csv", std::ios::trunc);
  LMACTD_CHECK(csv.good(), IoError, "cannot write " + (dir / "manifest.csv").string());
  csv << "relative_path,class_name,split\n";
  for (const auto& s : corpus.samples) {
    const std::string rel = "audio/" + s.id + ".wav";
    WriteWav(dir / rel, s.wave, WavFormat::kFloat32);
    csv << CsvField(rel) << ',' << CsvField(corpus.class_names[s.class_id]) << ','
        << SplitName(s.split) << '\n';
  }
  nlohmann::json prov = corpus.provenance;
  prov["digest"] = corpus.Digest();
  prov["class_names"] = corpus.class_names;
  std::ofstream(dir / "provenance.json", std::ios::trunc) << prov.dump(2) << '\n';
}

LabeledSample AugmentWithNoise(const LabeledSample& sample, const std::vector<Waveform>& noise_pool,
                               double snr_lo_db, double snr_hi_db, std::mt19937_64& rng) {
  LMACTD_CHECK(!noise_pool.empty(), InvalidArgument, "noise pool is empty");
  LMACTD_CHECK(snr_lo_db <= snr_hi_db, InvalidArgument, "SNR range must satisfy lo <= hi");
  const auto idx = std::uniform_int_distribution<std::size_t>(0, noise_pool.size() - 1)(rng);
  const double snr = snr_lo_db == snr_hi_db ? snr_lo_db : Uniform(rng, snr_lo_db, snr_hi_db);
  const auto& noise = noise_pool[idx];
  LMACTD_CHECK(!noise.samples.empty(), InvalidArgument, "noise pool entry is empty");
  const auto offset = std::uniform_int_distribution<std::size_t>(0, noise.size() - 1)(rng);
  LabeledSample out = sample;
  out.wave = MixAtSnr(sample.wave, noise, snr, offset).mixture;
  out.contamination = {ContaminationKind::kAugmentation, snr,
                       "pool#" + std::to_string(idx) + "@" + std::to_string(offset)};
  return out;
}

Waveform WhiteNoise(std::size_t length, int sample_rate, std::mt19937_64& rng) {
  const auto g = Gaussian(length, rng);
  std::vector<float> out(length);
  for (std::size_t i = 0; i < length; ++i) out[i] = static_cast<float>(0.1 * g[i]);
  return Waveform(std::move(out), sample_rate);
}

Waveform SpeechSurrogate(std::size_t length, int sample_rate, std::mt19937_64& rng) {
  // Formant centres scale with the rate so the surrogate stays below Nyquist.
  const double nyq = sample_rate / 2.0;
  const double scale = std::min(1.0, nyq / 5000.0);
  const std::array<double, 4> centres{500 * scale, 1500 * scale, 2500 * scale, 3500 * scale};
  const std::array<double, 4> widths{120 * scale, 180 * scale, 240 * scale, 300 * scale};
  const std::array<double, 4> gains{1.0, 0.6, 0.35, 0.2};
  auto shaped = FftFilter(Gaussian(length, rng), sample_rate, [&](double f) {
    double g = 0.0;
    for (int i = 0; i < 4; ++i) {
      const double d = (f - centres[i]) / widths[i];
      g += gains[i] * std::exp(-0.5 * d * d);
    }
    return g;
  });
  const double phase = Uniform(rng, 0.0, kTwoPi);
  std::vector<float> out(length);
  const double rms = std::max(Rms(shaped, 0, length), 1e-12);
  for (std::size_t t = 0; t < length; ++t) {
    const double s = static_cast<double>(t) / sample_rate;
    const double am = 0.5 * (1.0 + std::sin(kTwoPi * 4.0 * s + phase));
    out[t] = static_cast<float>(0.1 * am * shaped[t] / rms);
  }
  return Waveform(std::move(out), sample_rate);
}

Corpus MakeOodCorpus(const Corpus& base, ContaminationKind mode, double snr_db, uint64_t seed) {
  base.Validate();
  LMACTD_CHECK(mode == ContaminationKind::kInClassMixture || mode == ContaminationKind::kWhiteNoise ||
                   mode == ContaminationKind::kSpeechLike,
               InvalidArgument, std::string("unsupported OOD mode ") + ContaminationName(mode));
  if (mode == ContaminationKind::kInClassMixture) {
    LMACTD_CHECK(base.NumClasses() >= 2, InvalidArgument, "in-class mixtures need >= 2 classes");
  }
  std::mt19937_64 rng(seed);
  Corpus out = base;
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    LabeledSample& s = out.samples[i];
    const LabeledSample& src = base.samples[i];
    Waveform contaminant;
    std::string cid;
    int contaminant_class = -1;
    switch (mode) {
      case ContaminationKind::kInClassMixture: {
        std::vector<std::size_t> others;
        for (std::size_t j = 0; j < base.samples.size(); ++j) {
          if (base.samples[j].class_id != src.class_id) others.push_back(j);
        }
        LMACTD_CHECK(!others.empty(), InvalidArgument, "no sample of a different class");
        const auto j = others[std::uniform_int_distribution<std::size_t>(0, others.size() - 1)(rng)];
        contaminant = base.samples[j].wave;
        contaminant_class = base.samples[j].class_id;
        cid = base.samples[j].id;
        break;
      }
      case ContaminationKind::kWhiteNoise:
        contaminant = WhiteNoise(src.wave.size(), base.sample_rate, rng);
        cid = "white_noise#" + std::to_string(i);
        break;
      default:
        contaminant = SpeechSurrogate(src.wave.size(), base.sample_rate, rng);
        cid = "speech_like#" + std::to_string(i);
        break;
    }
    s.wave = MixAtSnr(src.wave, contaminant, snr_db).mixture;
    s.contamination = {mode, snr_db, cid};
    if (contaminant_class >= 0 && snr_db < 0.0) s.class_id = contaminant_class;
  }
  out.provenance = {{"base", base.provenance},
                    {"ood", {{"mode", ContaminationName(mode)}, {"snr_db", snr_db}, {"seed", seed}}}};
  out.Validate();
  return out;
}

double BandEnergyFraction(const Waveform& wave, double lo_hz, double hi_hz, const StftConfig& cfg) {
  wave.Validate();
  auto power = torch::abs(Stft(wave.ToTensor().to(torch::kFloat64), cfg)).pow(2);
  const int bins = cfg.NumBins();
  double in_band = 0.0;
  const double total = power.sum().item<double>();
  auto per_bin = power.sum(1);
  auto acc = per_bin.accessor<double, 1>();
  for (int k = 0; k < bins; ++k) {
    const double f = static_cast<double>(k) * wave.sample_rate / cfg.fft_size;
    if (f >= lo_hz && f <= hi_hz) in_band += acc[k];
  }
  return total > 0.0 ? in_band / total : 0.0;
}

}  // namespace lmactd
