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

#ifndef LMACTD_DATASETS_H_
#define LMACTD_DATASETS_H_

#include <cstdint>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lmactd/dsp.h"

namespace lmactd {

enum class Split { kTrain, kValid, kTest };
const char* SplitName(Split s);
Split ParseSplit(const std::string& name);

enum class ContaminationKind {
  kNone,
  kInClassMixture,
  kWhiteNoise,
  kSpeechLike,
  kAugmentation,  // training-time noise from a pool
};
const char* ContaminationName(ContaminationKind k);
ContaminationKind ParseContamination(const std::string& name);

struct Contamination {
  ContaminationKind kind = ContaminationKind::kNone;
  double snr_db = std::numeric_limits<double>::quiet_NaN();
  std::string contaminant_id;
};

struct LabeledSample {
  std::string id;
  Waveform wave;
  int class_id = 0;
  Split split = Split::kTrain;
  Contamination contamination;
};

// Immutable after construction; safe to share across readers.
struct Corpus {
  std::vector<LabeledSample> samples;
  std::vector<std::string> class_names;
  int sample_rate = 16000;
  nlohmann::json provenance;

  int NumClasses() const { return static_cast<int>(class_names.size()); }
  // Indices of the samples in `split`, in corpus order.
  std::vector<std::size_t> Indices(Split split) const;
  bool HasSplit(Split split) const { return !Indices(split).empty(); }
  // Nonempty, uniform sample rate, labels in range, contamination SNRs finite.
  void Validate() const;
  // SHA-256 over labels, splits, ids and raw sample bits.
  std::string Digest() const;
};

enum class PrototypeKind { kToneBurst, kChirp, kAmNoiseBand, kHarmonicStack, kClickTrain };
const char* PrototypeName(PrototypeKind k);

// Frequency band that carries a synthetic class.
struct ClassBand {
  double lo_hz = 0.0;
  double hi_hz = 0.0;
  PrototypeKind kind = PrototypeKind::kToneBurst;
};

// Disjoint equal-width bands over [150 Hz, 0.45 * rate]; prototype kinds
// cycle through the five PrototypeKinds. Throws when a band would be
// narrower than 200 Hz.
std::vector<ClassBand> SyntheticBandLayout(int num_classes, int sample_rate);

struct SyntheticCorpusOptions {
  int num_classes = 5;
  int per_class = 20;
  double clip_seconds = 1.0;
  int sample_rate = 16000;
  uint64_t seed = 0;
};

// Per class: valid = test = max(1, floor(0.2 n)); the rest is train.
struct SplitCounts {
  int train = 0, valid = 0, test = 0;
};
SplitCounts StratifiedSplitCounts(int per_class);

Corpus GenerateSyntheticCorpus(const SyntheticCorpusOptions& opts);

// Manifest is CSV with header relative_path,class_name,split. Class ids
// follow sorted class-name order.
Corpus LoadWavCorpus(const std::filesystem::path& root,
                     const std::filesystem::path& manifest);

// Writes float32 WAVs, manifest.csv and provenance.json under dir.
void ExportCorpus(const Corpus& corpus, const std::filesystem::path& dir);

LabeledSample AugmentWithNoise(const LabeledSample& sample,
                               const std::vector<Waveform>& noise_pool,
                               double snr_lo_db, double snr_hi_db, std::mt19937_64& rng);

// Contaminates every sample of `base`. For in-class mixtures the
// contaminant always comes from a different class and the label follows
// the louder source.
Corpus MakeOodCorpus(const Corpus& base, ContaminationKind mode, double snr_db,
                     uint64_t seed);

Waveform WhiteNoise(std::size_t length, int sample_rate, std::mt19937_64& rng);
// Noise through four formant-like resonances with 4 Hz amplitude modulation.
Waveform SpeechSurrogate(std::size_t length, int sample_rate, std::mt19937_64& rng);

// Fraction of |STFT|^2 energy between lo_hz and hi_hz.
double BandEnergyFraction(const Waveform& wave, double lo_hz, double hi_hz,
                          const StftConfig& cfg = RegularizerStftConfig());

}  // namespace lmactd

#endif  // LMACTD_DATASETS_H_
