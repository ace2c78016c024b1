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

#ifndef LMACTD_CLASSIFIER_H_
#define LMACTD_CLASSIFIER_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "lmactd/datasets.h"
#include "lmactd/dsp.h"

namespace lmactd {

struct ClassifierConfig {
  MelConfig mel;
  std::vector<int> widths{16, 32, 64, 128};
  int num_classes = 5;
  bool zero_init_head = false;

  nlohmann::json ToJson() const;
  static ClassifierConfig FromJson(const nlohmann::json& j);
};

// Channels x freq x time of one tapped block output.
struct MapShape {
  int64_t channels = 0, freq = 0, time = 0;
  bool operator==(const MapShape&) const = default;
};

// The last four block outputs (post-pooling), shallow to deep. Each map is
// [B, C, F', T'].
struct RepresentationSet {
  std::vector<torch::Tensor> maps;
  std::vector<MapShape> Shapes() const;
};

struct ClassProbabilities {
  std::vector<double> probs;
  std::vector<double> logits;
  int Argmax() const;
};

// Softmax in double precision, so probabilities saturate later than the
// float32 model output.
ClassProbabilities ToProbabilities(const torch::Tensor& logits_row);

// log-mel -> per-band normalization -> 4 x (conv3x3 -> BN -> ReLU -> avg pool 2x2)
// -> freq mean -> time (mean + max) -> affine.
class ClassifierNetImpl : public torch::nn::Module {
 public:
  explicit ClassifierNetImpl(const ClassifierConfig& cfg);

  // Logits [B, C] for waveforms [B, T].
  torch::Tensor forward(const torch::Tensor& wave);
  // Logits from a log-mel batch [B, mels, frames].
  torch::Tensor ForwardFeatures(const torch::Tensor& log_mel, RepresentationSet* taps = nullptr);

 private:
  ClassifierConfig cfg_;
  torch::nn::BatchNorm1d input_norm_{nullptr};
  std::vector<torch::nn::Conv2d> convs_;
  std::vector<torch::nn::BatchNorm2d> norms_;
  torch::nn::Linear head_{nullptr};
};
TORCH_MODULE(ClassifierNet);

// The model being explained. Once frozen, parameters never receive
// gradients and stay in inference mode.
class Classifier {
 public:
  Classifier(ClassifierConfig cfg, std::vector<std::string> class_names);

  const ClassifierConfig& config() const { return cfg_; }
  const std::vector<std::string>& class_names() const { return class_names_; }
  int num_classes() const { return cfg_.num_classes; }
  int sample_rate() const { return cfg_.mel.sample_rate; }
  // Module handle; parameters of a frozen classifier must not be modified.
  ClassifierNet& net() const { return net_; }

  // Smallest input giving at least one frame after the four poolings.
  int64_t MinSamples() const;
  std::vector<MapShape> TapShapes(int64_t num_samples) const;

  // Throws InvalidArgument on wrong rate or too-short input.
  void CheckInput(const Waveform& wave) const;
  void CheckLength(int64_t num_samples) const;

  ClassProbabilities Classify(const Waveform& wave) const;
  RepresentationSet Embed(const Waveform& wave) const;

  // Batched differentiable paths; [B, T] input.
  torch::Tensor Logits(const torch::Tensor& wave) const;
  torch::Tensor LogitsAndTaps(const torch::Tensor& wave, RepresentationSet* taps) const;

  void Freeze();
  bool frozen() const { return frozen_; }
  void SetTraining(bool on);
  void ToDtype(torch::Dtype dtype);

  std::string Serialize() const;
  std::string ParameterHash() const;
  std::string ArchitectureHash() const;

  // Writes stem.bin and stem.json; `extra` is merged into the sidecar.
  void Save(const std::filesystem::path& stem, const nlohmann::json& extra = {}) const;
  // Verifies the architecture and parameter hashes recorded in the sidecar.
  static Classifier Load(const std::filesystem::path& stem);

 private:
  ClassifierConfig cfg_;
  std::vector<std::string> class_names_;
  mutable ClassifierNet net_;
  bool frozen_ = false;
};

struct ClassifierTrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 16;
  int max_epochs = 30;
  int patience = 10;
  // Noise augmentation hook; disabled when probability is 0.
  double augment_probability = 0.5;
  double augment_snr_lo_db = 10.0;
  double augment_snr_hi_db = 30.0;
  int augment_pool_size = 4;
  bool verbose = false;
};

struct ClassifierEpoch {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double valid_loss = 0.0;
  double valid_accuracy = 0.0;
};

struct ClassifierTrainResult {
  std::vector<ClassifierEpoch> history;
  int best_epoch = 0;
  double best_valid_accuracy = 0.0;
};

// Cross-entropy training with Adam and early stopping on valid accuracy.
// The returned classifier holds the best-valid weights.
Classifier TrainClassifier(const Corpus& corpus, const ClassifierConfig& cfg,
                           const ClassifierTrainConfig& train_cfg, uint64_t seed,
                           ClassifierTrainResult* result = nullptr);

double EvaluateAccuracy(const Classifier& clf, const Corpus& corpus, Split split);

// Stacks equal-length waveforms into [B, T].
torch::Tensor StackWaves(const Corpus& corpus, const std::vector<std::size_t>& indices);

}  // namespace lmactd

#endif  // LMACTD_CLASSIFIER_H_
