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

#ifndef LMACTD_INTERPRETER_H_
#define LMACTD_INTERPRETER_H_

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "lmactd/classifier.h"
#include "lmactd/dsp.h"

namespace lmactd {

struct MaskNetConfig {
  int width = 64;        // model width inside the dual-path blocks
  int chunk_size = 50;   // intra-chunk sequence length; chunks overlap by half
  int num_blocks = 2;    // each block = intra-chunk + inter-chunk transformer
  int num_heads = 4;
  int ffn_width = 128;
};

struct InterpreterConfig {
  int latent_channels = 128;  // K
  int kernel_size = 16;       // L; encoder stride is L / 2
  double alpha = 0.75;
  int unet_width = 64;
  MaskNetConfig masknet;
  // Zero-initialize the last UNet layer so H_d starts at 0.
  bool zero_init_unet_output = false;

  int Stride() const { return kernel_size / 2; }
  // T' = floor((T - L) / (L / 2)) + 1.
  int64_t LatentFrames(int64_t num_samples) const;
  void Validate() const;
  nlohmann::json ToJson() const;
  static InterpreterConfig FromJson(const nlohmann::json& j);
};

// Pre-norm transformer layer (self-attention + feed-forward, both residual).
class TransformerLayerImpl : public torch::nn::Module {
 public:
  TransformerLayerImpl(int width, int heads, int ffn_width);
  // x: [N, S, width]
  torch::Tensor forward(const torch::Tensor& x);

 private:
  int heads_;
  torch::nn::LayerNorm norm1_{nullptr}, norm2_{nullptr};
  torch::nn::Linear qkv_{nullptr}, out_{nullptr}, ff1_{nullptr}, ff2_{nullptr};
};
TORCH_MODULE(TransformerLayer);

// Chunked dual-path sequence model mapping the fused latent grid to a
// nonnegative mask of the same shape.
class MaskNetImpl : public torch::nn::Module {
 public:
  MaskNetImpl(int latent_channels, const MaskNetConfig& cfg);
  // [B, K, T'] -> [B, K, T'], entries >= 0.
  torch::Tensor forward(const torch::Tensor& fused);

 private:
  MaskNetConfig cfg_;
  torch::nn::GroupNorm norm_{nullptr};
  torch::nn::Conv1d in_proj_{nullptr};
  std::vector<TransformerLayer> intra_, inter_;
  // Normalize each path's output before the skip around it.
  std::vector<torch::nn::LayerNorm> intra_norm_, inter_norm_;
  torch::nn::PReLU prelu_{nullptr};
  torch::nn::Conv1d out_proj_{nullptr};
};
TORCH_MODULE(MaskNet);

// Decodes the classifier's four tapped maps to the latent grid shape.
// Deepest map first: 1x1 projections, transposed 2-D convs with additive
// skips back to the shallowest grid, learned weighted sum over frequency,
// transposed 1-D convs, linear resampling to exactly T' frames, 1x1 to K.
class UnetDecoderImpl : public torch::nn::Module {
 public:
  UnetDecoderImpl(const std::vector<int>& tap_channels, int shallow_freq, int width,
                  int latent_channels, bool zero_init_output);
  torch::Tensor forward(const RepresentationSet& h, int64_t latent_frames);

 private:
  std::vector<torch::nn::Conv2d> proj_;
  std::vector<torch::nn::ConvTranspose2d> up2d_;
  torch::Tensor freq_weights_;
  torch::nn::ConvTranspose1d up1_{nullptr}, up2_{nullptr};
  torch::nn::Conv1d out_{nullptr};
};
TORCH_MODULE(UnetDecoder);

struct InterpreterNetImpl : torch::nn::Module {
  InterpreterNetImpl(const InterpreterConfig& cfg, const ClassifierConfig& clf_cfg);

  torch::nn::Conv1d encoder{nullptr};
  torch::nn::ConvTranspose1d decoder{nullptr};
  UnetDecoder unet{nullptr};
  MaskNet masknet{nullptr};
};
TORCH_MODULE(InterpreterNet);

// Every intermediate of one interpreter pass; tensors are batched.
struct InterpreterOutputs {
  torch::Tensor encoded;     // H_e [B, K, T']
  torch::Tensor decoded;     // H_d [B, K, T']
  torch::Tensor fused;       // alpha * H_d + (1 - alpha) * H_e
  torch::Tensor mask;        // M [B, K, T']
  torch::Tensor explanation; // i [B, T]
  torch::Tensor complement;  // i_out [B, T]
};

class Interpreter {
 public:
  Interpreter(InterpreterConfig cfg, const Classifier& paired);

  const InterpreterConfig& config() const { return cfg_; }
  double alpha() const { return cfg_.alpha; }
  void set_alpha(double alpha);
  InterpreterNet& net() const { return net_; }
  const std::string& classifier_hash() const { return classifier_hash_; }

  // H_e = ReLU(Conv1d(x)); [B, T] -> [B, K, T']. Throws when T < L.
  torch::Tensor TdEncode(const torch::Tensor& wave) const;
  // H_d with exactly the shape of H_e for a `num_samples` input.
  torch::Tensor UnetDecode(const RepresentationSet& h, int64_t num_samples) const;
  torch::Tensor Fuse(const torch::Tensor& decoded, const torch::Tensor& encoded) const;
  torch::Tensor EstimateMask(const torch::Tensor& decoded, const torch::Tensor& encoded) const;
  // Linear decoder D, trimmed or zero-padded at the tail to num_samples.
  torch::Tensor Decode(const torch::Tensor& latent, int64_t num_samples) const;
  // i = D(M * H_e), i_out = D((1 - M) * H_e).
  std::pair<torch::Tensor, torch::Tensor> Synthesize(const torch::Tensor& mask,
                                                     const torch::Tensor& encoded,
                                                     int64_t num_samples) const;

  // Full pass; `taps` are the classifier maps for `wave` ([B, T]).
  InterpreterOutputs Forward(const RepresentationSet& taps, const torch::Tensor& wave) const;
  InterpreterOutputs Forward(const Classifier& clf, const torch::Tensor& wave) const;

  void SetTraining(bool on) { net_->train(on); }
  void ToDtype(torch::Dtype dtype) { net_->to(dtype); }
  std::string Serialize() const;

  void Save(const std::filesystem::path& stem, const nlohmann::json& extra = {}) const;
  // Throws CheckpointError when the sidecar names a different classifier.
  static Interpreter Load(const std::filesystem::path& stem, const Classifier& paired);

 private:
  InterpreterConfig cfg_;
  std::string classifier_hash_;
  mutable InterpreterNet net_;
};

struct ExplanationResult {
  Waveform input;
  Waveform explanation;  // i
  Waveform complement;   // i_out
  ClassProbabilities probs_x, probs_i, probs_iout;
  torch::Tensor saliency;  // |STFT(i)| [bins, frames]
  int predicted_class = 0;
};

ExplanationResult Explain(const Classifier& clf, const Interpreter& itp, const Waveform& wave);

// Classifies x, i and i_out and attaches |STFT(i)|. `explanation` and
// `complement` are [1, T] or [T] tensors.
ExplanationResult BundleExplanation(const Classifier& clf, const Waveform& wave,
                                    const torch::Tensor& explanation, const torch::Tensor& complement);

}  // namespace lmactd

#endif  // LMACTD_INTERPRETER_H_
