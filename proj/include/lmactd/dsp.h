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

#ifndef LMACTD_DSP_H_
#define LMACTD_DSP_H_

#include <torch/torch.h>

#include <cstddef>
#include <cstdint>
#include <vector>

namespace lmactd {

// Mono audio clip. Samples are nominally in [-1, 1].
struct Waveform {
  std::vector<float> samples;
  int sample_rate = 16000;

  Waveform() = default;
  Waveform(std::vector<float> s, int rate) : samples(std::move(s)), sample_rate(rate) {}

  std::size_t size() const { return samples.size(); }
  double DurationSeconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }

  // Throws InvalidArgument on empty, non-finite or bad rate.
  void Validate() const;

  // 1-D float32 tensor holding a copy of the samples.
  torch::Tensor ToTensor() const;
  static Waveform FromTensor(const torch::Tensor& t, int sample_rate);

  bool operator==(const Waveform&) const = default;
};

enum class WindowType { kHannPeriodic, kRectangular };

struct StftConfig {
  int window_length = 512;
  int hop = 128;
  int fft_size = 512;
  WindowType window = WindowType::kHannPeriodic;

  int NumBins() const { return fft_size / 2 + 1; }
  // Frames from fully covered windows only; 0 when the signal is too short.
  int64_t NumFrames(int64_t num_samples) const;
  void Validate() const;
};

// Analysis settings for the spectral l1 regularizer and the saliency maps.
inline StftConfig RegularizerStftConfig() { return StftConfig{512, 128, 512}; }

struct MelConfig {
  int sample_rate = 16000;
  StftConfig stft{512, 160, 512};
  int num_mels = 64;
  double f_min = 0.0;
  double f_max = 0.0;  // <= 0 means Nyquist
  double log_floor = 1e-10;

  double FMax() const { return f_max > 0.0 ? f_max : sample_rate / 2.0; }
  void Validate() const;
};

torch::Tensor MakeWindow(const StftConfig& cfg,
                         torch::Dtype dtype = torch::kFloat32);

// STFT of [T] or [B, T] real signals. Returns complex [bins, frames] or
// [B, bins, frames]. No padding: only fully covered windows produce frames.
// Throws InvalidArgument("signal too short") when T < window_length.
torch::Tensor Stft(const torch::Tensor& wave, const StftConfig& cfg);

// |Stft(wave)|.
torch::Tensor MagnitudeStft(const torch::Tensor& wave, const StftConfig& cfg);

// Weighted overlap-add inverse of Stft. Samples that no frame covers are 0.
torch::Tensor Istft(const torch::Tensor& spec, const StftConfig& cfg,
                    int64_t length);

// Triangular HTK-spaced mel filterbank, peak-normalized: [num_mels, bins].
torch::Tensor MelFilterbank(const MelConfig& cfg,
                            torch::Dtype dtype = torch::kFloat32);

// log(mel power + floor): [mels, frames] or [B, mels, frames].
torch::Tensor LogMelSpectrogram(const torch::Tensor& wave, const MelConfig& cfg);
torch::Tensor LogMelSpectrogram(const Waveform& wave, const MelConfig& cfg);

// Sum of |STFT| divided by (bins * frames). For [B, T] input the per-clip
// values are averaged over the batch.
torch::Tensor SpectralL1(const torch::Tensor& wave, const StftConfig& cfg);
double SpectralL1(const Waveform& wave, const StftConfig& cfg);

double MeanPower(const std::vector<float>& x);

struct MixResult {
  Waveform mixture;
  double noise_gain = 0.0;      // g applied to the (tiled) noise
  double output_gain = 1.0;     // peak renormalization applied to the sum
  std::size_t noise_offset = 0;  // circular start index into the noise
};

// signal + g * noise with g chosen so that 10 log10(P_s / P_gn) = snr_db.
// Noise is read circularly from noise_offset and tiled or truncated to the
// signal length. The sum is scaled down if its peak exceeds 1.
// Throws InvalidArgument("undefined SNR") for silent noise.
MixResult MixAtSnr(const Waveform& signal, const Waveform& noise, double snr_db,
                   std::size_t noise_offset = 0);

// Noise tiled circularly from offset to the given length.
std::vector<float> TileNoise(const std::vector<float>& noise, std::size_t length,
                             std::size_t offset);

}  // namespace lmactd

#endif  // LMACTD_DSP_H_
