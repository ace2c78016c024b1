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

#include "lmactd/dsp.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "lmactd/error.h"

namespace lmactd {

void Waveform::Validate() const {
  LMACTD_CHECK(!samples.empty(), InvalidArgument, "waveform is empty");
  LMACTD_CHECK(sample_rate > 0, InvalidArgument,
               "sample rate must be positive, got " + std::to_string(sample_rate));
  for (float v : samples) {
    LMACTD_CHECK(std::isfinite(v), InvalidArgument, "waveform has non-finite samples");
  }
}

torch::Tensor Waveform::ToTensor() const {
  return torch::from_blob(const_cast<float*>(samples.data()),
                          {static_cast<int64_t>(samples.size())}, torch::kFloat32)
      .clone();
}

Waveform Waveform::FromTensor(const torch::Tensor& t, int sample_rate) {
  auto flat = t.detach().to(torch::kCPU, torch::kFloat32).contiguous().view({-1});
  const float* p = flat.data_ptr<float>();
  return Waveform(std::vector<float>(p, p + flat.numel()), sample_rate);
}

int64_t StftConfig::NumFrames(int64_t num_samples) const {
  if (num_samples < window_length) return 0;
  return (num_samples - window_length) / hop + 1;
}

void StftConfig::Validate() const {
  LMACTD_CHECK(hop > 0 && hop <= window_length && window_length <= fft_size,
               InvalidArgument,
               "invalid STFT config: need 0 < hop <= window_length <= fft_size");
}

void MelConfig::Validate() const {
  stft.Validate();
  LMACTD_CHECK(sample_rate > 0, InvalidArgument, "mel: sample rate must be positive");
  LMACTD_CHECK(num_mels >= 1, InvalidArgument, "mel: need at least one band");
  LMACTD_CHECK(num_mels <= stft.NumBins(), InvalidArgument,
               "mel: " + std::to_string(num_mels) + " bands exceed " +
                   std::to_string(stft.NumBins()) + " FFT bins");
  LMACTD_CHECK(f_min >= 0.0 && f_min < FMax() && FMax() <= sample_rate / 2.0,
               InvalidArgument, "mel: invalid frequency range");
}

torch::Tensor MakeWindow(const StftConfig& cfg, torch::Dtype dtype) {
  auto opts = torch::TensorOptions().dtype(dtype);
  if (cfg.window == WindowType::kRectangular) return torch::ones({cfg.window_length}, opts);
  return torch::hann_window(cfg.window_length, /*periodic=*/true, opts);
}

torch::Tensor Stft(const torch::Tensor& wave, const StftConfig& cfg) {
  cfg.Validate();
  LMACTD_CHECK(wave.dim() == 1 || wave.dim() == 2, InvalidArgument,
               "stft expects [T] or [B, T]");
  LMACTD_CHECK(wave.size(-1) >= cfg.window_length, InvalidArgument,
               "signal too short: " + std::to_string(wave.size(-1)) +
                   " samples < window of " + std::to_string(cfg.window_length));
  auto window = MakeWindow(cfg, wave.scalar_type());
  // [..., frames, window_length]
  auto frames = wave.unfold(-1, cfg.window_length, cfg.hop) * window;
  auto spec = torch::fft::rfft(frames, cfg.fft_size, -1);
  return spec.transpose(-1, -2);
}

torch::Tensor MagnitudeStft(const torch::Tensor& wave, const StftConfig& cfg) {
  return torch::abs(Stft(wave, cfg));
}

torch::Tensor Istft(const torch::Tensor& spec, const StftConfig& cfg, int64_t length) {
  cfg.Validate();
  const bool batched = spec.dim() == 3;
  auto s = batched ? spec : spec.unsqueeze(0);
  const int64_t num_frames = s.size(2);
  auto real_dtype = torch::real(s).scalar_type();
  auto window = MakeWindow(cfg, real_dtype);
  auto frames = torch::fft::irfft(s.transpose(1, 2), cfg.fft_size, -1)
                    .narrow(-1, 0, cfg.window_length) * window;
  auto out = torch::zeros({s.size(0), length}, frames.options());
  auto norm = torch::zeros({length}, frames.options());
  auto wsq = window * window;
  for (int64_t f = 0; f < num_frames; ++f) {
    const int64_t start = f * cfg.hop;
    if (start >= length) break;
    const int64_t n = std::min<int64_t>(cfg.window_length, length - start);
    out.narrow(1, start, n).add_(frames.select(1, f).narrow(-1, 0, n));
    norm.narrow(0, start, n).add_(wsq.narrow(0, 0, n));
  }
  auto safe = torch::where(norm > 1e-8, norm, torch::ones_like(norm));
  out = torch::where(norm > 1e-8, out / safe, torch::zeros_like(out));
  return batched ? out : out.squeeze(0);
}

namespace {

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double MelToHz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

}  // namespace

torch::Tensor MelFilterbank(const MelConfig& cfg, torch::Dtype dtype) {
  cfg.Validate();
  const int bins = cfg.stft.NumBins();
  const double lo = HzToMel(cfg.f_min), hi = HzToMel(cfg.FMax());
  std::vector<double> edges(cfg.num_mels + 2);
  for (int i = 0; i < cfg.num_mels + 2; ++i) {
    edges[i] = MelToHz(lo + (hi - lo) * i / (cfg.num_mels + 1));
  }
  auto fb = torch::zeros({cfg.num_mels, bins}, torch::kFloat64);
  auto acc = fb.accessor<double, 2>();
  for (int m = 0; m < cfg.num_mels; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate / cfg.stft.fft_size;
      const double up = (f - left) / (center - left);
      const double down = (right - f) / (right - center);
      acc[m][k] = std::max(0.0, std::min(up, down));
    }
  }
  return fb.to(dtype);
}

torch::Tensor LogMelSpectrogram(const torch::Tensor& wave, const MelConfig& cfg) {
  auto power = torch::abs(Stft(wave, cfg.stft)).pow(2);
  auto fb = MelFilterbank(cfg, power.scalar_type());
  return torch::log(torch::matmul(fb, power) + cfg.log_floor);
}

torch::Tensor LogMelSpectrogram(const Waveform& wave, const MelConfig& cfg) {
  wave.Validate();
  return LogMelSpectrogram(wave.ToTensor(), cfg);
}

torch::Tensor SpectralL1(const torch::Tensor& wave, const StftConfig& cfg) {
  auto mag = MagnitudeStft(wave, cfg);
  const double cells = static_cast<double>(mag.size(-1) * mag.size(-2));
  auto per_clip = mag.sum({-1, -2}) / cells;
  return per_clip.dim() == 0 ? per_clip : per_clip.mean();
}

double SpectralL1(const Waveform& wave, const StftConfig& cfg) {
  wave.Validate();
  return SpectralL1(wave.ToTensor().to(torch::kFloat64), cfg).item<double>();
}

double MeanPower(const std::vector<float>& x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (float v : x) acc += static_cast<double>(v) * v;
  return acc / static_cast<double>(x.size());
}

std::vector<float> TileNoise(const std::vector<float>& noise, std::size_t length,
                             std::size_t offset) {
  LMACTD_CHECK(!noise.empty(), InvalidArgument, "noise is empty");
  std::vector<float> out(length);
  const std::size_t n = noise.size();
  for (std::size_t t = 0; t < length; ++t) out[t] = noise[(offset + t) % n];
  return out;
}

MixResult MixAtSnr(const Waveform& signal, const Waveform& noise, double snr_db,
                   std::size_t noise_offset) {
  signal.Validate();
  noise.Validate();
  LMACTD_CHECK(signal.sample_rate == noise.sample_rate, InvalidArgument,
               "mix: sample rates differ (" + std::to_string(signal.sample_rate) +
                   " vs " + std::to_string(noise.sample_rate) + ")");
  LMACTD_CHECK(std::isfinite(snr_db), InvalidArgument, "mix: SNR must be finite");
  const std::size_t T = signal.size();
  const std::vector<float> tiled = TileNoise(noise.samples, T, noise_offset % noise.size());
  const double p_noise = MeanPower(tiled);
  LMACTD_CHECK(p_noise > 0.0, InvalidArgument, "undefined SNR: noise is silent");
  const double p_signal = MeanPower(signal.samples);

  MixResult r;
  r.noise_offset = noise_offset % noise.size();
  r.noise_gain = std::sqrt(p_signal / (p_noise * std::pow(10.0, snr_db / 10.0)));
  std::vector<double> mix(T);
  double peak = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    mix[t] = static_cast<double>(signal.samples[t]) + r.noise_gain * tiled[t];
    peak = std::max(peak, std::abs(mix[t]));
  }
  r.output_gain = peak > 1.0 ? 1.0 / peak : 1.0;
  std::vector<float> out(T);
  for (std::size_t t = 0; t < T; ++t) out[t] = static_cast<float>(mix[t] * r.output_gain);
  r.mixture = Waveform(std::move(out), signal.sample_rate);
  return r;
}

}  // namespace lmactd
