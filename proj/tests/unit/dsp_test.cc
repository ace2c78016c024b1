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

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "lmactd/error.h"
#include "test_util.h"

namespace lmactd {
namespace {

using testing::BruteForceStft;
using testing::Gen;

torch::Tensor T(const std::vector<float>& x) {
  return torch::from_blob(const_cast<float*>(x.data()), {static_cast<int64_t>(x.size())},
                          torch::kFloat32)
      .clone();
}

TEST(StftTest, ShapeFollowsNoPaddingConvention) {
  StftConfig cfg;
  for (int64_t n : {512, 513, 640, 16000}) {
    auto s = Stft(torch::zeros({n}), cfg);
    EXPECT_EQ(s.size(0), 257);
    EXPECT_EQ(s.size(1), (n - 512) / 128 + 1) << n;
    EXPECT_EQ(cfg.NumFrames(n), (n - 512) / 128 + 1);
  }
}

TEST(StftTest, TooShortSignalThrows) {
  try {
    Stft(torch::zeros({511}), StftConfig{});
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("signal too short"), std::string::npos);
  }
}

TEST(StftTest, ZeroInZeroOut) {
  auto s = Stft(torch::zeros({2048}), StftConfig{});
  EXPECT_EQ(torch::abs(s).max().item<float>(), 0.0f);
}

TEST(StftTest, BinCenteredSineConcentratesInOneBin) {
  StftConfig cfg{256, 64, 256, WindowType::kRectangular};
  const int bin = 20;
  std::vector<float> x(2048);
  for (std::size_t n = 0; n < x.size(); ++n) x[n] = std::sin(2 * std::numbers::pi * bin * n / 256.0);
  auto mag = torch::abs(Stft(T(x), cfg).to(torch::kComplexDouble));
  for (int64_t f = 0; f < mag.size(1); ++f) {
    auto col = mag.select(1, f);
    const double peak = col[bin].item<double>();
    EXPECT_NEAR(peak, 128.0, 1e-3);
    col[bin] = 0.0;
    EXPECT_LT(col.max().item<double>() / peak, 1e-5) << "frame " << f;
  }
  // The same holds for the brute-force oracle, up to the float32 rounding of x.
  auto ref = BruteForceStft(x, 256, 64, 256, false);
  for (const auto& frame : ref) {
    double off = 0;
    for (int k = 0; k < 129; ++k)
      if (k != bin) off = std::max(off, std::abs(frame[k]));
    EXPECT_LT(off / std::abs(frame[bin]), 1e-6);
  }
}

TEST(StftTest, MatchesBruteForceDft) {
  Gen g(11);
  auto x = g.Signal(1400);
  auto s = Stft(T(x), StftConfig{}).to(torch::kComplexDouble);
  auto ref = BruteForceStft(x, 512, 128, 512, true);
  ASSERT_EQ(static_cast<int64_t>(ref.size()), s.size(1));
  auto re = torch::real(s), im = torch::imag(s);
  double worst = 0;
  for (std::size_t f = 0; f < ref.size(); ++f)
    for (int k = 0; k < 257; ++k) {
      std::complex<double> got(re[k][f].item<double>(), im[k][f].item<double>());
      worst = std::max(worst, std::abs(got - ref[f][k]));
    }
  EXPECT_LT(worst, 1e-3);
}

TEST(StftTest, ParsevalPerFrame) {
  // sum_k |X_k|^2 over the full spectrum equals N * sum_n (w x)^2.
  Gen g(3);
  for (int trial = 0; trial < 5; ++trial) {
    auto x = g.Signal(g.Int(600, 3000));
    StftConfig cfg;
    auto mag2 = torch::abs(Stft(T(x), cfg)).to(torch::kFloat64).pow(2);
    auto w = MakeWindow(cfg, torch::kFloat64);
    for (int64_t f = 0; f < mag2.size(1); ++f) {
      auto col = mag2.select(1, f);
      const double spec = (2 * col.sum() - col[0] - col[256]).item<double>();
      double energy = 0;
      for (int n = 0; n < 512; ++n) {
        const double v = w[n].item<double>() * x[f * 128 + n];
        energy += v * v;
      }
      EXPECT_NEAR(spec / (512 * energy), 1.0, 1e-5);
    }
  }
}

TEST(StftProperty, Linearity) {
  Gen g(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto n = g.Int(512, 4000);
    auto x = T(g.Signal(n)).to(torch::kFloat64), y = T(g.Signal(n)).to(torch::kFloat64);
    const double a = g.Uniform(-3, 3), b = g.Uniform(-3, 3);
    auto lhs = Stft(a * x + b * y, StftConfig{});
    auto rhs = a * Stft(x, StftConfig{}) + b * Stft(y, StftConfig{});
    EXPECT_LT(torch::abs(lhs - rhs).max().item<double>(), 1e-9);
  }
}

TEST(StftProperty, PureFunction) {
  Gen g(8);
  auto x = T(g.Signal(3000));
  EXPECT_TRUE(torch::equal(Stft(x, StftConfig{}), Stft(x, StftConfig{})));
}

TEST(StftConfigTest, RejectsBadGeometry) {
  EXPECT_THROW((StftConfig{512, 0, 512}).Validate(), InvalidArgument);
  EXPECT_THROW((StftConfig{512, 600, 512}).Validate(), InvalidArgument);
  EXPECT_THROW((StftConfig{512, 128, 256}).Validate(), InvalidArgument);
}

TEST(IstftTest, RoundTripInterior) {
  Gen g(2);
  auto x = T(g.Signal(4000)).to(torch::kFloat64);
  StftConfig cfg;
  auto y = Istft(Stft(x, cfg), cfg, 4000);
  auto d = (y - x).slice(0, 512, 3488);
  EXPECT_LT(torch::abs(d).max().item<double>(), 1e-9);
}

double HzToMelRef(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double MelToHzRef(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

TEST(MelTest, FilterbankIsPartitionOfUnityOnCoveredBand) {
  MelConfig cfg;
  auto fb = MelFilterbank(cfg, torch::kFloat64);
  ASSERT_EQ(fb.size(0), 64);
  ASSERT_EQ(fb.size(1), 257);
  // Centers of the first and last triangles.
  const double top = HzToMelRef(8000.0);
  const double c_first = MelToHzRef(top / 65.0), c_last = MelToHzRef(top * 64.0 / 65.0);
  auto sums = fb.sum(0);
  int covered = 0;
  for (int k = 0; k < 257; ++k) {
    const double f = k * 16000.0 / 512.0;
    if (f < c_first || f > c_last) continue;
    ++covered;
    EXPECT_NEAR(sums[k].item<double>(), 1.0, 1e-6) << "bin " << k;
  }
  EXPECT_GT(covered, 200);
  EXPECT_GE(fb.min().item<double>(), 0.0);
  EXPECT_LE(fb.max().item<double>(), 1.0 + 1e-12);
}

TEST(MelTest, TooManyBandsThrows) {
  MelConfig cfg;
  cfg.num_mels = 300;
  EXPECT_THROW(MelFilterbank(cfg), InvalidArgument);
}

TEST(MelTest, ZeroInputGivesLogFloor) {
  MelConfig cfg;
  auto m = LogMelSpectrogram(Waveform(std::vector<float>(4000, 0.0f), 16000), cfg);
  EXPECT_EQ(m.size(0), 64);
  EXPECT_EQ(m.size(1), (4000 - 512) / 160 + 1);
  EXPECT_NEAR(m.min().item<float>(), std::log(1e-10), 1e-4);
  EXPECT_NEAR(m.max().item<float>(), std::log(1e-10), 1e-4);
}

TEST(MelTest, DoublingAmplitudeShiftsByLog4) {
  Gen g(9);
  auto x = g.Wave(8000, 16000, 0.2);
  Waveform x2 = x;
  for (auto& v : x2.samples) v *= 2.0f;
  auto a = LogMelSpectrogram(x.ToTensor().to(torch::kFloat64), MelConfig{});
  auto b = LogMelSpectrogram(x2.ToTensor().to(torch::kFloat64), MelConfig{});
  EXPECT_LT(torch::abs(b - a - std::log(4.0)).max().item<double>(), 1e-6);
}

TEST(SpectralL1Test, ZeroSignal) {
  EXPECT_EQ(SpectralL1(Waveform(std::vector<float>(2000, 0.0f), 16000), RegularizerStftConfig()), 0.0);
}

TEST(SpectralL1Test, MatchesBruteForceOnOneSecondBurst) {
  Gen g(21);
  auto x = g.Signal(16000, 0.25);
  auto ref = BruteForceStft(x, 512, 128, 512, true);
  long double sum = 0;
  for (const auto& frame : ref)
    for (const auto& v : frame) sum += std::abs(v);
  const double expect = static_cast<double>(sum / (257.0L * ref.size()));
  const double got = SpectralL1(Waveform(x, 16000), RegularizerStftConfig());
  EXPECT_NEAR(got / expect, 1.0, 1e-6);
}

TEST(SpectralL1Property, AbsoluteHomogeneity) {
  Gen g(4);
  for (int trial = 0; trial < 20; ++trial) {
    auto x = g.Wave(g.Int(512, 6000));
    const double c = g.Uniform(-4, 4);
    Waveform y = x;
    for (auto& v : y.samples) v = static_cast<float>(v * c);
    const auto cfg = RegularizerStftConfig();
    const double a = SpectralL1(x, cfg), b = SpectralL1(y, cfg);
    EXPECT_NEAR(b, std::abs(c) * a, 1e-6 * std::abs(c) * a + 1e-12);
  }
}

TEST(SpectralL1Test, DifferentiableAndBatched) {
  Gen g(6);
  auto x = torch::stack({g.Wave(2000).ToTensor(), g.Wave(2000).ToTensor()}).to(torch::kFloat64);
  x.requires_grad_(true);
  auto r = SpectralL1(x, RegularizerStftConfig());
  r.backward();
  EXPECT_TRUE(torch::isfinite(x.grad()).all().item<bool>());
  const double a = SpectralL1(Waveform::FromTensor(x[0].detach(), 16000), RegularizerStftConfig());
  const double b = SpectralL1(Waveform::FromTensor(x[1].detach(), 16000), RegularizerStftConfig());
  EXPECT_NEAR(r.item<double>(), (a + b) / 2, 1e-6);
}

TEST(MixAtSnrTest, EqualPowerAtZeroDbHasUnitGain) {
  std::vector<float> s(1000), n(1000);
  for (int i = 0; i < 1000; ++i) {
    s[i] = (i % 2 ? 0.1f : -0.1f);
    n[i] = (i % 3 ? 0.1f : -0.1f);
  }
  auto r = MixAtSnr(Waveform(s, 16000), Waveform(n, 16000), 0.0);
  EXPECT_NEAR(r.noise_gain, 1.0, 1e-12);
}

TEST(MixAtSnrTest, HitsFiveAndThreeDb) {
  Gen g(1);
  for (double target : {5.0, 3.0}) {
    auto s = g.Signal(16000, 0.2), n = g.Signal(7000, 0.05);
    auto r = MixAtSnr(Waveform(s, 16000), Waveform(n, 16000), target, 1234);
    EXPECT_NEAR(testing::MeasuredSnrDb(s, n, r.noise_gain, r.noise_offset), target, 1e-6);
    EXPECT_LT(testing::MixResidual(s, n, r.mixture.samples, r.noise_gain, r.output_gain, r.noise_offset), 1e-6);
  }
}

TEST(MixAtSnrTest, HighSnrLimitReturnsSignal) {
  Gen g(2);
  auto s = g.Wave(4000, 16000, 0.2);
  auto r = MixAtSnr(s, g.Wave(4000, 16000, 0.2), 120.0);
  double worst = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    worst = std::max(worst, std::abs(static_cast<double>(r.mixture.samples[i]) - s.samples[i]));
  EXPECT_LT(worst, 1e-5);
}

TEST(MixAtSnrTest, SilentNoiseIsUndefined) {
  try {
    MixAtSnr(Waveform(std::vector<float>(100, 0.1f), 16000), Waveform(std::vector<float>(100, 0.0f), 16000), 5.0);
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("undefined SNR"), std::string::npos);
  }
}

TEST(MixAtSnrTest, RateMismatchThrows) {
  EXPECT_THROW(MixAtSnr(Waveform(std::vector<float>(100, 0.1f), 16000),
                        Waveform(std::vector<float>(100, 0.1f), 8000), 5.0),
               InvalidArgument);
}

TEST(MixAtSnrTest, PeakRenormalizedWithGainRecorded) {
  std::vector<float> s(1000, 0.9f), n(1000);
  for (int i = 0; i < 1000; ++i) n[i] = (i % 2 ? 0.9f : -0.9f);
  auto r = MixAtSnr(Waveform(s, 16000), Waveform(n, 16000), 0.0);
  float peak = 0;
  for (float v : r.mixture.samples) peak = std::max(peak, std::abs(v));
  EXPECT_LE(peak, 1.0f);
  EXPECT_LT(r.output_gain, 1.0);
  EXPECT_NEAR(testing::MeasuredSnrDb(s, n, r.noise_gain, r.noise_offset), 0.0, 1e-6);
}

TEST(MixAtSnrProperty, RandomTargetsHitWithinMicroDb) {
  Gen g(77);
  for (int trial = 0; trial < 200; ++trial) {
    const auto len = g.Int(200, 5000);
    auto s = g.Signal(len, g.Uniform(0.01, 0.5));
    auto n = g.Signal(g.Int(50, 6000), g.Uniform(0.01, 0.5));
    const double snr = g.Uniform(-10, 20);
    const auto off = static_cast<std::size_t>(g.Int(0, 100000));
    auto r = MixAtSnr(Waveform(s, 16000), Waveform(n, 16000), snr, off);
    ASSERT_NEAR(testing::MeasuredSnrDb(s, n, r.noise_gain, r.noise_offset), snr, 1e-6) << "trial " << trial;
    ASSERT_LT(testing::MixResidual(s, n, r.mixture.samples, r.noise_gain, r.output_gain, r.noise_offset), 1e-6);
  }
}

TEST(TileNoiseTest, CircularFromOffset) {
  std::vector<float> n{1, 2, 3};
  EXPECT_EQ(TileNoise(n, 7, 1), (std::vector<float>{2, 3, 1, 2, 3, 1, 2}));
  EXPECT_EQ(TileNoise(n, 2, 2), (std::vector<float>{3, 1}));
}

TEST(WaveformTest, ValidateRejectsBadInput) {
  EXPECT_THROW(Waveform({}, 16000).Validate(), InvalidArgument);
  EXPECT_THROW(Waveform({0.1f}, 0).Validate(), InvalidArgument);
  EXPECT_THROW(Waveform({0.1f, NAN}, 16000).Validate(), InvalidArgument);
  EXPECT_NO_THROW(Waveform({0.1f}, 16000).Validate());
}

}  // namespace
}  // namespace lmactd
