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

#include "lmactd/wav_io.h"

#include <gtest/gtest.h>

#include <cstring>
#include <fstream>

#include "lmactd/error.h"
#include "test_util.h"

namespace lmactd {
namespace {

class WavTest : public ::testing::Test {
 protected:
  void SetUp() override { dir_ = testing::TempDir("wav"); }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::filesystem::path dir_;
};

TEST_F(WavTest, Float32RoundTripIsExact) {
  testing::Gen g(1);
  auto w = g.Wave(1234, 22050);
  WriteWav(dir_ / "f.wav", w, WavFormat::kFloat32);
  EXPECT_EQ(ReadWav(dir_ / "f.wav"), w);
}

TEST_F(WavTest, Pcm16RoundTripWithinQuantization) {
  testing::Gen g(2);
  auto w = g.Wave(500, 16000, 0.3);
  WriteWav(dir_ / "p.wav", w, WavFormat::kPcm16);
  auto r = ReadWav(dir_ / "p.wav");
  ASSERT_EQ(r.size(), w.size());
  EXPECT_EQ(r.sample_rate, 16000);
  for (std::size_t i = 0; i < w.size(); ++i)
    EXPECT_NEAR(r.samples[i], std::clamp(w.samples[i], -1.0f, 1.0f), 1.0 / 32768);
}

void Put16(std::ofstream& o, uint16_t v) { o.write(reinterpret_cast<const char*>(&v), 2); }
void Put32(std::ofstream& o, uint32_t v) { o.write(reinterpret_cast<const char*>(&v), 4); }

TEST_F(WavTest, StereoIsDownmixedByMean) {
  const auto path = dir_ / "stereo.wav";
  std::ofstream o(path, std::ios::binary);
  const int16_t frames[][2] = {{1000, 3000}, {-2000, 0}, {32767, 32767}};
  o.write("RIFF", 4);
  Put32(o, 36 + sizeof(frames));
  o.write("WAVEfmt ", 8);
  Put32(o, 16);
  Put16(o, 1);
  Put16(o, 2);
  Put32(o, 8000);
  Put32(o, 8000 * 4);
  Put16(o, 4);
  Put16(o, 16);
  o.write("data", 4);
  Put32(o, sizeof(frames));
  o.write(reinterpret_cast<const char*>(frames), sizeof(frames));
  o.close();
  auto w = ReadWav(path);
  ASSERT_EQ(w.size(), 3u);
  EXPECT_EQ(w.sample_rate, 8000);
  EXPECT_NEAR(w.samples[0], 2000.0 / 32768, 1e-4);
  EXPECT_NEAR(w.samples[1], -1000.0 / 32768, 1e-4);
}

TEST_F(WavTest, GarbageAndMissingFilesThrow) {
  std::ofstream(dir_ / "junk.wav") << "not a wav";
  EXPECT_THROW(ReadWav(dir_ / "junk.wav"), Error);
  EXPECT_THROW(ReadWav(dir_ / "none.wav"), Error);
}

}  // namespace
}  // namespace lmactd
