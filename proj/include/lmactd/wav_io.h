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

#ifndef LMACTD_WAV_IO_H_
#define LMACTD_WAV_IO_H_

#include <filesystem>

#include "lmactd/dsp.h"

namespace lmactd {

enum class WavFormat { kPcm16, kFloat32 };

// Reads 16-bit PCM or 32-bit float RIFF/WAVE. Multichannel audio is
// downmixed by channel mean.
Waveform ReadWav(const std::filesystem::path& path);

// Writes mono audio. PCM16 output is clipped to [-1, 1].
void WriteWav(const std::filesystem::path& path, const Waveform& wave,
              WavFormat format = WavFormat::kFloat32);

}  // namespace lmactd

#endif  // LMACTD_WAV_IO_H_
