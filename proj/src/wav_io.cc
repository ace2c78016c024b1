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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "lmactd/error.h"

namespace lmactd {
namespace {

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatFloat = 3;
constexpr uint16_t kFormatExtensible = 0xFFFE;

template <typename T>
T ReadLe(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

template <typename T>
void PutLe(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

}  // namespace

Waveform ReadWav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  LMACTD_CHECK(in.good(), IoError, "cannot open " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string where = " in " + path.string();
  LMACTD_CHECK(data.size() >= 12 && data.compare(0, 4, "RIFF") == 0 &&
                   data.compare(8, 4, "WAVE") == 0,
               IoError, "not a RIFF/WAVE file" + where);

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  const char* pcm = nullptr;
  std::size_t pcm_bytes = 0;
  std::size_t pos = 12;
  while (pos + 8 <= data.size()) {
    const std::string id = data.substr(pos, 4);
    const uint32_t size = ReadLe<uint32_t>(data.data() + pos + 4);
    const std::size_t body = pos + 8;
    LMACTD_CHECK(body + size <= data.size() || id == "data", IoError,
                 "truncated chunk '" + id + "'" + where);
    if (id == "fmt ") {
      LMACTD_CHECK(size >= 16, IoError, "short fmt chunk" + where);
      format = ReadLe<uint16_t>(data.data() + body);
      channels = ReadLe<uint16_t>(data.data() + body + 2);
      rate = ReadLe<uint32_t>(data.data() + body + 4);
      bits = ReadLe<uint16_t>(data.data() + body + 14);
      if (format == kFormatExtensible && size >= 26) {
        format = ReadLe<uint16_t>(data.data() + body + 24);
      }
    } else if (id == "data") {
      pcm = data.data() + body;
      pcm_bytes = std::min<std::size_t>(size, data.size() - body);
    }
    pos = body + size + (size & 1u);
  }
  LMACTD_CHECK(channels > 0 && rate > 0, IoError, "missing fmt chunk" + where);
  LMACTD_CHECK(pcm != nullptr, IoError, "missing data chunk" + where);
  const bool is_pcm16 = format == kFormatPcm && bits == 16;
  const bool is_f32 = format == kFormatFloat && bits == 32;
  LMACTD_CHECK(is_pcm16 || is_f32, IoError,
               "unsupported WAV encoding (format " + std::to_string(format) + ", " +
                   std::to_string(bits) + " bits)" + where);

  const std::size_t frame_bytes = static_cast<std::size_t>(channels) * bits / 8;
  const std::size_t frames = pcm_bytes / frame_bytes;
  std::vector<float> out(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (uint16_t c = 0; c < channels; ++c) {
      const char* p = pcm + f * frame_bytes + c * (bits / 8);
      acc += is_pcm16 ? ReadLe<int16_t>(p) / 32768.0 : ReadLe<float>(p);
    }
    out[f] = static_cast<float>(acc / channels);
  }
  return Waveform(std::move(out), static_cast<int>(rate));
}

void WriteWav(const std::filesystem::path& path, const Waveform& wave, WavFormat format) {
  wave.Validate();
  const bool pcm16 = format == WavFormat::kPcm16;
  const uint16_t bits = pcm16 ? 16 : 32;
  const uint32_t data_bytes = static_cast<uint32_t>(wave.size() * bits / 8);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  PutLe<uint32_t>(out, 36 + data_bytes);
  out += "WAVEfmt ";
  PutLe<uint32_t>(out, 16);
  PutLe<uint16_t>(out, pcm16 ? kFormatPcm : kFormatFloat);
  PutLe<uint16_t>(out, 1);
  PutLe<uint32_t>(out, static_cast<uint32_t>(wave.sample_rate));
  PutLe<uint32_t>(out, static_cast<uint32_t>(wave.sample_rate) * bits / 8);
  PutLe<uint16_t>(out, bits / 8);
  PutLe<uint16_t>(out, bits);
  out += "data";
  PutLe<uint32_t>(out, data_bytes);
  for (float v : wave.samples) {
    if (pcm16) {
      // Same 2^15 scale as the reader; +1.0 saturates at the largest code.
      const long q = std::lround(static_cast<double>(v) * 32768.0);
      PutLe<int16_t>(out, static_cast<int16_t>(std::clamp(q, -32768L, 32767L)));
    } else {
      PutLe<float>(out, v);
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  LMACTD_CHECK(f.good(), IoError, "cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  LMACTD_CHECK(f.good(), IoError, "write failed for " + path.string());
}

}  // namespace lmactd
