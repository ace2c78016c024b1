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

#include "lmactd/checkpoint.h"

#include <cstring>
#include <fstream>

#include "lmactd/error.h"
#include "lmactd/hashing.h"

namespace lmactd {
namespace {

constexpr char kMagic[8] = {'L', 'M', 'T', 'D', 'B', 'L', 'O', 'B'};
constexpr uint32_t kVersion = 1;

uint8_t DtypeCode(torch::Dtype d) {
  switch (d) {
    case torch::kFloat32: return 0;
    case torch::kFloat64: return 1;
    case torch::kInt64: return 2;
    default: throw CheckpointError("unsupported tensor dtype in checkpoint");
  }
}

torch::Dtype CodeDtype(uint8_t c) {
  switch (c) {
    case 0: return torch::kFloat32;
    case 1: return torch::kFloat64;
    case 2: return torch::kInt64;
    default: throw CheckpointError("corrupt checkpoint: bad dtype code");
  }
}

template <typename T>
void Put(std::string& out, T v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& s) : s_(s) {}
  template <typename T>
  T Get() {
    Need(sizeof(T));
    T v;
    std::memcpy(&v, s_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string Bytes(std::size_t n) {
    Need(n);
    std::string out = s_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  const char* Raw(std::size_t n) {
    Need(n);
    const char* p = s_.data() + pos_;
    pos_ += n;
    return p;
  }

 private:
  void Need(std::size_t n) const {
    LMACTD_CHECK(pos_ + n <= s_.size(), CheckpointError, "corrupt checkpoint: truncated");
  }
  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace

TensorMap NamedState(const torch::nn::Module& module) {
  TensorMap out;
  for (const auto& p : module.named_parameters(/*recurse=*/true)) out.emplace_back(p.key(), p.value());
  for (const auto& b : module.named_buffers(/*recurse=*/true)) out.emplace_back(b.key(), b.value());
  return out;
}

std::string SerializeState(const torch::nn::Module& module) {
  const auto state = NamedState(module);
  std::string out(kMagic, sizeof(kMagic));
  Put<uint32_t>(out, kVersion);
  Put<uint64_t>(out, state.size());
  for (const auto& [name, t] : state) {
    auto c = t.detach().to(torch::kCPU).contiguous();
    Put<uint32_t>(out, static_cast<uint32_t>(name.size()));
    out += name;
    Put<uint8_t>(out, DtypeCode(c.scalar_type()));
    Put<uint32_t>(out, static_cast<uint32_t>(c.dim()));
    for (auto s : c.sizes()) Put<int64_t>(out, s);
    out.append(static_cast<const char*>(c.data_ptr()), c.numel() * c.element_size());
  }
  return out;
}

void DeserializeState(torch::nn::Module& module, const std::string& blob) {
  Reader r(blob);
  LMACTD_CHECK(r.Bytes(sizeof(kMagic)) == std::string(kMagic, sizeof(kMagic)), CheckpointError,
               "not a checkpoint blob");
  LMACTD_CHECK(r.Get<uint32_t>() == kVersion, CheckpointError, "unsupported blob version");
  const auto count = r.Get<uint64_t>();
  auto state = NamedState(module);
  LMACTD_CHECK(count == state.size(), CheckpointError,
               "checkpoint has " + std::to_string(count) + " tensors, model expects " +
                   std::to_string(state.size()));
  torch::NoGradGuard no_grad;
  for (auto& [name, target] : state) {
    const std::string got = r.Bytes(r.Get<uint32_t>());
    LMACTD_CHECK(got == name, CheckpointError,
                 "checkpoint tensor '" + got + "' where '" + name + "' was expected");
    const auto dtype = CodeDtype(r.Get<uint8_t>());
    std::vector<int64_t> shape(r.Get<uint32_t>());
    for (auto& s : shape) s = r.Get<int64_t>();
    LMACTD_CHECK(target.sizes().vec() == shape, CheckpointError, "shape mismatch for '" + name + "'");
    auto src = torch::empty(shape, torch::TensorOptions().dtype(dtype));
    std::memcpy(src.data_ptr(), r.Raw(src.numel() * src.element_size()),
                src.numel() * src.element_size());
    target.copy_(src.to(target.scalar_type()));
  }
}

std::string ArchitectureHash(const torch::nn::Module& module, const nlohmann::json& config) {
  Sha256 h;
  h.Update(config.dump());
  for (const auto& [name, t] : NamedState(module)) {
    h.Update(name);
    for (auto s : t.sizes()) h.UpdatePod<int64_t>(s);
  }
  return h.HexDigest();
}

std::string ParameterHash(const torch::nn::Module& module) {
  return Sha256Hex(SerializeState(module));
}

TensorMap SnapshotState(const torch::nn::Module& module) {
  TensorMap out;
  for (const auto& [name, t] : NamedState(module)) out.emplace_back(name, t.detach().clone());
  return out;
}

void RestoreState(torch::nn::Module& module, const TensorMap& snapshot) {
  torch::NoGradGuard no_grad;
  auto state = NamedState(module);
  LMACTD_CHECK(state.size() == snapshot.size(), Error, "snapshot does not match module");
  for (std::size_t i = 0; i < state.size(); ++i) state[i].second.copy_(snapshot[i].second);
}

std::string ReadFileBytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  LMACTD_CHECK(in.good(), CheckpointError, "cannot open " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void WriteFileBytes(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  LMACTD_CHECK(out.good(), IoError, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

nlohmann::json ReadJsonFile(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(ReadFileBytes(path));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

void WriteJsonFile(const std::filesystem::path& path, const nlohmann::json& j) {
  WriteFileBytes(path, j.dump(2) + "\n");
}

std::filesystem::path BlobPath(const std::filesystem::path& stem) {
  auto p = stem;
  return p.replace_extension(".bin");
}

std::filesystem::path SidecarPath(const std::filesystem::path& stem) {
  auto p = stem;
  return p.replace_extension(".json");
}

}  // namespace lmactd
