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

#ifndef LMACTD_CHECKPOINT_H_
#define LMACTD_CHECKPOINT_H_

#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

namespace lmactd {

// Named parameters and buffers, in registration order.
using TensorMap = std::vector<std::pair<std::string, torch::Tensor>>;

TensorMap NamedState(const torch::nn::Module& module);

// Deterministic binary encoding of a module's parameters and buffers:
// "LMTDBLOB", version, count, then per entry name / dtype / shape / bytes.
std::string SerializeState(const torch::nn::Module& module);
// Copies values from `blob` into `module`. Names and shapes must match.
void DeserializeState(torch::nn::Module& module, const std::string& blob);

// SHA-256 of the parameter names and shapes (not values).
std::string ArchitectureHash(const torch::nn::Module& module, const nlohmann::json& config);
// SHA-256 of SerializeState(module).
std::string ParameterHash(const torch::nn::Module& module);

// Deep copy of every parameter and buffer, for best-epoch restore.
TensorMap SnapshotState(const torch::nn::Module& module);
void RestoreState(torch::nn::Module& module, const TensorMap& snapshot);

std::string ReadFileBytes(const std::filesystem::path& path);
void WriteFileBytes(const std::filesystem::path& path, const std::string& bytes);
nlohmann::json ReadJsonFile(const std::filesystem::path& path);
void WriteJsonFile(const std::filesystem::path& path, const nlohmann::json& j);

// `stem`.bin / `stem`.json.
std::filesystem::path BlobPath(const std::filesystem::path& stem);
std::filesystem::path SidecarPath(const std::filesystem::path& stem);

}  // namespace lmactd

#endif  // LMACTD_CHECKPOINT_H_
