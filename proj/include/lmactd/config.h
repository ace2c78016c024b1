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

#ifndef LMACTD_CONFIG_H_
#define LMACTD_CONFIG_H_

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>

#include "lmactd/classifier.h"
#include "lmactd/datasets.h"
#include "lmactd/interpreter.h"
#include "lmactd/training.h"

namespace lmactd {

// Resolved run configuration. Every key has a default; documents and
// overrides may only touch keys that exist in the defaults, and must keep
// the value's kind (number, string, bool, array, object).
class RunConfig {
 public:
  RunConfig();

  static const nlohmann::json& Defaults();
  static RunConfig FromFile(const std::filesystem::path& path);
  static RunConfig FromJson(const nlohmann::json& doc);

  // Merges a partial document over the current values.
  void Merge(const nlohmann::json& partial);
  // "a.b.c=value". The value is parsed as JSON, falling back to a string.
  void Set(const std::string& assignment);

  const nlohmann::json& doc() const { return doc_; }
  void Validate() const;

  uint64_t seed() const;
  std::filesystem::path output_dir() const;
  bool deterministic() const;

  SyntheticCorpusOptions SyntheticOptions() const;
  std::string dataset_source() const;
  ClassifierConfig Classifier(int num_classes) const;
  ClassifierTrainConfig ClassifierTraining() const;
  InterpreterConfig Interpreter() const;
  LossWeights Loss() const;
  InterpreterTrainConfig InterpreterTraining() const;

  // Writes output_dir/config.json.
  void Echo() const;

 private:
  nlohmann::json doc_;
};

}  // namespace lmactd

#endif  // LMACTD_CONFIG_H_
