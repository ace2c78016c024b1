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

#ifndef LMACTD_MOS_H_
#define LMACTD_MOS_H_

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lmactd {

struct RatingRecord {
  std::string rater_id;
  std::string stimulus_id;
  std::string method_label;
  int score = 0;  // 1..100
  std::string timestamp;

  nlohmann::json ToJson() const;
  // Throws InvalidArgument on missing fields or a score outside [1, 100].
  static RatingRecord FromJson(const nlohmann::json& j);
};

bool ValidScore(int score);

enum class CiMethod { kStudentT, kBootstrap };
CiMethod ParseCiMethod(const std::string& name);

struct MethodMos {
  double mean = 0.0;
  int count = 0;
  // Present only when count >= 2.
  std::optional<double> ci_lo, ci_hi;
};

struct MosSummary {
  std::map<std::string, MethodMos> methods;
  double confidence = 0.95;
  std::string ci_method;

  nlohmann::json ToJson() const;
};

struct MosOptions {
  CiMethod method = CiMethod::kStudentT;
  double confidence = 0.95;
  int bootstrap_resamples = 2000;
  uint64_t seed = 0;
};

// Ratings are pooled per method label across raters. Throws on empty input.
MosSummary SummarizeMos(std::span<const RatingRecord> ratings, const MosOptions& opts = {});

// Missing file reads as an empty log.
std::vector<RatingRecord> ReadRatingsJsonl(const std::filesystem::path& path);
void AppendRatingJsonl(const std::filesystem::path& path, const RatingRecord& r);

}  // namespace lmactd

#endif  // LMACTD_MOS_H_
