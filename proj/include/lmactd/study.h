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

#ifndef LMACTD_STUDY_H_
#define LMACTD_STUDY_H_

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "lmactd/classifier.h"
#include "lmactd/datasets.h"
#include "lmactd/metrics.h"
#include "lmactd/mos.h"

namespace lmactd {

inline constexpr const char* kStudyRoles[] = {"input", "explanation", "complement"};

struct StudyStimulus {
  std::string id;
  std::string sample_id;
  std::map<std::string, std::string> files;  // role -> path relative to the manifest
  std::string true_class;
  std::string predicted_class;
  std::string method_label;
  double gain = 1.0;  // applied to all three signals
};

struct StudyManifest {
  std::vector<StudyStimulus> stimuli;
  nlohmann::json provenance;

  const StudyStimulus* Find(const std::string& id) const;
  nlohmann::json ToJson() const;
  static StudyManifest FromJson(const nlohmann::json& j);
  // Loads and checks that every referenced file exists next to the manifest.
  static StudyManifest Load(const std::filesystem::path& path);
};

struct ExportOptions {
  int num_stimuli = 9;
  std::string method_label;  // empty: use the explainer's label
  Split split = Split::kTest;
  double peak = 0.9;
};

// Picks samples round-robin over classes, renders (input, explanation,
// complement) as PCM16 with a shared peak gain, and writes
// out_dir/manifest.json.
StudyManifest ExportExplanations(const Classifier& clf, const Explainer& explainer,
                                 const Corpus& corpus, const std::filesystem::path& out_dir,
                                 const ExportOptions& opts = {});

// Stimulus order for a rater; a pure function of the rater id.
std::vector<std::string> RaterOrder(const StudyManifest& manifest, const std::string& rater_id);

struct StudyServiceOptions {
  std::string host = "127.0.0.1";
  int port = 0;  // 0 binds any free port
  std::filesystem::path ratings_path;
  std::filesystem::path ui_dir;  // optional static files at /
  MosOptions mos;
};

// HTTP ratings service:
//   GET  /session[?rater_id=]   -> {rater_id, stimuli:[...]} in per-rater order
//   GET  /audio/{id}/{role}     -> audio/wav
//   POST /rating                -> appends one RatingRecord
//   GET  /summary               -> MosSummary
class StudyService {
 public:
  StudyService(StudyManifest manifest, std::filesystem::path manifest_dir,
               StudyServiceOptions opts);
  ~StudyService();
  StudyService(const StudyService&) = delete;
  StudyService& operator=(const StudyService&) = delete;

  // Binds and serves on a background thread. Returns the bound port.
  int Start();
  // Binds and serves on the calling thread until Stop().
  void Run();
  void Stop();
  int port() const;

  std::size_t num_ratings() const;
  nlohmann::json SummaryJson() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace lmactd

#endif  // LMACTD_STUDY_H_
