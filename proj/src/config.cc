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

#include "lmactd/config.h"

#include <fstream>
#include <sstream>

#include "lmactd/checkpoint.h"
#include "lmactd/error.h"

namespace lmactd {

using nlohmann::json;

namespace {

json BuildDefaults() {
  return {
      {"seed", 0},
      {"output_dir", "runs/default"},
      {"deterministic", true},
      {"dsp",
       {{"sample_rate", 16000},
        {"mel",
         {{"window_length", 512},
          {"hop", 160},
          {"fft_size", 512},
          {"num_mels", 64},
          {"f_min", 0.0},
          {"f_max", 0.0},
          {"log_floor", 1e-10}}}}},
      {"dataset",
       {{"source", "synthetic"},
        {"num_classes", 5},
        {"per_class", 20},
        {"clip_seconds", 1.0},
        {"root", ""},
        {"manifest", ""}}},
      {"classifier",
       {{"widths", {16, 32, 64, 128}},
        {"learning_rate", 1e-3},
        {"batch_size", 16},
        {"max_epochs", 30},
        {"patience", 10},
        {"augment_probability", 0.5},
        {"augment_snr_lo_db", 10.0},
        {"augment_snr_hi_db", 30.0},
        {"augment_pool_size", 4}}},
      {"interpreter",
       {{"latent_channels", 128},
        {"kernel_size", 16},
        {"alpha", 0.75},
        {"unet_width", 64},
        {"masknet",
         {{"width", 64},
          {"chunk_size", 50},
          {"num_blocks", 2},
          {"num_heads", 4},
          {"ffn_width", 128}}}}},
      {"loss", {{"lambda_in", 5.0}, {"lambda_out", 0.2}, {"lambda_reg", 6.0}}},
      {"optimizer",
       {{"learning_rate", 5e-4}, {"batch_size", 8}, {"epochs", 50}, {"grad_clip", 5.0}}},
      {"evaluation",
       {{"split", "test"},
        {"ood_mode", "none"},
        {"ood_snr_db", 5.0},
        {"baseline", true}}},
      {"study",
       {{"num_stimuli", 9},
        {"method_label", "LMAC-TD"},
        {"host", "127.0.0.1"},
        {"port", 8080},
        {"ratings", "ratings.jsonl"},
        {"ci", "t"},
        {"bootstrap_resamples", 2000},
        {"ui_dir", ""}}},
  };
}

bool SameKind(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) {
    // Integers stay integers; floats accept any number.
    return !(a.is_number_integer() && b.is_number_float());
  }
  return a.type() == b.type();
}

const char* KindName(const json& v) { return v.type_name(); }

void MergeInto(json& dst, const json& src, const std::string& prefix) {
  LMACTD_CHECK(src.is_object(), ConfigError,
               "config section '" + (prefix.empty() ? std::string("<root>") : prefix) +
                   "' must be an object");
  for (const auto& [key, value] : src.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    auto it = dst.find(key);
    LMACTD_CHECK(it != dst.end(), ConfigError, "unknown config key '" + path + "'");
    if (it->is_object()) {
      MergeInto(*it, value, path);
      continue;
    }
    LMACTD_CHECK(SameKind(*it, value), ConfigError,
                 "config key '" + path + "' expects " + KindName(*it) + ", got " +
                     KindName(value));
    if (it->is_array() && !it->empty()) {
      for (const auto& e : value)
        LMACTD_CHECK(SameKind(it->front(), e), ConfigError,
                     "config key '" + path + "' has elements of the wrong type");
    }
    *it = value;
  }
}

}  // namespace

const json& RunConfig::Defaults() {
  static const json kDefaults = BuildDefaults();
  return kDefaults;
}

RunConfig::RunConfig() : doc_(Defaults()) {}

RunConfig RunConfig::FromJson(const json& doc) {
  RunConfig c;
  c.Merge(doc);
  return c;
}

RunConfig RunConfig::FromFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  LMACTD_CHECK(in.good(), ConfigError, "cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }
  return FromJson(doc);
}

void RunConfig::Merge(const json& partial) {
  json next = doc_;
  MergeInto(next, partial, "");
  doc_ = std::move(next);
}

void RunConfig::Set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  LMACTD_CHECK(eq != std::string::npos && eq > 0, ConfigError,
               "override must look like key=value: '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  // Build the nested partial document a.b.c -> {"a":{"b":{"c":v}}}.
  std::vector<std::string> parts;
  std::stringstream ss(key);
  for (std::string p; std::getline(ss, p, '.');) {
    LMACTD_CHECK(!p.empty(), ConfigError, "empty path segment in '" + key + "'");
    parts.push_back(p);
  }
  // String-valued keys take the raw text, so output_dir=123 stays a path.
  const json* target = &doc_;
  for (const auto& p : parts) {
    LMACTD_CHECK(target->is_object() && target->contains(p), ConfigError, "unknown config key '" + key + "'");
    target = &(*target)[p];
  }
  if (target->is_string()) value = raw;
  json partial = value;
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) partial = json{{*it, partial}};
  Merge(partial);
}

void RunConfig::Validate() const {
  const std::string src = dataset_source();
  LMACTD_CHECK(src == "synthetic" || src == "wav", ConfigError,
               "dataset.source must be 'synthetic' or 'wav'");
  LMACTD_CHECK(doc_["dataset"]["per_class"].get<int>() >= 4, ConfigError,
               "dataset.per_class must be >= 4");
  LMACTD_CHECK(doc_["dataset"]["num_classes"].get<int>() >= 2, ConfigError,
               "dataset.num_classes must be >= 2");
  const std::string ci = doc_["study"]["ci"];
  LMACTD_CHECK(ci == "t" || ci == "bootstrap", ConfigError, "study.ci must be 't' or 'bootstrap'");
  try {
    ParseSplit(doc_["evaluation"]["split"]);
    ParseContamination(doc_["evaluation"]["ood_mode"]);
    Interpreter().Validate();
    Loss().Validate();
    ClassifierConfig probe = Classifier(2);
    probe.mel.Validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

uint64_t RunConfig::seed() const { return doc_["seed"].get<uint64_t>(); }
std::filesystem::path RunConfig::output_dir() const {
  return doc_["output_dir"].get<std::string>();
}
bool RunConfig::deterministic() const { return doc_["deterministic"]; }
std::string RunConfig::dataset_source() const { return doc_["dataset"]["source"]; }

SyntheticCorpusOptions RunConfig::SyntheticOptions() const {
  const auto& d = doc_["dataset"];
  SyntheticCorpusOptions o;
  o.num_classes = d["num_classes"];
  o.per_class = d["per_class"];
  o.clip_seconds = d["clip_seconds"];
  o.sample_rate = doc_["dsp"]["sample_rate"];
  o.seed = seed();
  return o;
}

ClassifierConfig RunConfig::Classifier(int num_classes) const {
  const auto& m = doc_["dsp"]["mel"];
  ClassifierConfig c;
  c.mel.sample_rate = doc_["dsp"]["sample_rate"];
  c.mel.stft.window_length = m["window_length"];
  c.mel.stft.hop = m["hop"];
  c.mel.stft.fft_size = m["fft_size"];
  c.mel.num_mels = m["num_mels"];
  c.mel.f_min = m["f_min"];
  c.mel.f_max = m["f_max"];
  c.mel.log_floor = m["log_floor"];
  c.widths = doc_["classifier"]["widths"].get<std::vector<int>>();
  c.num_classes = num_classes;
  return c;
}

ClassifierTrainConfig RunConfig::ClassifierTraining() const {
  const auto& c = doc_["classifier"];
  ClassifierTrainConfig t;
  t.learning_rate = c["learning_rate"];
  t.batch_size = c["batch_size"];
  t.max_epochs = c["max_epochs"];
  t.patience = c["patience"];
  t.augment_probability = c["augment_probability"];
  t.augment_snr_lo_db = c["augment_snr_lo_db"];
  t.augment_snr_hi_db = c["augment_snr_hi_db"];
  t.augment_pool_size = c["augment_pool_size"];
  return t;
}

InterpreterConfig RunConfig::Interpreter() const {
  return InterpreterConfig::FromJson(doc_["interpreter"]);
}

LossWeights RunConfig::Loss() const {
  const auto& l = doc_["loss"];
  return {l["lambda_in"], l["lambda_out"], l["lambda_reg"]};
}

InterpreterTrainConfig RunConfig::InterpreterTraining() const {
  const auto& o = doc_["optimizer"];
  InterpreterTrainConfig t;
  t.learning_rate = o["learning_rate"];
  t.batch_size = o["batch_size"];
  t.epochs = o["epochs"];
  t.grad_clip = o["grad_clip"];
  t.deterministic = deterministic();
  return t;
}

void RunConfig::Echo() const {
  std::filesystem::create_directories(output_dir());
  WriteJsonFile(output_dir() / "config.json", doc_);
}

}  // namespace lmactd
