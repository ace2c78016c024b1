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

#include "lmactd/classifier.h"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

#include "lmactd/checkpoint.h"
#include "lmactd/error.h"

namespace lmactd {

nlohmann::json ClassifierConfig::ToJson() const {
  return {{"mel",
           {{"sample_rate", mel.sample_rate},
            {"window_length", mel.stft.window_length},
            {"hop", mel.stft.hop},
            {"fft_size", mel.stft.fft_size},
            {"num_mels", mel.num_mels},
            {"f_min", mel.f_min},
            {"f_max", mel.f_max},
            {"log_floor", mel.log_floor}}},
          {"widths", widths},
          {"num_classes", num_classes},
          {"tap_point", "post-pool"}};
}

ClassifierConfig ClassifierConfig::FromJson(const nlohmann::json& j) {
  ClassifierConfig c;
  const auto& m = j.at("mel");
  c.mel.sample_rate = m.at("sample_rate");
  c.mel.stft.window_length = m.at("window_length");
  c.mel.stft.hop = m.at("hop");
  c.mel.stft.fft_size = m.at("fft_size");
  c.mel.num_mels = m.at("num_mels");
  c.mel.f_min = m.at("f_min");
  c.mel.f_max = m.at("f_max");
  c.mel.log_floor = m.at("log_floor");
  c.widths = j.at("widths").get<std::vector<int>>();
  c.num_classes = j.at("num_classes");
  return c;
}

std::vector<MapShape> RepresentationSet::Shapes() const {
  std::vector<MapShape> out;
  for (const auto& m : maps) out.push_back({m.size(1), m.size(2), m.size(3)});
  return out;
}

int ClassProbabilities::Argmax() const {
  return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

ClassProbabilities ToProbabilities(const torch::Tensor& logits_row) {
  auto l = logits_row.detach().to(torch::kCPU, torch::kFloat64).contiguous().view({-1});
  auto p = torch::softmax(l, 0);
  ClassProbabilities out;
  out.logits.assign(l.data_ptr<double>(), l.data_ptr<double>() + l.numel());
  out.probs.assign(p.data_ptr<double>(), p.data_ptr<double>() + p.numel());
  return out;
}

ClassifierNetImpl::ClassifierNetImpl(const ClassifierConfig& cfg) : cfg_(cfg) {
  cfg_.mel.Validate();
  LMACTD_CHECK(cfg_.widths.size() == 4, InvalidArgument, "classifier needs exactly 4 blocks");
  LMACTD_CHECK(cfg_.num_classes >= 2, InvalidArgument, "classifier needs >= 2 classes");
  LMACTD_CHECK((cfg_.mel.num_mels >> 4) >= 1, InvalidArgument, "classifier needs >= 16 mel bands");
  input_norm_ = register_module("input_norm", torch::nn::BatchNorm1d(cfg_.mel.num_mels));
  int in = 1;
  for (std::size_t b = 0; b < cfg_.widths.size(); ++b) {
    const int out = cfg_.widths[b];
    convs_.push_back(register_module(
        "conv" + std::to_string(b),
        torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).padding(1).bias(false))));
    norms_.push_back(register_module("norm" + std::to_string(b), torch::nn::BatchNorm2d(out)));
    in = out;
  }
  head_ = register_module("head", torch::nn::Linear(in, cfg_.num_classes));
  if (cfg_.zero_init_head) {
    torch::NoGradGuard g;
    head_->weight.zero_();
    head_->bias.zero_();
  }
}

torch::Tensor ClassifierNetImpl::forward(const torch::Tensor& wave) {
  return ForwardFeatures(LogMelSpectrogram(wave, cfg_.mel));
}

torch::Tensor ClassifierNetImpl::ForwardFeatures(const torch::Tensor& log_mel, RepresentationSet* taps) {
  auto x = input_norm_(log_mel).unsqueeze(1);  // [B, 1, mels, frames]
  if (taps) taps->maps.clear();
  for (std::size_t b = 0; b < convs_.size(); ++b) {
    x = torch::relu(norms_[b](convs_[b](x)));
    x = torch::avg_pool2d(x, {2, 2});
    if (taps) taps->maps.push_back(x);
  }
  auto per_time = x.mean(2);  // [B, C, T']
  auto pooled = per_time.mean(2) + std::get<0>(per_time.max(2));
  return head_(pooled);
}

Classifier::Classifier(ClassifierConfig cfg, std::vector<std::string> class_names)
    : cfg_(std::move(cfg)), class_names_(std::move(class_names)), net_(cfg_) {
  net_->eval();
  LMACTD_CHECK(static_cast<int>(class_names_.size()) == cfg_.num_classes, InvalidArgument,
               "class name count does not match num_classes");
}

int64_t Classifier::MinSamples() const {
  return cfg_.mel.stft.window_length + 15 * static_cast<int64_t>(cfg_.mel.stft.hop);
}

std::vector<MapShape> Classifier::TapShapes(int64_t num_samples) const {
  CheckLength(num_samples);
  int64_t f = cfg_.mel.num_mels, t = cfg_.mel.stft.NumFrames(num_samples);
  std::vector<MapShape> out;
  for (int w : cfg_.widths) {
    f /= 2;
    t /= 2;
    out.push_back({w, f, t});
  }
  return out;
}

void Classifier::CheckLength(int64_t num_samples) const {
  LMACTD_CHECK(num_samples >= MinSamples(), InvalidArgument,
               "input of " + std::to_string(num_samples) + " samples is shorter than the " +
                   std::to_string(MinSamples()) + " the classifier needs");
}

void Classifier::CheckInput(const Waveform& wave) const {
  wave.Validate();
  LMACTD_CHECK(wave.sample_rate == cfg_.mel.sample_rate, InvalidArgument,
               "wrong sample rate: got " + std::to_string(wave.sample_rate) + " Hz, classifier expects " +
                   std::to_string(cfg_.mel.sample_rate) + " Hz");
  CheckLength(static_cast<int64_t>(wave.size()));
}

torch::Tensor Classifier::Logits(const torch::Tensor& wave) const {
  CheckLength(wave.size(-1));
  return net_->forward(wave.dim() == 1 ? wave.unsqueeze(0) : wave);
}

torch::Tensor Classifier::LogitsAndTaps(const torch::Tensor& wave, RepresentationSet* taps) const {
  CheckLength(wave.size(-1));
  auto w = wave.dim() == 1 ? wave.unsqueeze(0) : wave;
  return net_->ForwardFeatures(LogMelSpectrogram(w, cfg_.mel), taps);
}

ClassProbabilities Classifier::Classify(const Waveform& wave) const {
  CheckInput(wave);
  torch::NoGradGuard no_grad;
  auto dtype = net_->parameters().front().scalar_type();
  return ToProbabilities(Logits(wave.ToTensor().to(dtype))[0]);
}

RepresentationSet Classifier::Embed(const Waveform& wave) const {
  CheckInput(wave);
  torch::NoGradGuard no_grad;
  auto dtype = net_->parameters().front().scalar_type();
  RepresentationSet taps;
  LogitsAndTaps(wave.ToTensor().to(dtype), &taps);
  return taps;
}

void Classifier::Freeze() {
  for (auto& p : net_->parameters()) p.set_requires_grad(false);
  net_->eval();
  frozen_ = true;
}

void Classifier::SetTraining(bool on) {
  LMACTD_CHECK(!(on && frozen_), InvalidArgument, "cannot train a frozen classifier");
  net_->train(on);
}

void Classifier::ToDtype(torch::Dtype dtype) { net_->to(dtype); }

std::string Classifier::Serialize() const { return SerializeState(*net_); }
std::string Classifier::ParameterHash() const { return lmactd::ParameterHash(*net_); }
std::string Classifier::ArchitectureHash() const {
  return lmactd::ArchitectureHash(*net_, cfg_.ToJson());
}

void Classifier::Save(const std::filesystem::path& stem, const nlohmann::json& extra) const {
  nlohmann::json side = extra.is_object() ? extra : nlohmann::json::object();
  side["kind"] = "classifier";
  side["config"] = cfg_.ToJson();
  side["class_names"] = class_names_;
  side["architecture_hash"] = ArchitectureHash();
  side["parameter_hash"] = ParameterHash();
  WriteFileBytes(BlobPath(stem), Serialize());
  WriteJsonFile(SidecarPath(stem), side);
}

Classifier Classifier::Load(const std::filesystem::path& stem) {
  LMACTD_CHECK(std::filesystem::exists(SidecarPath(stem)), CheckpointError,
               "missing checkpoint " + SidecarPath(stem).string());
  LMACTD_CHECK(std::filesystem::exists(BlobPath(stem)), CheckpointError,
               "missing checkpoint " + BlobPath(stem).string());
  const auto side = ReadJsonFile(SidecarPath(stem));
  LMACTD_CHECK(side.value("kind", "") == "classifier", CheckpointError,
               SidecarPath(stem).string() + " is not a classifier checkpoint");
  Classifier clf(ClassifierConfig::FromJson(side.at("config")),
                 side.at("class_names").get<std::vector<std::string>>());
  LMACTD_CHECK(clf.ArchitectureHash() == side.at("architecture_hash").get<std::string>(),
               CheckpointError, "architecture hash mismatch for " + stem.string());
  DeserializeState(*clf.net_, ReadFileBytes(BlobPath(stem)));
  LMACTD_CHECK(clf.ParameterHash() == side.at("parameter_hash").get<std::string>(), CheckpointError,
               "parameter hash mismatch for " + stem.string());
  clf.Freeze();
  return clf;
}

torch::Tensor StackWaves(const Corpus& corpus, const std::vector<std::size_t>& indices) {
  LMACTD_CHECK(!indices.empty(), InvalidArgument, "empty batch");
  std::size_t len = 0;
  for (auto i : indices) len = std::max(len, corpus.samples[i].wave.size());
  auto out = torch::zeros({static_cast<int64_t>(indices.size()), static_cast<int64_t>(len)});
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const auto& s = corpus.samples[indices[b]].wave.samples;
    std::copy(s.begin(), s.end(), out[b].data_ptr<float>());
  }
  return out;
}

namespace {

struct EvalStats {
  double loss = 0.0, accuracy = 0.0;
};

EvalStats Evaluate(const Classifier& clf, const Corpus& corpus, const std::vector<std::size_t>& idx) {
  torch::NoGradGuard no_grad;
  EvalStats s;
  const std::size_t bs = 16;
  for (std::size_t start = 0; start < idx.size(); start += bs) {
    std::vector<std::size_t> batch(idx.begin() + start, idx.begin() + std::min(idx.size(), start + bs));
    auto logits = clf.Logits(StackWaves(corpus, batch));
    std::vector<int64_t> labels;
    for (auto i : batch) labels.push_back(corpus.samples[i].class_id);
    auto target = torch::tensor(labels, torch::kInt64);
    s.loss += torch::cross_entropy_loss(logits, target, {}, at::Reduction::Sum).item<double>();
    s.accuracy += logits.argmax(1).eq(target).sum().item<double>();
  }
  s.loss /= static_cast<double>(idx.size());
  s.accuracy /= static_cast<double>(idx.size());
  return s;
}

}  // namespace

double EvaluateAccuracy(const Classifier& clf, const Corpus& corpus, Split split) {
  const auto idx = corpus.Indices(split);
  LMACTD_CHECK(!idx.empty(), InvalidArgument,
               std::string("cannot evaluate accuracy: split '") + SplitName(split) + "' is empty");
  return Evaluate(clf, corpus, idx).accuracy;
}

Classifier TrainClassifier(const Corpus& corpus, const ClassifierConfig& cfg_in,
                           const ClassifierTrainConfig& tc, uint64_t seed,
                           ClassifierTrainResult* result) {
  corpus.Validate();
  const auto train_idx = corpus.Indices(Split::kTrain);
  const auto valid_idx = corpus.Indices(Split::kValid);
  LMACTD_CHECK(!train_idx.empty() && !valid_idx.empty(), InvalidArgument,
               "classifier training needs nonempty train and valid splits");
  ClassifierConfig cfg = cfg_in;
  cfg.num_classes = corpus.NumClasses();
  LMACTD_CHECK(cfg.mel.sample_rate == corpus.sample_rate, InvalidArgument,
               "corpus rate " + std::to_string(corpus.sample_rate) + " Hz differs from classifier rate " +
                   std::to_string(cfg.mel.sample_rate) + " Hz");

  torch::manual_seed(seed);
  Classifier clf(cfg, corpus.class_names);
  torch::optim::Adam opt(clf.net()->parameters(), torch::optim::AdamOptions(tc.learning_rate));
  std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ull);

  std::vector<Waveform> pool;
  if (tc.augment_probability > 0.0) {
    const std::size_t len = corpus.samples[train_idx.front()].wave.size();
    for (int k = 0; k < tc.augment_pool_size; ++k) {
      pool.push_back(k % 2 == 0 ? WhiteNoise(len, corpus.sample_rate, rng)
                                : SpeechSurrogate(len, corpus.sample_rate, rng));
    }
  }

  ClassifierTrainResult res;
  TensorMap best;
  double best_acc = -1.0, best_loss = 0.0;
  int since_best = 0;
  for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    clf.SetTraining(true);
    auto order = train_idx;
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0, correct = 0.0;
    for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
      const std::size_t end = std::min(order.size(), start + tc.batch_size);
      std::vector<std::size_t> batch(order.begin() + start, order.begin() + end);
      auto x = StackWaves(corpus, batch);
      std::vector<int64_t> labels;
      for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& s = corpus.samples[batch[b]];
        labels.push_back(s.class_id);
        if (!pool.empty() && std::uniform_real_distribution<double>(0, 1)(rng) < tc.augment_probability) {
          auto aug = AugmentWithNoise(s, pool, tc.augment_snr_lo_db, tc.augment_snr_hi_db, rng);
          x[b].narrow(0, 0, aug.wave.size()).copy_(aug.wave.ToTensor());
        }
      }
      auto target = torch::tensor(labels, torch::kInt64);
      opt.zero_grad();
      auto logits = clf.Logits(x);
      auto loss = torch::cross_entropy_loss(logits, target);
      const double lv = loss.item<double>();
      if (!std::isfinite(lv)) {
        throw TrainingDiverged("classifier loss became non-finite at epoch " + std::to_string(epoch) +
                               " (batch starting at " + std::to_string(start) + ")");
      }
      loss.backward();
      opt.step();
      loss_sum += lv * static_cast<double>(batch.size());
      correct += logits.argmax(1).eq(target).sum().item<double>();
    }
    clf.SetTraining(false);
    const auto valid = Evaluate(clf, corpus, valid_idx);
    ClassifierEpoch rec{epoch, loss_sum / order.size(), correct / order.size(), valid.loss, valid.accuracy};
    res.history.push_back(rec);
    if (tc.verbose) {
      std::cerr << "[train-clf] epoch " << epoch << " loss " << rec.train_loss << " valid_acc "
                << rec.valid_accuracy << "\n";
    }
    if (valid.accuracy > best_acc || (valid.accuracy == best_acc && valid.loss < best_loss)) {
      best_acc = valid.accuracy;
      best_loss = valid.loss;
      best = SnapshotState(*clf.net());
      res.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= tc.patience) {
      break;
    }
  }
  RestoreState(*clf.net(), best);
  res.best_valid_accuracy = best_acc;
  clf.Freeze();
  if (result) *result = std::move(res);
  return clf;
}

}  // namespace lmactd
