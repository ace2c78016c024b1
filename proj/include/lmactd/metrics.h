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

#ifndef LMACTD_METRICS_H_
#define LMACTD_METRICS_H_

#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "lmactd/classifier.h"
#include "lmactd/datasets.h"
#include "lmactd/interpreter.h"

namespace lmactd {

// Confidences in the class the classifier predicts for x.
struct ConfidenceTriple {
  double p_x = 0.0;
  double p_i = 0.0;
  double p_iout = 0.0;
  int pred_x = 0;
  int pred_i = 0;
};

ConfidenceTriple MakeTriple(const ExplanationResult& r);

// 100 * fraction of samples with p_i > p_x.
double AverageIncrease(std::span<const ConfidenceTriple> t);
// 100 * mean(max(0, p_x - p_i) / p_x); mask-in convention.
double AverageDecrease(std::span<const ConfidenceTriple> t);
// 100 * mean(max(0, p_i - p_x) / (1 - p_x)).
double AverageGain(std::span<const ConfidenceTriple> t);
// mean(p_x - p_iout).
double Faithfulness(std::span<const ConfidenceTriple> t);
// mean 1[pred_i == pred_x].
double InputFidelity(std::span<const ConfidenceTriple> t);

// Gini index of a flattened nonnegative map.
double Sparseness(std::span<const double> a);
double Sparseness(const torch::Tensor& saliency);
// Entropy (nats) of a / sum(a).
double Complexity(std::span<const double> a);
double Complexity(const torch::Tensor& saliency);

// |d logit_pred / d log-mel| with the shape of the log-mel input.
torch::Tensor GradientSaliency(const Classifier& clf, const Waveform& wave);

// Produces (i, i_out) for a [1, T] input.
class Explainer {
 public:
  virtual ~Explainer() = default;
  virtual std::string Label() const = 0;
  virtual std::pair<torch::Tensor, torch::Tensor> Render(const Classifier& clf,
                                                         const torch::Tensor& wave) const = 0;
  // NaN for explainers without a fusion weight.
  virtual double Alpha() const { return std::numeric_limits<double>::quiet_NaN(); }
};

class InterpreterExplainer : public Explainer {
 public:
  explicit InterpreterExplainer(const Interpreter& itp, std::string label = "lmac-td")
      : itp_(itp), label_(std::move(label)) {}
  std::string Label() const override { return label_; }
  std::pair<torch::Tensor, torch::Tensor> Render(const Classifier& clf,
                                                 const torch::Tensor& wave) const override;
  double Alpha() const override { return itp_.alpha(); }

 private:
  const Interpreter& itp_;
  std::string label_;
};

// Gradient saliency projected back to the linear-frequency STFT as a
// [0, 1] mask: i = ISTFT(m X), i_out = ISTFT((1 - m) X).
class GradientSaliencyExplainer : public Explainer {
 public:
  std::string Label() const override { return "saliency"; }
  std::pair<torch::Tensor, torch::Tensor> Render(const Classifier& clf,
                                                 const torch::Tensor& wave) const override;
};

ExplanationResult ExplainWith(const Classifier& clf, const Explainer& explainer, const Waveform& wave);

struct MetricsReport {
  std::string method;
  double alpha = std::numeric_limits<double>::quiet_NaN();
  std::size_t num_samples = 0;
  double ai = 0.0, ad = 0.0, ag = 0.0, ff = 0.0, fid_in = 0.0;
  // Means over samples whose saliency is not all-zero; NaN if none.
  double sps = 0.0, comp = 0.0;
  std::size_t undefined_saliency = 0;
  nlohmann::json provenance;

  nlohmann::json ToJson() const;
  // Aligned columns: AI AD AG FF Fid-In SPS COMP.
  std::string ToTable() const;
};

// Written into every report so the metric conventions travel with it.
nlohmann::json MetricDefinitions();

MetricsReport ComputeReport(std::span<const ConfidenceTriple> triples,
                            std::span<const torch::Tensor> saliencies);

// Runs the explainer on every sample of `split` in corpus order.
// One header row, one row per report.
std::string FormatReportTable(std::span<const MetricsReport> reports);

MetricsReport EvaluateSuite(const Classifier& clf, const Explainer& explainer, const Corpus& corpus,
                            Split split, std::vector<ConfidenceTriple>* triples = nullptr);

}  // namespace lmactd

#endif  // LMACTD_METRICS_H_
