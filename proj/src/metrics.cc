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

#include "lmactd/metrics.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "lmactd/error.h"

namespace lmactd {
namespace {

void RequireNonEmpty(std::span<const ConfidenceTriple> t, const char* metric) {
  LMACTD_CHECK(!t.empty(), InvalidArgument, std::string(metric) + ": no samples");
}

std::vector<double> Flatten(const torch::Tensor& t) {
  auto c = t.detach().to(torch::kCPU, torch::kFloat64).contiguous().view({-1});
  return std::vector<double>(c.data_ptr<double>(), c.data_ptr<double>() + c.numel());
}

double CheckedSum(std::span<const double> a, const char* metric) {
  LMACTD_CHECK(!a.empty(), InvalidArgument, std::string(metric) + ": empty saliency");
  double sum = 0.0;
  for (double v : a) {
    LMACTD_CHECK(std::isfinite(v) && v >= 0.0, InvalidArgument,
                 std::string(metric) + ": saliency must be finite and nonnegative");
    sum += v;
  }
  LMACTD_CHECK(sum > 0.0, InvalidArgument, std::string("undefined ") + metric + ": saliency is all zero");
  return sum;
}

}  // namespace

ConfidenceTriple MakeTriple(const ExplanationResult& r) {
  const int c = r.probs_x.Argmax();
  return {r.probs_x.probs[c], r.probs_i.probs[c], r.probs_iout.probs[c], c, r.probs_i.Argmax()};
}

double AverageIncrease(std::span<const ConfidenceTriple> t) {
  RequireNonEmpty(t, "AI");
  double n = 0.0;
  for (const auto& s : t) n += s.p_i > s.p_x ? 1.0 : 0.0;
  return 100.0 * n / static_cast<double>(t.size());
}

double AverageDecrease(std::span<const ConfidenceTriple> t) {
  RequireNonEmpty(t, "AD");
  double acc = 0.0;
  for (const auto& s : t) {
    LMACTD_CHECK(s.p_x > 0.0, InvalidArgument, "undefined relative drop: p_x = 0");
    acc += std::max(0.0, s.p_x - s.p_i) / s.p_x;
  }
  return 100.0 * acc / static_cast<double>(t.size());
}

double AverageGain(std::span<const ConfidenceTriple> t) {
  RequireNonEmpty(t, "AG");
  double acc = 0.0;
  for (const auto& s : t) {
    LMACTD_CHECK(s.p_x < 1.0, InvalidArgument, "undefined relative gain: p_x = 1");
    acc += std::max(0.0, s.p_i - s.p_x) / (1.0 - s.p_x);
  }
  return 100.0 * acc / static_cast<double>(t.size());
}

double Faithfulness(std::span<const ConfidenceTriple> t) {
  RequireNonEmpty(t, "FF");
  double acc = 0.0;
  for (const auto& s : t) acc += s.p_x - s.p_iout;
  return acc / static_cast<double>(t.size());
}

double InputFidelity(std::span<const ConfidenceTriple> t) {
  RequireNonEmpty(t, "Fid-In");
  double n = 0.0;
  for (const auto& s : t) n += s.pred_i == s.pred_x ? 1.0 : 0.0;
  return n / static_cast<double>(t.size());
}

double Sparseness(std::span<const double> a) {
  const double sum = CheckedSum(a, "sparseness");
  std::vector<double> sorted(a.begin(), a.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    acc += (2.0 * static_cast<double>(k + 1) - n - 1.0) * sorted[k];
  }
  return acc / (n * sum);
}

double Sparseness(const torch::Tensor& saliency) { return Sparseness(Flatten(saliency)); }

double Complexity(std::span<const double> a) {
  const double sum = CheckedSum(a, "complexity");
  double h = 0.0;
  for (double v : a) {
    if (v > 0.0) {
      const double p = v / sum;
      h -= p * std::log(p);
    }
  }
  return h;
}

double Complexity(const torch::Tensor& saliency) { return Complexity(Flatten(saliency)); }

torch::Tensor GradientSaliency(const Classifier& clf, const Waveform& wave) {
  clf.CheckInput(wave);
  const auto dtype = clf.net()->parameters().front().scalar_type();
  torch::Tensor mel;
  {
    torch::NoGradGuard no_grad;
    mel = LogMelSpectrogram(wave.ToTensor().to(dtype), clf.config().mel);
  }
  mel = mel.unsqueeze(0).requires_grad_(true);
  torch::AutoGradMode enable(true);
  auto logits = clf.net()->ForwardFeatures(mel);
  const int64_t pred = logits.argmax(1).item<int64_t>();
  auto grad = torch::autograd::grad({logits[0][pred]}, {mel}, {}, false, false, /*allow_unused=*/true)[0];
  if (!grad.defined()) return torch::zeros_like(mel[0]).detach();
  return grad[0].abs().detach();
}

std::pair<torch::Tensor, torch::Tensor> InterpreterExplainer::Render(const Classifier& clf,
                                                                     const torch::Tensor& wave) const {
  torch::NoGradGuard no_grad;
  auto out = itp_.Forward(clf, wave);
  return {out.explanation, out.complement};
}

std::pair<torch::Tensor, torch::Tensor> GradientSaliencyExplainer::Render(const Classifier& clf,
                                                                          const torch::Tensor& wave) const {
  const auto x = wave.view({-1});
  const auto& mel_cfg = clf.config().mel;
  auto sal = GradientSaliency(clf, Waveform::FromTensor(x, mel_cfg.sample_rate)).to(torch::kFloat64);
  torch::NoGradGuard no_grad;
  const double peak = sal.max().item<double>();
  auto norm = peak > 0.0 ? sal / peak : torch::zeros_like(sal);
  auto fb = MelFilterbank(mel_cfg, torch::kFloat64);
  auto mask = torch::matmul(fb.transpose(0, 1), norm).clamp(0.0, 1.0);  // [bins, frames]
  auto spec = Stft(x.to(torch::kFloat64), mel_cfg.stft);
  const int64_t T = x.size(0);
  auto i = Istft(spec * mask, mel_cfg.stft, T);
  auto i_out = Istft(spec * (1.0 - mask), mel_cfg.stft, T);
  return {i.to(wave.scalar_type()).unsqueeze(0), i_out.to(wave.scalar_type()).unsqueeze(0)};
}

ExplanationResult ExplainWith(const Classifier& clf, const Explainer& explainer, const Waveform& wave) {
  clf.CheckInput(wave);
  const auto dtype = clf.net()->parameters().front().scalar_type();
  auto [i, i_out] = explainer.Render(clf, wave.ToTensor().to(dtype).unsqueeze(0));
  return BundleExplanation(clf, wave, i, i_out);
}

nlohmann::json MetricDefinitions() {
  return {{"confidence", "softmax probability of the class predicted for x"},
          {"AI", "100 * mean 1[p_i > p_x]"},
          {"AD", "100 * mean max(0, p_x - p_i) / p_x (mask-in signal i)"},
          {"AG", "100 * mean max(0, p_i - p_x) / (1 - p_x)"},
          {"FF", "mean (p_x - p_iout)"},
          {"Fid-In", "mean 1[argmax f(i) == argmax f(x)]"},
          {"SPS", "Gini index of |STFT(i)|, mean over samples"},
          {"COMP", "entropy (nats) of |STFT(i)| / sum, mean over samples"}};
}

MetricsReport ComputeReport(std::span<const ConfidenceTriple> triples, std::span<const torch::Tensor> saliencies) {
  MetricsReport r;
  r.num_samples = triples.size();
  r.ai = AverageIncrease(triples);
  r.ad = AverageDecrease(triples);
  r.ag = AverageGain(triples);
  r.ff = Faithfulness(triples);
  r.fid_in = InputFidelity(triples);
  double sps = 0.0, comp = 0.0;
  std::size_t defined = 0;
  for (const auto& s : saliencies) {
    const auto flat = Flatten(s);
    double sum = 0.0;
    for (double v : flat) sum += v;
    if (!(sum > 0.0)) {
      ++r.undefined_saliency;
      continue;
    }
    sps += Sparseness(flat);
    comp += Complexity(flat);
    ++defined;
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  r.sps = defined ? sps / defined : nan;
  r.comp = defined ? comp / defined : nan;
  return r;
}

MetricsReport EvaluateSuite(const Classifier& clf, const Explainer& explainer, const Corpus& corpus, Split split,
                            std::vector<ConfidenceTriple>* triples_out) {
  const auto idx = corpus.Indices(split);
  LMACTD_CHECK(!idx.empty(), InvalidArgument, std::string("split '") + SplitName(split) + "' is empty");
  std::vector<ConfidenceTriple> triples;
  std::vector<torch::Tensor> saliencies;
  for (auto i : idx) {
    const auto r = ExplainWith(clf, explainer, corpus.samples[i].wave);
    triples.push_back(MakeTriple(r));
    saliencies.push_back(r.saliency);
  }
  auto report = ComputeReport(triples, saliencies);
  report.method = explainer.Label();
  report.alpha = explainer.Alpha();
  report.provenance = {{"split", SplitName(split)}, {"corpus", corpus.provenance},
                       {"corpus_digest", corpus.Digest()}, {"classifier_hash", clf.ParameterHash()}};
  if (triples_out) *triples_out = std::move(triples);
  return report;
}

nlohmann::json MetricsReport::ToJson() const {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return {{"method", method},
          {"alpha", num(alpha)},
          {"num_samples", num_samples},
          {"metrics",
           {{"AI", ai}, {"AD", ad}, {"AG", ag}, {"FF", ff}, {"Fid-In", fid_in}, {"SPS", num(sps)}, {"COMP", num(comp)}}},
          {"undefined_saliency", undefined_saliency},
          {"definitions", MetricDefinitions()},
          {"provenance", provenance}};
}

namespace {

std::string RowName(const MetricsReport& r) {
  if (!std::isfinite(r.alpha)) return r.method;
  std::ostringstream a;
  a << r.method << " a=" << std::fixed << std::setprecision(2) << r.alpha;
  return a.str();
}

}  // namespace

std::string FormatReportTable(std::span<const MetricsReport> reports) {
  std::ostringstream os;
  const std::vector<std::string> cols{"AI", "AD", "AG", "FF", "Fid-In", "SPS", "COMP"};
  int w0 = 8;
  for (const auto& r : reports) w0 = std::max<int>(w0, static_cast<int>(RowName(r).size()) + 1);
  os << std::left << std::setw(w0) << "Method";
  for (const auto& c : cols) os << std::right << std::setw(9) << c;
  os << "\n";
  for (const auto& r : reports) {
    os << std::left << std::setw(w0) << RowName(r);
    for (double v : {r.ai, r.ad, r.ag, r.ff, r.fid_in, r.sps, r.comp}) {
      if (std::isfinite(v)) {
        os << std::right << std::setw(9) << std::fixed << std::setprecision(2) << v;
      } else {
        os << std::right << std::setw(9) << "n/a";
      }
    }
    os << "\n";
  }
  return os.str();
}

std::string MetricsReport::ToTable() const { return FormatReportTable({this, 1}); }

}  // namespace lmactd
