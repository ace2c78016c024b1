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

#include "lmactd/training.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "lmactd/checkpoint.h"
#include "lmactd/error.h"

namespace lmactd {

void LossWeights::Validate() const {
  for (double v : {lambda_in, lambda_out, lambda_reg}) {
    LMACTD_CHECK(std::isfinite(v) && v >= 0.0, InvalidArgument,
                 "loss weights must be finite and nonnegative");
  }
}

double CrossEntropy(const std::vector<double>& p, const std::vector<double>& q) {
  LMACTD_CHECK(p.size() == q.size() && !p.empty(), InvalidArgument,
               "cross-entropy needs equal-length distributions");
  double acc = 0.0;
  for (std::size_t c = 0; c < p.size(); ++c) acc -= p[c] * std::log(q[c] + kLogGuard);
  return acc;
}

double Entropy(const std::vector<double>& p) { return CrossEntropy(p, p); }

LossBreakdown MaskingLoss(const ClassProbabilities& probs_x, const ClassProbabilities& probs_i,
                          const ClassProbabilities& probs_iout, double reg, const LossWeights& w) {
  w.Validate();
  LossBreakdown b;
  b.mask_in = CrossEntropy(probs_x.probs, probs_i.probs);
  b.mask_out = CrossEntropy(probs_x.probs, probs_iout.probs);
  b.reg = reg;
  b.total = CombineMaskingTerms(b.mask_in, b.mask_out, b.reg, w);
  return b;
}

LossBreakdown MaskingLoss(const ClassProbabilities& probs_x, const ClassProbabilities& probs_i,
                          const ClassProbabilities& probs_iout, const Waveform& explanation,
                          const LossWeights& w) {
  return MaskingLoss(probs_x, probs_i, probs_iout, SpectralL1(explanation, RegularizerStftConfig()), w);
}

MaskingLossTerms MaskingLoss(const torch::Tensor& probs_x, const torch::Tensor& probs_i,
                             const torch::Tensor& probs_iout, const torch::Tensor& explanation,
                             const LossWeights& w) {
  auto target = probs_x.detach();
  MaskingLossTerms t;
  t.mask_in = -(target * torch::log(probs_i + kLogGuard)).sum(-1).mean();
  t.mask_out = -(target * torch::log(probs_iout + kLogGuard)).sum(-1).mean();
  t.reg = SpectralL1(explanation, RegularizerStftConfig());
  t.total = CombineMaskingTerms(t.mask_in, t.mask_out, t.reg, w);
  return t;
}

MaskingLossTerms InterpreterLoss(const Classifier& clf, const Interpreter& itp, const torch::Tensor& wave,
                                 const LossWeights& w) {
  torch::Tensor probs_x;
  RepresentationSet taps;
  {
    torch::NoGradGuard no_grad;
    probs_x = torch::softmax(clf.LogitsAndTaps(wave, &taps), -1);
  }
  auto out = itp.Forward(taps, wave);
  auto probs_i = torch::softmax(clf.Logits(out.explanation), -1);
  auto probs_iout = torch::softmax(clf.Logits(out.complement), -1);
  return MaskingLoss(probs_x, probs_i, probs_iout, out.explanation, w);
}

Interpreter MakeInterpreter(const InterpreterConfig& cfg, const Classifier& clf, uint64_t seed) {
  torch::manual_seed(seed);
  return Interpreter(cfg, clf);
}

namespace {

struct Totals {
  double mask_in = 0.0, mask_out = 0.0, reg = 0.0, total = 0.0;
  void Add(const MaskingLossTerms& t, double n) {
    mask_in += t.mask_in.item<double>() * n;
    mask_out += t.mask_out.item<double>() * n;
    reg += t.reg.item<double>() * n;
    total += t.total.item<double>() * n;
  }
  void Scale(double inv) {
    mask_in *= inv;
    mask_out *= inv;
    reg *= inv;
    total *= inv;
  }
};

std::vector<std::vector<std::size_t>> Batches(const std::vector<std::size_t>& idx, int batch_size) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t s = 0; s < idx.size(); s += batch_size) {
    out.emplace_back(idx.begin() + s, idx.begin() + std::min(idx.size(), s + batch_size));
  }
  return out;
}

}  // namespace

InterpreterTrainResult TrainInterpreter(const Classifier& clf, Interpreter& itp, const Corpus& corpus,
                                        const LossWeights& w, const InterpreterTrainConfig& cfg,
                                        uint64_t seed) {
  LMACTD_CHECK(clf.frozen(), InvalidArgument, "interpreter training needs a frozen classifier");
  w.Validate();
  corpus.Validate();
  const auto train_idx = corpus.Indices(Split::kTrain);
  LMACTD_CHECK(!train_idx.empty(), InvalidArgument, "train split is empty");
  auto valid_idx = corpus.Indices(Split::kValid);
  if (valid_idx.empty()) valid_idx = train_idx;
  if (cfg.deterministic) torch::set_num_threads(1);

  const auto dtype = clf.net()->parameters().front().scalar_type();
  torch::optim::Adam opt(itp.net()->parameters(), torch::optim::AdamOptions(cfg.learning_rate));
  std::mt19937_64 rng(seed);

  InterpreterTrainResult res;
  TensorMap best = SnapshotState(*itp.net());
  double best_valid = std::numeric_limits<double>::infinity();
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    itp.SetTraining(true);
    auto order = train_idx;
    std::shuffle(order.begin(), order.end(), rng);
    Totals tr;
    bool diverged = false;
    for (const auto& batch : Batches(order, cfg.batch_size)) {
      auto x = StackWaves(corpus, batch).to(dtype);
      opt.zero_grad();
      auto terms = InterpreterLoss(clf, itp, x, w);
      if (!std::isfinite(terms.total.item<double>())) {
        diverged = true;
        break;
      }
      terms.total.backward();
      torch::nn::utils::clip_grad_norm_(itp.net()->parameters(), cfg.grad_clip);
      opt.step();
      tr.Add(terms, static_cast<double>(batch.size()));
    }
    if (diverged) {
      RestoreState(*itp.net(), best);
      res.aborted = true;
      res.message = "non-finite loss at epoch " + std::to_string(epoch) + "; restored epoch " +
                    std::to_string(res.best_epoch);
      break;
    }
    tr.Scale(1.0 / static_cast<double>(order.size()));

    itp.SetTraining(false);
    Totals va;
    {
      torch::NoGradGuard no_grad;
      for (const auto& batch : Batches(valid_idx, cfg.batch_size)) {
        va.Add(InterpreterLoss(clf, itp, StackWaves(corpus, batch).to(dtype), w),
               static_cast<double>(batch.size()));
      }
    }
    va.Scale(1.0 / static_cast<double>(valid_idx.size()));
    res.history.push_back({epoch, tr.mask_in, tr.mask_out, tr.reg, tr.total, va.total});
    if (cfg.verbose) {
      std::cerr << "[train-itp] epoch " << epoch << " total " << tr.total << " (in " << tr.mask_in
                << ", out " << tr.mask_out << ", reg " << tr.reg << ") valid " << va.total << "\n";
    }
    if (std::isfinite(va.total) && va.total < best_valid) {
      best_valid = va.total;
      best = SnapshotState(*itp.net());
      res.best_epoch = epoch;
    }
  }
  if (!res.aborted) RestoreState(*itp.net(), best);
  itp.SetTraining(false);
  return res;
}

void WriteHistoryJsonl(const std::filesystem::path& path, const std::vector<InterpreterEpoch>& history) {
  std::ofstream out(path, std::ios::trunc);
  LMACTD_CHECK(out.good(), IoError, "cannot write " + path.string());
  for (const auto& e : history) {
    out << nlohmann::json{{"epoch", e.epoch},   {"mask_in", e.mask_in}, {"mask_out", e.mask_out},
                          {"reg", e.reg},       {"total", e.total},     {"valid_total", e.valid_total}}
               .dump()
        << "\n";
  }
}

FdCheckResult FiniteDifferenceCheck(const std::function<torch::Tensor()>& loss_fn,
                                    const std::vector<torch::Tensor>& params, double eps, int num_coords,
                                    uint64_t seed, double floor_scale) {
  LMACTD_CHECK(eps >= 1e-7 && eps <= 1e-4, InvalidArgument, "eps must lie in [1e-7, 1e-4]");
  LMACTD_CHECK(!params.empty(), InvalidArgument, "no parameters to check");
  int64_t total = 0;
  for (const auto& p : params) {
    LMACTD_CHECK(p.scalar_type() == torch::kFloat64, InvalidArgument,
                 "finite-difference check needs float64 parameters");
    total += p.numel();
  }

  for (const auto& p : params) {
    if (p.grad().defined()) p.mutable_grad().zero_();
  }
  auto loss = loss_fn();
  std::vector<torch::Tensor> grads;
  if (loss.requires_grad()) {
    grads = torch::autograd::grad({loss}, params, {}, /*retain_graph=*/false, /*create_graph=*/false,
                                  /*allow_unused=*/true);
  }

  std::mt19937_64 rng(seed);
  const int n = static_cast<int>(std::min<int64_t>(num_coords, total));
  std::vector<int64_t> flat(total);
  std::iota(flat.begin(), flat.end(), 0);
  std::shuffle(flat.begin(), flat.end(), rng);
  flat.resize(n);
  std::sort(flat.begin(), flat.end());

  FdCheckResult r;
  r.floor = floor_scale * std::max(1.0, std::abs(loss.item<double>()));
  torch::NoGradGuard no_grad;
  for (int64_t f : flat) {
    std::size_t pi = 0;
    int64_t off = f;
    while (off >= params[pi].numel()) off -= params[pi++].numel();
    auto view = params[pi].view({-1});
    const double orig = view[off].item<double>();
    view[off].fill_(orig + eps);
    const double lp = loss_fn().item<double>();
    view[off].fill_(orig - eps);
    const double lm = loss_fn().item<double>();
    view[off].fill_(orig);
    const double numeric = (lp - lm) / (2.0 * eps);
    const double analytic =
        (pi < grads.size() && grads[pi].defined()) ? grads[pi].view({-1})[off].item<double>() : 0.0;
    const double denom = std::max({std::abs(analytic), std::abs(numeric), r.floor});
    r.max_relative_error = std::max(r.max_relative_error, std::abs(analytic - numeric) / denom);
    r.analytic.push_back(analytic);
    r.numeric.push_back(numeric);
  }
  return r;
}

}  // namespace lmactd
