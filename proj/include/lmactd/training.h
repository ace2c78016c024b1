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

#ifndef LMACTD_TRAINING_H_
#define LMACTD_TRAINING_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "lmactd/classifier.h"
#include "lmactd/datasets.h"
#include "lmactd/interpreter.h"

namespace lmactd {

struct LossWeights {
  double lambda_in = 5.0;
  double lambda_out = 0.2;
  double lambda_reg = 6.0;
  void Validate() const;
};

struct LossBreakdown {
  double total = 0.0;
  double mask_in = 0.0;
  double mask_out = 0.0;
  double reg = 0.0;
};

// The one place the three terms are combined.
template <typename T>
T CombineMaskingTerms(const T& mask_in, const T& mask_out, const T& reg, const LossWeights& w) {
  return w.lambda_in * mask_in - w.lambda_out * mask_out + w.lambda_reg * reg;
}

constexpr double kLogGuard = 1e-12;

// -sum_c p[c] log(q[c] + 1e-12).
double CrossEntropy(const std::vector<double>& p, const std::vector<double>& q);
double Entropy(const std::vector<double>& p);

LossBreakdown MaskingLoss(const ClassProbabilities& probs_x, const ClassProbabilities& probs_i,
                          const ClassProbabilities& probs_iout, const Waveform& explanation,
                          const LossWeights& w);
// Same, with a precomputed regularizer value.
LossBreakdown MaskingLoss(const ClassProbabilities& probs_x, const ClassProbabilities& probs_i,
                          const ClassProbabilities& probs_iout, double reg, const LossWeights& w);

struct MaskingLossTerms {
  torch::Tensor total, mask_in, mask_out, reg;
};

// Batched, differentiable. probs_x is detached; every term is a batch mean.
MaskingLossTerms MaskingLoss(const torch::Tensor& probs_x, const torch::Tensor& probs_i,
                             const torch::Tensor& probs_iout, const torch::Tensor& explanation,
                             const LossWeights& w);

// One pipeline pass on a [B, T] batch: classify x (no grad), decode,
// mask, synthesize, re-classify i and i_out, combine.
MaskingLossTerms InterpreterLoss(const Classifier& clf, const Interpreter& itp,
                                 const torch::Tensor& wave, const LossWeights& w);

struct InterpreterTrainConfig {
  double learning_rate = 5e-4;
  int batch_size = 8;
  int epochs = 50;
  double grad_clip = 5.0;
  // Single intra-op thread so reruns are bit-reproducible.
  bool deterministic = true;
  bool verbose = false;
};

struct InterpreterEpoch {
  int epoch = 0;
  double mask_in = 0.0, mask_out = 0.0, reg = 0.0, total = 0.0;
  double valid_total = 0.0;
};

struct InterpreterTrainResult {
  std::vector<InterpreterEpoch> history;
  int best_epoch = 0;
  bool aborted = false;
  std::string message;
};

// Seeds the global generator and builds a fresh interpreter.
Interpreter MakeInterpreter(const InterpreterConfig& cfg, const Classifier& clf, uint64_t seed);

// Optimizes the interpreter against the frozen classifier and leaves it at
// the epoch with the lowest valid total loss. A non-finite loss stops
// training, restores that checkpoint and sets `aborted`.
InterpreterTrainResult TrainInterpreter(const Classifier& clf, Interpreter& itp, const Corpus& corpus,
                                        const LossWeights& w, const InterpreterTrainConfig& cfg,
                                        uint64_t seed);

// {epoch, mask_in, mask_out, reg, total, valid_total} per line.
void WriteHistoryJsonl(const std::filesystem::path& path, const std::vector<InterpreterEpoch>& history);

struct FdCheckResult {
  double max_relative_error = 0.0;
  double floor = 0.0;  // denominator floor actually used
  std::vector<double> analytic;
  std::vector<double> numeric;
};

// Central differences on `num_coords` random coordinates of `params`
// versus autograd. Parameters must be float64 and eps in [1e-7, 1e-4].
// Relative error is |a - n| / max(|a|, |n|, floor) with
// floor = floor_scale * max(1, |loss|): float64 round-off in the difference
// grows with the loss magnitude, so gradients below that scale are compared
// in absolute terms.
FdCheckResult FiniteDifferenceCheck(const std::function<torch::Tensor()>& loss_fn,
                                    const std::vector<torch::Tensor>& params, double eps,
                                    int num_coords = 32, uint64_t seed = 0, double floor_scale = 1e-6);

}  // namespace lmactd

#endif  // LMACTD_TRAINING_H_
