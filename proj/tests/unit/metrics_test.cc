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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "lmactd/error.h"
#include "test_util.h"

namespace lmactd {
namespace {

using testing::Gen;

std::vector<ConfidenceTriple> PxPi(std::vector<std::pair<double, double>> v) {
  std::vector<ConfidenceTriple> t;
  for (auto [x, i] : v) t.push_back({x, i, 0.0, 0, 0});
  return t;
}

TEST(AverageIncreaseTest, Examples) {
  EXPECT_NEAR(AverageIncrease(PxPi({{0.5, 0.7}, {0.9, 0.4}, {0.2, 0.3}})), 66.67, 0.01);
  EXPECT_DOUBLE_EQ(AverageIncrease(PxPi({{0.1, 0.2}, {0.3, 0.9}})), 100.0);
  EXPECT_DOUBLE_EQ(AverageIncrease(PxPi({{0.4, 0.4}, {0.3, 0.3}})), 0.0);
  EXPECT_THROW(AverageIncrease({}), InvalidArgument);
}

TEST(AverageDecreaseTest, Examples) {
  EXPECT_NEAR(AverageDecrease(PxPi({{0.8, 0.4}})), 50.0, 1e-6);
  EXPECT_DOUBLE_EQ(AverageDecrease(PxPi({{0.5, 0.6}, {0.2, 0.2}})), 0.0);
  EXPECT_NEAR(AverageDecrease(PxPi({{0.5, 0.0}, {0.9, 0.0}})), 100.0, 1e-6);
  try {
    AverageDecrease(PxPi({{0.0, 0.1}}));
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("undefined relative drop"), std::string::npos);
  }
}

TEST(AverageGainTest, Examples) {
  EXPECT_DOUBLE_EQ(AverageGain(PxPi({{0.5, 0.4}, {0.3, 0.3}})), 0.0);
  EXPECT_NEAR(AverageGain(PxPi({{0.5, 1.0}})), 100.0, 1e-6);
  EXPECT_NEAR(AverageGain(PxPi({{0.5, 0.75}, {0.8, 0.8}})), 25.0, 1e-6);
  EXPECT_THROW(AverageGain(PxPi({{1.0, 1.0}})), InvalidArgument);
}

TEST(FaithfulnessTest, Examples) {
  std::vector<ConfidenceTriple> t{{0.9, 0.0, 0.1, 0, 0}};
  EXPECT_NEAR(Faithfulness(t), 0.8, 1e-6);
  t = {{0.3, 0, 0.3, 0, 0}, {0.6, 0, 0.6, 0, 0}};
  EXPECT_DOUBLE_EQ(Faithfulness(t), 0.0);
  t = {{0.3, 0, 0.0, 0, 0}, {0.6, 0, 0.0, 0, 0}};
  EXPECT_NEAR(Faithfulness(t), 0.45, 1e-12);
  EXPECT_THROW(Faithfulness({}), InvalidArgument);
}

TEST(InputFidelityTest, Counting) {
  std::vector<ConfidenceTriple> t(10);
  for (int k = 0; k < 10; ++k) {
    t[k].pred_x = k % 3;
    t[k].pred_i = k < 7 ? k % 3 : (k % 3) + 1;
  }
  EXPECT_NEAR(InputFidelity(t), 0.7, 1e-12);
  for (auto& x : t) x.pred_i = x.pred_x;
  EXPECT_DOUBLE_EQ(InputFidelity(t), 1.0);
  for (auto& x : t) x.pred_i = x.pred_x + 1;
  EXPECT_DOUBLE_EQ(InputFidelity(t), 0.0);
  EXPECT_THROW(InputFidelity({}), InvalidArgument);
}

TEST(MetricProperty, PermutationInvariant) {
  Gen g(1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<ConfidenceTriple> t(g.Int(1, 30));
    for (auto& x : t) x = {g.Uniform(0.01, 0.99), g.Uniform(0, 1), g.Uniform(0, 1), g.Int(0, 2), g.Int(0, 2)};
    auto s = t;
    std::shuffle(s.begin(), s.end(), g.engine());
    EXPECT_NEAR(AverageIncrease(t), AverageIncrease(s), 1e-9);
    EXPECT_NEAR(AverageDecrease(t), AverageDecrease(s), 1e-9);
    EXPECT_NEAR(AverageGain(t), AverageGain(s), 1e-9);
    EXPECT_NEAR(Faithfulness(t), Faithfulness(s), 1e-12);
    EXPECT_NEAR(InputFidelity(t), InputFidelity(s), 1e-12);
    EXPECT_GE(AverageDecrease(t), 0.0);
    EXPECT_LE(AverageDecrease(t), 100.0);
    EXPECT_LE(AverageGain(t), 100.0);
  }
}

// Gini via mean absolute difference: sum_ij |a_i - a_j| / (2 n sum a).
double GiniOracle(const std::vector<double>& a) {
  long double num = 0, sum = 0;
  for (double x : a) {
    sum += x;
    for (double y : a) num += std::abs(x - y);
  }
  return static_cast<double>(num / (2.0L * a.size() * sum));
}

TEST(SparsenessTest, Examples) {
  EXPECT_NEAR(Sparseness(std::vector<double>{0, 0, 1, 0}), 0.75, 1e-9);
  EXPECT_NEAR(Sparseness(std::vector<double>(17, 2.5)), 0.0, 1e-9);
  try {
    Sparseness(std::vector<double>(5, 0.0));
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("undefined sparseness"), std::string::npos);
  }
  EXPECT_THROW(Sparseness(std::vector<double>{1, -1}), InvalidArgument);
}

TEST(SparsenessProperty, OracleScaleInvarianceAndRange) {
  Gen g(2);
  for (int trial = 0; trial < 200; ++trial) {
    auto a = g.Nonnegative(g.Int(1, 60));
    const double s = Sparseness(a);
    EXPECT_NEAR(s, GiniOracle(a), 1e-9);
    std::vector<double> b = a;
    const double c = g.Uniform(1e-3, 1e3);
    for (auto& v : b) v *= c;
    EXPECT_NEAR(Sparseness(b), s, 1e-9);
    EXPECT_GE(s, -1e-12);
    EXPECT_LE(s, 1.0 - 1.0 / a.size() + 1e-12);
  }
}

TEST(ComplexityTest, Examples) {
  EXPECT_NEAR(Complexity(std::vector<double>{0, 3, 0, 0}), 0.0, 1e-9);
  for (int n : {2, 7, 100}) EXPECT_NEAR(Complexity(std::vector<double>(n, 0.3)), std::log(n), 1e-9);
  EXPECT_THROW(Complexity(std::vector<double>(3, 0.0)), InvalidArgument);
}

TEST(ComplexityProperty, EntropyBounds) {
  Gen g(3);
  for (int trial = 0; trial < 200; ++trial) {
    auto a = g.Nonnegative(g.Int(1, 60));
    const double h = Complexity(a);
    EXPECT_GE(h, -1e-12);
    EXPECT_LE(h, std::log(a.size()) + 1e-12);
  }
}

TEST(SaliencyTensorTest, TensorOverloadsMatchSpan) {
  Gen g(4);
  auto t = torch::rand({7, 9}, torch::kFloat64);
  std::vector<double> v(t.data_ptr<double>(), t.data_ptr<double>() + t.numel());
  EXPECT_NEAR(Sparseness(t), Sparseness(v), 1e-12);
  EXPECT_NEAR(Complexity(t), Complexity(v), 1e-12);
}

TEST(GradientSaliencyTest, ConstantHeadGivesZeroMap) {
  ClassifierConfig cfg;
  cfg.zero_init_head = true;
  Classifier clf(cfg, testing::ClassNames(5));
  auto s = GradientSaliency(clf, Gen(5).Wave(8000));
  EXPECT_EQ(s.abs().max().item<double>(), 0.0);
  EXPECT_EQ(s.sizes(), LogMelSpectrogram(Gen(5).Wave(8000), cfg.mel).sizes());
}

TEST(GradientSaliencyTest, MatchesFiniteDifferences) {
  torch::manual_seed(2);
  Classifier clf(testing::TinyClassifierConfig(), testing::ClassNames(3));
  clf.ToDtype(torch::kFloat64);
  clf.Freeze();
  auto x = Gen(6).Wave(1600, 8000);
  auto sal = GradientSaliency(clf, x);
  EXPECT_GE(sal.min().item<double>(), 0.0);
  auto mel = LogMelSpectrogram(x.ToTensor().to(torch::kFloat64), clf.config().mel).unsqueeze(0);
  torch::NoGradGuard ng;
  const int pred = clf.Classify(x).Argmax();
  auto logit = [&](const torch::Tensor& m) { return clf.net()->ForwardFeatures(m)[0][pred].item<double>(); };
  Gen g(7);
  const double eps = 1e-6;
  for (int trial = 0; trial < 8; ++trial) {
    const int r = g.Int(0, mel.size(1) - 1), c = g.Int(0, mel.size(2) - 1);
    auto mp = mel.clone(), mm = mel.clone();
    mp[0][r][c] += eps;
    mm[0][r][c] -= eps;
    const double num = std::abs((logit(mp) - logit(mm)) / (2 * eps));
    const double ana = sal[r][c].item<double>();
    EXPECT_LT(std::abs(num - ana) / std::max({num, ana, 1e-6}), 1e-3) << r << "," << c;
  }
}

// i := x, i_out := silence.
class IdentityExplainer : public Explainer {
 public:
  std::string Label() const override { return "identity"; }
  std::pair<torch::Tensor, torch::Tensor> Render(const Classifier&, const torch::Tensor& w) const override {
    return {w.clone(), torch::zeros_like(w)};
  }
};

// i := silence, i_out := x.
class SilenceExplainer : public Explainer {
 public:
  std::string Label() const override { return "silence"; }
  std::pair<torch::Tensor, torch::Tensor> Render(const Classifier&, const torch::Tensor& w) const override {
    return {torch::zeros_like(w), w.clone()};
  }
};

struct SuiteFixture : ::testing::Test {
  void SetUp() override {
    SyntheticCorpusOptions o;
    o.num_classes = 3;
    o.per_class = 5;
    o.clip_seconds = 0.5;
    o.seed = 1;
    corpus = GenerateSyntheticCorpus(o);
    torch::manual_seed(3);
    ClassifierConfig cfg;
    cfg.num_classes = 3;
    clf = std::make_unique<Classifier>(cfg, corpus.class_names);
    clf->Freeze();
  }
  Corpus corpus;
  std::unique_ptr<Classifier> clf;
};

TEST_F(SuiteFixture, IdentityExplainer) {
  std::vector<ConfidenceTriple> triples;
  auto r = EvaluateSuite(*clf, IdentityExplainer(), corpus, Split::kTest, &triples);
  EXPECT_EQ(r.num_samples, 3);
  EXPECT_DOUBLE_EQ(r.ad, 0.0);
  EXPECT_DOUBLE_EQ(r.ai, 0.0);
  EXPECT_DOUBLE_EQ(r.fid_in, 1.0);
  EXPECT_TRUE(std::isfinite(r.sps));
  for (const auto& t : triples) EXPECT_EQ(t.p_i, t.p_x);
}

TEST_F(SuiteFixture, SilenceExplainer) {
  std::vector<ConfidenceTriple> triples;
  auto r = EvaluateSuite(*clf, SilenceExplainer(), corpus, Split::kTest, &triples);
  EXPECT_NEAR(r.ff, 0.0, 1e-12);
  // Fid-In is the rate at which silence keeps the prediction.
  double agree = 0;
  const int silent_pred = clf->Classify(Waveform(std::vector<float>(8000, 0.0f), 16000)).Argmax();
  for (const auto& t : triples) agree += t.pred_x == silent_pred;
  EXPECT_NEAR(r.fid_in, agree / triples.size(), 1e-12);
  // Every saliency map is zero, so SPS and COMP are reported as undefined.
  EXPECT_EQ(r.undefined_saliency, 3);
  EXPECT_TRUE(std::isnan(r.sps));
}

TEST_F(SuiteFixture, ReportRangesDeterminismAndSerialization) {
  torch::manual_seed(4);
  Interpreter itp(InterpreterConfig{}, *clf);
  InterpreterExplainer ex(itp);
  auto a = EvaluateSuite(*clf, ex, corpus, Split::kTest);
  auto b = EvaluateSuite(*clf, ex, corpus, Split::kTest);
  EXPECT_EQ(a.ToJson().dump(), b.ToJson().dump());
  EXPECT_GE(a.ai, 0);
  EXPECT_LE(a.ai, 100);
  EXPECT_GE(a.ad, 0);
  EXPECT_LE(a.ad, 100);
  EXPECT_GE(a.ag, 0);
  EXPECT_LE(a.ag, 100);
  EXPECT_GE(a.ff, -1);
  EXPECT_LE(a.ff, 1);
  EXPECT_GE(a.fid_in, 0);
  EXPECT_LE(a.fid_in, 1);
  EXPECT_DOUBLE_EQ(a.alpha, 0.75);
  auto j = a.ToJson();
  EXPECT_TRUE(j.contains("definitions"));
  const std::string table = a.ToTable();
  const std::vector<std::string> cols{"AI", "AD", "AG", "FF", "Fid-In", "SPS", "COMP"};
  std::size_t pos = 0;
  for (const auto& c : cols) {
    auto at = table.find(c, pos);
    ASSERT_NE(at, std::string::npos) << c;
    pos = at + c.size();
  }
  GradientSaliencyExplainer sal;
  auto s = EvaluateSuite(*clf, sal, corpus, Split::kTest);
  std::vector<MetricsReport> both{a, s};
  auto t = FormatReportTable(both);
  EXPECT_EQ(std::count(t.begin(), t.end(), '\n'), 3);
  EXPECT_THROW(EvaluateSuite(*clf, sal, Corpus{{}, corpus.class_names, 16000, {}}, Split::kTest), Error);
}

}  // namespace
}  // namespace lmactd
