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

#include "lmactd/mos.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include <fstream>
#include <numbers>

#include "lmactd/error.h"
#include "test_util.h"

namespace lmactd {
namespace {

std::vector<RatingRecord> Ratings(const std::string& method, std::vector<int> scores) {
  std::vector<RatingRecord> out;
  int k = 0;
  for (int s : scores) out.push_back({"r" + std::to_string(k++), "s01", method, s, ""});
  return out;
}

// Two-sided 0.95 Student-t quantiles t_{0.975, df} from standard tables.
// Closed forms: t(1) = tan(0.475 pi), t(2) = sqrt(2 / (a (2 - a)) - 2) for a = 0.05.
const double kT1 = std::tan(0.475 * std::numbers::pi);
const double kT2 = std::sqrt(2.0 / (0.05 * 1.95) - 2.0);
constexpr double kT4 = 2.7764451051977943;

TEST(MosTest, TwoRatingsWideInterval) {
  auto s = SummarizeMos(Ratings("m", {60, 80}));
  const auto& m = s.methods.at("m");
  EXPECT_DOUBLE_EQ(m.mean, 70.0);
  EXPECT_EQ(m.count, 2);
  // s = 14.1421 (sample sd), half-width = t * s / sqrt(2) = t * 10.
  ASSERT_TRUE(m.ci_lo && m.ci_hi);
  EXPECT_NEAR(*m.ci_lo, 70.0 - kT1 * 10.0, 1e-9);
  EXPECT_NEAR(*m.ci_hi, 70.0 + kT1 * 10.0, 1e-9);
}

TEST(MosTest, HandComputedIntervals) {
  auto s = SummarizeMos(Ratings("a", {50, 60, 70}));
  // mean 60, sd 10, half = t2 * 10 / sqrt(3).
  EXPECT_NEAR(*s.methods.at("a").ci_lo, 60.0 - kT2 * 10.0 / std::sqrt(3.0), 1e-9);
  EXPECT_NEAR(*s.methods.at("a").ci_hi, 60.0 + kT2 * 10.0 / std::sqrt(3.0), 1e-9);
  s = SummarizeMos(Ratings("b", {10, 20, 30, 40, 100}));
  // mean 40, sd = sqrt(5000 / 4) = 35.3553.
  const double half = kT4 * std::sqrt(1250.0) / std::sqrt(5.0);
  EXPECT_NEAR(*s.methods.at("b").ci_lo, 40.0 - half, 1e-9);
  EXPECT_NEAR(*s.methods.at("b").ci_hi, 40.0 + half, 1e-9);
}

TEST(MosTest, SingleRatingHasNullInterval) {
  auto s = SummarizeMos(Ratings("m", {42}));
  EXPECT_DOUBLE_EQ(s.methods.at("m").mean, 42.0);
  EXPECT_FALSE(s.methods.at("m").ci_lo.has_value());
  EXPECT_TRUE(s.ToJson()["methods"]["m"]["ci"].is_null());
}

TEST(MosTest, ZeroVarianceZeroWidth) {
  for (auto method : {CiMethod::kStudentT, CiMethod::kBootstrap}) {
    MosOptions o;
    o.method = method;
    auto s = SummarizeMos(Ratings("m", {55, 55, 55, 55}), o);
    EXPECT_DOUBLE_EQ(*s.methods.at("m").ci_lo, 55.0);
    EXPECT_DOUBLE_EQ(*s.methods.at("m").ci_hi, 55.0);
  }
}

TEST(MosTest, EmptyAndOutOfRangeRejected) {
  EXPECT_THROW(SummarizeMos(std::vector<RatingRecord>{}), InvalidArgument);
  EXPECT_THROW(SummarizeMos(Ratings("m", {0})), InvalidArgument);
  EXPECT_THROW(SummarizeMos(Ratings("m", {101})), InvalidArgument);
}

TEST(MosProperty, OrderInsensitiveAndBracketsMean) {
  testing::Gen g(1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<RatingRecord> r;
    const int n = g.Int(1, 40);
    for (int k = 0; k < n; ++k)
      r.push_back({"r", "s", g.Int(0, 1) ? "A" : "B", g.Int(1, 100), ""});
    auto shuffled = r;
    std::shuffle(shuffled.begin(), shuffled.end(), g.engine());
    for (auto method : {CiMethod::kStudentT, CiMethod::kBootstrap}) {
      MosOptions o;
      o.method = method;
      o.bootstrap_resamples = 300;
      auto a = SummarizeMos(r, o), b = SummarizeMos(shuffled, o);
      EXPECT_EQ(a.ToJson().dump(), b.ToJson().dump());
      for (const auto& [label, m] : a.methods) {
        if (!m.ci_lo) continue;
        EXPECT_LE(*m.ci_lo, m.mean);
        EXPECT_GE(*m.ci_hi, m.mean);
      }
    }
  }
}

TEST(MosTest, BootstrapCloseToTForLargeSamples) {
  testing::Gen g(2);
  std::vector<int> scores;
  for (int k = 0; k < 400; ++k) scores.push_back(std::clamp(static_cast<int>(std::lround(g.Normal(15) + 60)), 1, 100));
  auto t = SummarizeMos(Ratings("m", scores));
  MosOptions o;
  o.method = CiMethod::kBootstrap;
  auto b = SummarizeMos(Ratings("m", scores), o);
  const double wt = *t.methods.at("m").ci_hi - *t.methods.at("m").ci_lo;
  const double wb = *b.methods.at("m").ci_hi - *b.methods.at("m").ci_lo;
  EXPECT_NEAR(wb / wt, 1.0, 0.15);
}

TEST(RatingRecordTest, JsonRoundTripAndValidation) {
  RatingRecord r{"rater", "s03", "LMAC-TD", 77, "2026-01-01T00:00:00Z"};
  auto back = RatingRecord::FromJson(r.ToJson());
  EXPECT_EQ(back.rater_id, "rater");
  EXPECT_EQ(back.score, 77);
  auto j = r.ToJson();
  j["score"] = 0;
  EXPECT_THROW(RatingRecord::FromJson(j), InvalidArgument);
  j["score"] = 55.5;
  EXPECT_THROW(RatingRecord::FromJson(j), InvalidArgument);
  j.erase("score");
  EXPECT_THROW(RatingRecord::FromJson(j), InvalidArgument);
}

TEST(RatingsLogTest, AppendAndReread) {
  auto dir = testing::TempDir("ratings");
  const auto path = dir / "r.jsonl";
  EXPECT_TRUE(ReadRatingsJsonl(path).empty());
  AppendRatingJsonl(path, {"a", "s01", "M", 10, "t"});
  AppendRatingJsonl(path, {"b", "s02", "M", 90, "t"});
  auto back = ReadRatingsJsonl(path);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].score, 90);
  // Re-summarizing the same log is idempotent.
  EXPECT_EQ(SummarizeMos(back).ToJson().dump(), SummarizeMos(ReadRatingsJsonl(path)).ToJson().dump());
  std::ofstream(path, std::ios::app) << "{broken\n";
  EXPECT_THROW(ReadRatingsJsonl(path), IoError);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace lmactd
