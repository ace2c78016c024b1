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

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "lmactd/error.h"

namespace lmactd {

bool ValidScore(int score) { return score >= 1 && score <= 100; }

nlohmann::json RatingRecord::ToJson() const {
  return {{"rater_id", rater_id},
          {"stimulus_id", stimulus_id},
          {"method_label", method_label},
          {"score", score},
          {"timestamp", timestamp}};
}

RatingRecord RatingRecord::FromJson(const nlohmann::json& j) {
  LMACTD_CHECK(j.is_object(), InvalidArgument, "rating must be a JSON object");
  RatingRecord r;
  try {
    r.rater_id = j.at("rater_id").get<std::string>();
    r.stimulus_id = j.at("stimulus_id").get<std::string>();
    r.method_label = j.value("method_label", std::string());
    const auto& s = j.at("score");
    LMACTD_CHECK(s.is_number_integer(), InvalidArgument, "score must be an integer");
    r.score = s.get<int>();
    r.timestamp = j.value("timestamp", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed rating: ") + e.what());
  }
  LMACTD_CHECK(ValidScore(r.score), InvalidArgument,
               "score " + std::to_string(r.score) + " outside [1, 100]");
  return r;
}

CiMethod ParseCiMethod(const std::string& name) {
  if (name == "t") return CiMethod::kStudentT;
  if (name == "bootstrap") return CiMethod::kBootstrap;
  throw InvalidArgument("unknown CI method '" + name + "'");
}

nlohmann::json MosSummary::ToJson() const {
  nlohmann::json out = {{"confidence", confidence}, {"ci_method", ci_method}};
  nlohmann::json m = nlohmann::json::object();
  for (const auto& [label, s] : methods) {
    nlohmann::json e = {{"mean", s.mean}, {"count", s.count}};
    if (s.ci_lo && s.ci_hi)
      e["ci"] = {*s.ci_lo, *s.ci_hi};
    else
      e["ci"] = nullptr;
    m[label] = e;
  }
  out["methods"] = m;
  return out;
}

namespace {

MethodMos Summarize(std::vector<double> scores, const MosOptions& opts, uint64_t salt) {
  MethodMos out;
  out.count = static_cast<int>(scores.size());
  // Sorted so the result does not depend on log order.
  std::sort(scores.begin(), scores.end());
  const double n = scores.size();
  out.mean = std::accumulate(scores.begin(), scores.end(), 0.0) / n;
  if (out.count < 2) return out;
  double ss = 0.0;
  for (double s : scores) ss += (s - out.mean) * (s - out.mean);
  const double sd = std::sqrt(ss / (n - 1));
  if (sd == 0.0) {
    out.ci_lo = out.ci_hi = out.mean;
    return out;
  }
  const double tail = (1.0 - opts.confidence) / 2.0;
  if (opts.method == CiMethod::kStudentT) {
    boost::math::students_t dist(n - 1);
    const double half = boost::math::quantile(boost::math::complement(dist, tail)) * sd / std::sqrt(n);
    out.ci_lo = out.mean - half;
    out.ci_hi = out.mean + half;
    return out;
  }
  std::mt19937_64 rng(opts.seed ^ (salt * 0x9E3779B97F4A7C15ULL));
  std::uniform_int_distribution<std::size_t> pick(0, scores.size() - 1);
  std::vector<double> means(std::max(1, opts.bootstrap_resamples));
  for (auto& m : means) {
    double acc = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) acc += scores[pick(rng)];
    m = acc / n;
  }
  std::sort(means.begin(), means.end());
  auto at = [&](double q) {
    const double pos = q * (means.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, means.size() - 1);
    return means[lo] + (pos - lo) * (means[hi] - means[lo]);
  };
  // Percentile bounds can sit on one side of the mean for skewed data.
  out.ci_lo = std::min(at(tail), out.mean);
  out.ci_hi = std::max(at(1.0 - tail), out.mean);
  return out;
}

}  // namespace

MosSummary SummarizeMos(std::span<const RatingRecord> ratings, const MosOptions& opts) {
  LMACTD_CHECK(!ratings.empty(), InvalidArgument, "no ratings to summarize");
  LMACTD_CHECK(opts.confidence > 0.0 && opts.confidence < 1.0, InvalidArgument,
               "confidence must be in (0, 1)");
  std::map<std::string, std::vector<double>> by_method;
  for (const auto& r : ratings) {
    LMACTD_CHECK(ValidScore(r.score), InvalidArgument, "score outside [1, 100]");
    by_method[r.method_label].push_back(r.score);
  }
  MosSummary out;
  out.confidence = opts.confidence;
  out.ci_method = opts.method == CiMethod::kStudentT ? "t" : "bootstrap";
  uint64_t salt = 1;
  for (auto& [label, scores] : by_method) out.methods[label] = Summarize(scores, opts, salt++);
  return out;
}

std::vector<RatingRecord> ReadRatingsJsonl(const std::filesystem::path& path) {
  std::vector<RatingRecord> out;
  if (!std::filesystem::exists(path)) return out;
  std::ifstream in(path);
  LMACTD_CHECK(in.good(), IoError, "cannot read ratings " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(RatingRecord::FromJson(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void AppendRatingJsonl(const std::filesystem::path& path, const RatingRecord& r) {
  std::ofstream out(path, std::ios::app);
  LMACTD_CHECK(out.good(), IoError, "cannot append to " + path.string());
  out << r.ToJson().dump() << '\n';
  out.flush();
  LMACTD_CHECK(out.good(), IoError, "write failed for " + path.string());
}

}  // namespace lmactd
