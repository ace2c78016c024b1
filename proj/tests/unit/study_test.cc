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

#include "lmactd/study.h"

#include <gtest/gtest.h>

#include <httplib.h>

#include <atomic>
#include <thread>

#include "lmactd/checkpoint.h"
#include "lmactd/error.h"
#include "lmactd/hashing.h"
#include "test_util.h"

namespace lmactd {
namespace {

namespace fs = std::filesystem;

class StudyTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    SyntheticCorpusOptions o;
    o.num_classes = 3;
    o.per_class = 15;
    o.clip_seconds = 0.5;
    o.seed = 4;
    corpus_ = new Corpus(GenerateSyntheticCorpus(o));
    torch::manual_seed(1);
    ClassifierConfig cfg;
    cfg.num_classes = 3;
    clf_ = new Classifier(cfg, corpus_->class_names);
    clf_->Freeze();
    itp_ = new Interpreter(InterpreterConfig{}, *clf_);
  }
  static void TearDownTestSuite() {
    delete itp_;
    delete clf_;
    delete corpus_;
  }
  void SetUp() override { dir_ = testing::TempDir("study"); }
  void TearDown() override { fs::remove_all(dir_); }

  StudyManifest Export(const fs::path& out, int n = 9) {
    ExportOptions eo;
    eo.num_stimuli = n;
    eo.method_label = "LMAC-TD";
    return ExportExplanations(*clf_, InterpreterExplainer(*itp_), *corpus_, out, eo);
  }

  static Corpus* corpus_;
  static Classifier* clf_;
  static Interpreter* itp_;
  fs::path dir_;
};

Corpus* StudyTest::corpus_ = nullptr;
Classifier* StudyTest::clf_ = nullptr;
Interpreter* StudyTest::itp_ = nullptr;

std::string DirDigest(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  Sha256 h;
  for (const auto& f : files) h.Update(fs::relative(f, dir).string()).Update(ReadFileBytes(f));
  return h.HexDigest();
}

TEST_F(StudyTest, ExportCountsAndDeterminism) {
  auto m = Export(dir_ / "a", 4);
  ASSERT_EQ(m.stimuli.size(), 4u);
  int wavs = 0;
  for (const auto& e : fs::directory_iterator(dir_ / "a" / "audio")) wavs += e.path().extension() == ".wav";
  EXPECT_EQ(wavs, 12);
  EXPECT_TRUE(fs::exists(dir_ / "a" / "manifest.json"));
  // Round-robin over the three classes.
  EXPECT_NE(m.stimuli[0].true_class, m.stimuli[1].true_class);
  EXPECT_NE(m.stimuli[1].true_class, m.stimuli[2].true_class);
  EXPECT_EQ(m.stimuli[0].true_class, m.stimuli[3].true_class);
  for (const auto& s : m.stimuli) {
    EXPECT_EQ(s.method_label, "LMAC-TD");
    EXPECT_GT(s.gain, 0.0);
  }
  Export(dir_ / "b", 4);
  EXPECT_EQ(DirDigest(dir_ / "a"), DirDigest(dir_ / "b"));
  auto loaded = StudyManifest::Load(dir_ / "a" / "manifest.json");
  EXPECT_EQ(loaded.ToJson(), m.ToJson());
}

TEST_F(StudyTest, DefaultIsNineAndTooManyFails) {
  EXPECT_EQ(ExportOptions{}.num_stimuli, 9);
  EXPECT_EQ(Export(dir_ / "n").stimuli.size(), 9u);
  EXPECT_THROW(Export(dir_ / "m", 50), InvalidArgument);
}

TEST_F(StudyTest, ManifestMissingAudioIsReported) {
  Export(dir_ / "x", 2);
  fs::remove(dir_ / "x" / "audio" / "s02_complement.wav");
  try {
    StudyManifest::Load(dir_ / "x" / "manifest.json");
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("s02_complement.wav"), std::string::npos);
  }
}

class ServiceTest : public StudyTest {
 protected:
  void SetUp() override {
    StudyTest::SetUp();
    manifest_ = Export(dir_ / "study", 9);
    Start();
  }
  void TearDown() override {
    service_.reset();
    StudyTest::TearDown();
  }
  void Start() {
    StudyServiceOptions so;
    so.ratings_path = dir_ / "study" / "ratings.jsonl";
    service_ = std::make_unique<StudyService>(manifest_, dir_ / "study", so);
    port_ = service_->Start();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
  }
  httplib::Result Post(const nlohmann::json& body) {
    return client_->Post("/rating", body.dump(), "application/json");
  }
  int SummaryTotal() { return nlohmann::json::parse(client_->Get("/summary")->body)["total"]; }

  StudyManifest manifest_;
  std::unique_ptr<StudyService> service_;
  std::unique_ptr<httplib::Client> client_;
  int port_ = 0;
};

std::vector<std::string> Order(const nlohmann::json& session) {
  std::vector<std::string> ids;
  for (const auto& s : session["stimuli"]) ids.push_back(s["stimulus_id"]);
  return ids;
}

TEST_F(ServiceTest, SessionsAreShuffledPerRater) {
  auto a = client_->Get("/session?rater_id=alice");
  ASSERT_TRUE(a);
  EXPECT_EQ(a->status, 200);
  auto ja = nlohmann::json::parse(a->body);
  EXPECT_EQ(ja["rater_id"], "alice");
  EXPECT_EQ(ja["stimuli"].size(), 9u);
  auto jb = nlohmann::json::parse(client_->Get("/session?rater_id=bob")->body);
  EXPECT_NE(Order(ja), Order(jb));
  auto sa = Order(ja), sb = Order(jb);
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  EXPECT_EQ(sa, sb);
  // Same rater, same order; fresh sessions get distinct ids.
  EXPECT_EQ(Order(nlohmann::json::parse(client_->Get("/session?rater_id=alice")->body)), Order(ja));
  auto f1 = nlohmann::json::parse(client_->Get("/session")->body);
  auto f2 = nlohmann::json::parse(client_->Get("/session")->body);
  EXPECT_NE(f1["rater_id"], f2["rater_id"]);
  EXPECT_EQ(RaterOrder(manifest_, "alice"), Order(ja));
}

TEST_F(ServiceTest, AudioIsServedUnchanged) {
  const auto before = DirDigest(dir_ / "study" / "audio");
  auto r = client_->Get("/audio/s01/explanation");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(r->get_header_value("Content-Type"), "audio/wav");
  EXPECT_EQ(r->body, ReadFileBytes(dir_ / "study" / "audio" / "s01_explanation.wav"));
  EXPECT_EQ(client_->Get("/audio/s01/nope")->status, 404);
  EXPECT_EQ(client_->Get("/audio/zz/input")->status, 404);
  EXPECT_EQ(DirDigest(dir_ / "study" / "audio"), before);
}

TEST_F(ServiceTest, RatingValidation) {
  EXPECT_EQ(Post({{"rater_id", "a"}, {"stimulus_id", "s01"}, {"score", 0}})->status, 422);
  EXPECT_EQ(Post({{"rater_id", "a"}, {"stimulus_id", "s01"}, {"score", 101}})->status, 422);
  EXPECT_EQ(Post({{"rater_id", "a"}, {"stimulus_id", "s99"}, {"score", 50}})->status, 404);
  EXPECT_EQ(Post({{"rater_id", "a"}, {"stimulus_id", "s01"}, {"score", "fifty"}})->status, 422);
  EXPECT_EQ(Post({{"rater_id", "a"}, {"stimulus_id", "s01"}, {"score", 50}, {"method_label", "other"}})->status, 400);
  EXPECT_EQ(client_->Post("/rating", "{nope", "application/json")->status, 400);
  EXPECT_EQ(SummaryTotal(), 0);
  EXPECT_FALSE(fs::exists(dir_ / "study" / "ratings.jsonl"));
}

TEST_F(ServiceTest, ValidRatingIncrementsSummary) {
  EXPECT_EQ(SummaryTotal(), 0);
  auto r = Post({{"rater_id", "a"}, {"stimulus_id", "s03"}, {"score", 64}});
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 201);
  auto rec = nlohmann::json::parse(r->body);
  EXPECT_EQ(rec["method_label"], "LMAC-TD");
  EXPECT_FALSE(rec["timestamp"].get<std::string>().empty());
  auto summary = nlohmann::json::parse(client_->Get("/summary")->body);
  EXPECT_EQ(summary["total"], 1);
  EXPECT_EQ(summary["methods"]["LMAC-TD"]["count"], 1);
  EXPECT_DOUBLE_EQ(summary["methods"]["LMAC-TD"]["mean"].get<double>(), 64.0);
  EXPECT_TRUE(summary["methods"]["LMAC-TD"]["ci"].is_null());
  auto log = ReadRatingsJsonl(dir_ / "study" / "ratings.jsonl");
  ASSERT_EQ(log.size(), 1u);
  EXPECT_EQ(log[0].score, 64);
}

TEST_F(ServiceTest, ConcurrentPostsAreSerialized) {
  const int threads = 8, per = 10;
  std::vector<std::thread> pool;
  std::atomic<int> created{0};
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      httplib::Client c("127.0.0.1", port_);
      for (int k = 0; k < per; ++k) {
        nlohmann::json body{{"rater_id", "r" + std::to_string(t)},
                            {"stimulus_id", manifest_.stimuli[k % 9].id},
                            {"score", 1 + (t * per + k) % 100}};
        auto r = c.Post("/rating", body.dump(), "application/json");
        if (r && r->status == 201) ++created;
      }
    });
  }
  for (auto& th : pool) th.join();
  EXPECT_EQ(created.load(), threads * per);
  EXPECT_EQ(service_->num_ratings(), static_cast<std::size_t>(threads * per));
  auto log = ReadRatingsJsonl(dir_ / "study" / "ratings.jsonl");
  EXPECT_EQ(log.size(), static_cast<std::size_t>(threads * per));
  EXPECT_EQ(SummaryTotal(), threads * per);
}

TEST_F(ServiceTest, RestartReloadsLog) {
  Post({{"rater_id", "a"}, {"stimulus_id", "s01"}, {"score", 30}});
  Post({{"rater_id", "b"}, {"stimulus_id", "s02"}, {"score", 50}});
  service_.reset();
  Start();
  EXPECT_EQ(SummaryTotal(), 2);
  auto summary = nlohmann::json::parse(client_->Get("/summary")->body);
  EXPECT_DOUBLE_EQ(summary["methods"]["LMAC-TD"]["mean"].get<double>(), 40.0);
  EXPECT_TRUE(summary["methods"]["LMAC-TD"]["ci"].is_array());
}

}  // namespace
}  // namespace lmactd
