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

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <iomanip>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "lmactd/checkpoint.h"
#include "lmactd/error.h"
#include "lmactd/hashing.h"
#include "lmactd/wav_io.h"

namespace lmactd {

namespace fs = std::filesystem;
using nlohmann::json;

const StudyStimulus* StudyManifest::Find(const std::string& id) const {
  for (const auto& s : stimuli)
    if (s.id == id) return &s;
  return nullptr;
}

json StudyManifest::ToJson() const {
  json arr = json::array();
  for (const auto& s : stimuli) {
    arr.push_back({{"stimulus_id", s.id},
                   {"sample_id", s.sample_id},
                   {"files", s.files},
                   {"true_class", s.true_class},
                   {"predicted_class", s.predicted_class},
                   {"method_label", s.method_label},
                   {"gain", s.gain}});
  }
  return {{"stimuli", arr}, {"provenance", provenance}};
}

StudyManifest StudyManifest::FromJson(const json& j) {
  StudyManifest m;
  try {
    for (const auto& e : j.at("stimuli")) {
      StudyStimulus s;
      s.id = e.at("stimulus_id");
      s.sample_id = e.value("sample_id", std::string());
      s.files = e.at("files").get<std::map<std::string, std::string>>();
      s.true_class = e.value("true_class", std::string());
      s.predicted_class = e.at("predicted_class");
      s.method_label = e.at("method_label");
      s.gain = e.value("gain", 1.0);
      for (const char* role : kStudyRoles)
        LMACTD_CHECK(s.files.count(role), InvalidArgument,
                     "stimulus " + s.id + " lacks role '" + role + "'");
      LMACTD_CHECK(m.Find(s.id) == nullptr, InvalidArgument, "duplicate stimulus " + s.id);
      m.stimuli.push_back(std::move(s));
    }
    m.provenance = j.value("provenance", json::object());
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed study manifest: ") + e.what());
  }
  LMACTD_CHECK(!m.stimuli.empty(), InvalidArgument, "study manifest has no stimuli");
  return m;
}

StudyManifest StudyManifest::Load(const fs::path& path) {
  auto m = FromJson(ReadJsonFile(path));
  const fs::path dir = path.parent_path();
  for (const auto& s : m.stimuli)
    for (const auto& [role, rel] : s.files)
      LMACTD_CHECK(fs::exists(dir / rel), IoError, "missing study audio " + (dir / rel).string());
  return m;
}

StudyManifest ExportExplanations(const Classifier& clf, const Explainer& explainer,
                                 const Corpus& corpus, const fs::path& out_dir,
                                 const ExportOptions& opts) {
  LMACTD_CHECK(opts.num_stimuli >= 1, InvalidArgument, "num_stimuli must be >= 1");
  LMACTD_CHECK(opts.peak > 0.0 && opts.peak <= 1.0, InvalidArgument, "peak must be in (0, 1]");
  const int num_classes = static_cast<int>(corpus.class_names.size());
  std::vector<std::vector<std::size_t>> pools(num_classes);
  for (std::size_t idx : corpus.Indices(opts.split))
    pools[corpus.samples[idx].class_id].push_back(idx);
  std::size_t available = 0;
  for (const auto& p : pools) available += p.size();
  LMACTD_CHECK(available >= static_cast<std::size_t>(opts.num_stimuli), InvalidArgument,
               std::string("split '") + SplitName(opts.split) + "' has only " +
                   std::to_string(available) + " samples for " +
                   std::to_string(opts.num_stimuli) + " stimuli");

  // Round-robin over classes, skipping exhausted ones.
  std::vector<std::size_t> picks, cursor(num_classes, 0);
  for (int c = 0; static_cast<int>(picks.size()) < opts.num_stimuli; c = (c + 1) % num_classes) {
    if (cursor[c] < pools[c].size()) picks.push_back(pools[c][cursor[c]++]);
  }

  fs::create_directories(out_dir / "audio");
  const std::string label = opts.method_label.empty() ? explainer.Label() : opts.method_label;
  StudyManifest manifest;
  for (std::size_t k = 0; k < picks.size(); ++k) {
    const auto& sample = corpus.samples[picks[k]];
    auto res = ExplainWith(clf, explainer, sample.wave);
    float peak = 0.0f;
    for (const Waveform* w : {&res.input, &res.explanation, &res.complement})
      for (float v : w->samples) peak = std::max(peak, std::abs(v));
    const double gain = peak > 0.0f ? opts.peak / peak : 1.0;

    std::ostringstream id;
    id << "s" << std::setw(2) << std::setfill('0') << (k + 1);
    StudyStimulus s;
    s.id = id.str();
    s.sample_id = sample.id;
    s.true_class = corpus.class_names[sample.class_id];
    s.predicted_class = corpus.class_names[res.predicted_class];
    s.method_label = label;
    s.gain = gain;
    const Waveform* waves[] = {&res.input, &res.explanation, &res.complement};
    for (int r = 0; r < 3; ++r) {
      Waveform scaled = *waves[r];
      for (float& v : scaled.samples) v = static_cast<float>(v * gain);
      const std::string rel = "audio/" + s.id + "_" + kStudyRoles[r] + ".wav";
      WriteWav(out_dir / rel, scaled, WavFormat::kPcm16);
      s.files[kStudyRoles[r]] = rel;
    }
    manifest.stimuli.push_back(std::move(s));
  }
  manifest.provenance = {{"corpus_digest", corpus.Digest()},
                         {"classifier_hash", clf.ParameterHash()},
                         {"split", SplitName(opts.split)},
                         {"peak", opts.peak}};
  WriteJsonFile(out_dir / "manifest.json", manifest.ToJson());
  return manifest;
}

std::vector<std::string> RaterOrder(const StudyManifest& manifest, const std::string& rater_id) {
  std::vector<std::string> ids;
  for (const auto& s : manifest.stimuli) ids.push_back(s.id);
  const std::string digest = Sha256Hex(rater_id);
  std::seed_seq seq(digest.begin(), digest.end());
  std::mt19937_64 rng(seq);
  // Fisher-Yates with our own index draws; std::shuffle is not portable
  // across standard libraries.
  for (std::size_t i = ids.size(); i > 1; --i) {
    const std::size_t j = rng() % i;
    std::swap(ids[i - 1], ids[j]);
  }
  return ids;
}

namespace {

std::string UtcNow() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void SendJson(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void SendError(httplib::Response& res, int status, const std::string& msg) {
  SendJson(res, status, {{"error", msg}});
}

}  // namespace

struct StudyService::Impl {
  StudyManifest manifest;
  fs::path dir;
  StudyServiceOptions opts;
  httplib::Server server;
  std::thread thread;
  int port = -1;

  mutable std::mutex mu;  // guards ratings and the log file
  std::vector<RatingRecord> ratings;
  std::mt19937_64 id_rng{std::random_device{}()};

  json SessionFor(const std::string& rater_id) const {
    json list = json::array();
    for (const auto& id : RaterOrder(manifest, rater_id)) {
      const auto* s = manifest.Find(id);
      json audio = json::object();
      for (const char* role : kStudyRoles) audio[role] = "/audio/" + id + "/" + role;
      list.push_back({{"stimulus_id", id},
                      {"method_label", s->method_label},
                      {"predicted_class", s->predicted_class},
                      {"audio", audio}});
    }
    return {{"rater_id", rater_id}, {"stimuli", list}};
  }

  json Summary() const {
    std::lock_guard<std::mutex> lock(mu);
    json out;
    if (ratings.empty()) {
      out = {{"methods", json::object()}, {"ci_method", opts.mos.method == CiMethod::kStudentT ? "t" : "bootstrap"},
             {"confidence", opts.mos.confidence}};
    } else {
      out = SummarizeMos(ratings, opts.mos).ToJson();
    }
    out["total"] = ratings.size();
    return out;
  }

  void Install() {
    server.Get("/session", [this](const httplib::Request& req, httplib::Response& res) {
      std::string rater = req.get_param_value("rater_id");
      if (rater.empty()) {
        std::lock_guard<std::mutex> lock(mu);
        std::ostringstream os;
        os << "r" << std::hex << std::setw(16) << std::setfill('0') << id_rng();
        rater = os.str();
      }
      SendJson(res, 200, SessionFor(rater));
    });
    server.Get(R"(/audio/([^/]+)/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const auto* s = manifest.Find(req.matches[1]);
      if (s == nullptr) return SendError(res, 404, "unknown stimulus");
      auto it = s->files.find(req.matches[2]);
      if (it == s->files.end()) return SendError(res, 404, "unknown role");
      std::string bytes;
      try {
        bytes = ReadFileBytes(dir / it->second);
      } catch (const Error& e) {
        return SendError(res, 500, e.what());
      }
      res.set_content(std::move(bytes), "audio/wav");
    });
    server.Post("/rating", [this](const httplib::Request& req, httplib::Response& res) {
      json body;
      try {
        body = json::parse(req.body);
      } catch (const json::parse_error&) {
        return SendError(res, 400, "body is not JSON");
      }
      if (!body.is_object()) return SendError(res, 400, "body must be an object");
      const std::string sid = body.value("stimulus_id", std::string());
      const auto* s = manifest.Find(sid);
      if (s == nullptr) return SendError(res, 404, "unknown stimulus '" + sid + "'");
      if (body.contains("method_label") && body["method_label"] != s->method_label)
        return SendError(res, 400, "method_label does not match the manifest");
      body["method_label"] = s->method_label;
      body["timestamp"] = UtcNow();
      RatingRecord r;
      try {
        r = RatingRecord::FromJson(body);
      } catch (const Error& e) {
        return SendError(res, 422, e.what());
      }
      if (r.rater_id.empty()) return SendError(res, 400, "rater_id is required");
      {
        std::lock_guard<std::mutex> lock(mu);
        try {
          if (!opts.ratings_path.empty()) AppendRatingJsonl(opts.ratings_path, r);
        } catch (const Error& e) {
          return SendError(res, 500, e.what());
        }
        ratings.push_back(r);
      }
      SendJson(res, 201, r.ToJson());
    });
    server.Get("/summary", [this](const httplib::Request&, httplib::Response& res) {
      SendJson(res, 200, Summary());
    });
    if (!opts.ui_dir.empty()) {
      LMACTD_CHECK(server.set_mount_point("/", opts.ui_dir.string()), IoError,
                   "cannot serve UI directory " + opts.ui_dir.string());
    }
  }

  void Bind() {
    if (opts.port == 0) {
      port = server.bind_to_any_port(opts.host);
    } else {
      port = server.bind_to_port(opts.host, opts.port) ? opts.port : -1;
    }
    LMACTD_CHECK(port > 0, IoError,
                 "cannot bind " + opts.host + ":" + std::to_string(opts.port));
  }
};

StudyService::StudyService(StudyManifest manifest, fs::path manifest_dir, StudyServiceOptions opts)
    : impl_(std::make_unique<Impl>()) {
  impl_->manifest = std::move(manifest);
  impl_->dir = std::move(manifest_dir);
  impl_->opts = std::move(opts);
  if (!impl_->opts.ratings_path.empty()) {
    for (auto& r : ReadRatingsJsonl(impl_->opts.ratings_path)) impl_->ratings.push_back(std::move(r));
  }
  impl_->Install();
}

StudyService::~StudyService() { Stop(); }

int StudyService::Start() {
  impl_->Bind();
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return impl_->port;
}

void StudyService::Run() {
  impl_->Bind();
  impl_->server.listen_after_bind();
}

void StudyService::Stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

int StudyService::port() const { return impl_->port; }

std::size_t StudyService::num_ratings() const {
  std::lock_guard<std::mutex> lock(impl_->mu);
  return impl_->ratings.size();
}

json StudyService::SummaryJson() const { return impl_->Summary(); }

}  // namespace lmactd
