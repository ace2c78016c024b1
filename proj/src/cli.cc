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

#include "lmactd/cli.h"

#include <CLI11.hpp>

#include <fstream>

#include "lmactd/checkpoint.h"
#include "lmactd/classifier.h"
#include "lmactd/config.h"
#include "lmactd/datasets.h"
#include "lmactd/error.h"
#include "lmactd/interpreter.h"
#include "lmactd/metrics.h"
#include "lmactd/mos.h"
#include "lmactd/study.h"
#include "lmactd/training.h"
#include "lmactd/wav_io.h"

namespace lmactd {
namespace {

namespace fs = std::filesystem;

struct MissingCheckpoint : Error {
  using Error::Error;
};

void RequireCheckpoint(const fs::path& stem, const char* what) {
  for (const auto& p : {BlobPath(stem), SidecarPath(stem)})
    if (!fs::exists(p)) throw MissingCheckpoint(std::string("missing ") + what + " checkpoint " + p.string());
}

fs::path CorpusDir(const RunConfig& cfg) { return cfg.output_dir() / "corpus"; }
fs::path ClassifierStem(const RunConfig& cfg) { return cfg.output_dir() / "classifier"; }
fs::path InterpreterStem(const RunConfig& cfg) { return cfg.output_dir() / "interpreter"; }
fs::path StudyDir(const RunConfig& cfg) { return cfg.output_dir() / "study"; }

Corpus LoadRunCorpus(const RunConfig& cfg) {
  const fs::path dir = CorpusDir(cfg);
  if (!fs::exists(dir / "manifest.csv"))
    throw MissingCheckpoint("missing corpus " + (dir / "manifest.csv").string() + " (run gen-data)");
  Corpus c = LoadWavCorpus(dir, dir / "manifest.csv");
  LMACTD_CHECK(c.sample_rate == cfg.doc()["dsp"]["sample_rate"].get<int>(), ConfigError,
               "corpus sample rate " + std::to_string(c.sample_rate) +
                   " differs from dsp.sample_rate");
  return c;
}

Classifier LoadRunClassifier(const RunConfig& cfg) {
  RequireCheckpoint(ClassifierStem(cfg), "classifier");
  return Classifier::Load(ClassifierStem(cfg));
}

Interpreter LoadRunInterpreter(const RunConfig& cfg, const Classifier& clf) {
  RequireCheckpoint(InterpreterStem(cfg), "interpreter");
  Interpreter itp = Interpreter::Load(InterpreterStem(cfg), clf);
  itp.set_alpha(cfg.Interpreter().alpha);
  return itp;
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  LMACTD_CHECK(out.good(), IoError, "cannot write " + path.string());
  out << text;
}

int GenData(const RunConfig& cfg, std::ostream& out) {
  Corpus corpus;
  if (cfg.dataset_source() == "synthetic") {
    corpus = GenerateSyntheticCorpus(cfg.SyntheticOptions());
  } else {
    const auto& d = cfg.doc()["dataset"];
    const fs::path root = d["root"].get<std::string>();
    fs::path manifest = d["manifest"].get<std::string>();
    LMACTD_CHECK(!root.empty(), ConfigError, "dataset.root is required for source=wav");
    if (manifest.empty()) manifest = root / "manifest.csv";
    corpus = LoadWavCorpus(root, manifest);
  }
  ExportCorpus(corpus, CorpusDir(cfg));
  out << "corpus " << corpus.samples.size() << " samples, digest " << corpus.Digest() << "\n";
  return kExitOk;
}

int TrainClf(const RunConfig& cfg, std::ostream& out) {
  Corpus corpus = LoadRunCorpus(cfg);
  ClassifierTrainConfig tc = cfg.ClassifierTraining();
  ClassifierTrainResult result;
  Classifier clf = TrainClassifier(corpus, cfg.Classifier(static_cast<int>(corpus.class_names.size())),
                                   tc, cfg.seed(), &result);
  nlohmann::json hist = nlohmann::json::array();
  std::ofstream log(cfg.output_dir() / "classifier_history.jsonl", std::ios::trunc);
  for (const auto& e : result.history) {
    log << nlohmann::json{{"epoch", e.epoch},
                          {"train_loss", e.train_loss},
                          {"train_accuracy", e.train_accuracy},
                          {"valid_loss", e.valid_loss},
                          {"valid_accuracy", e.valid_accuracy}}
               .dump()
        << "\n";
  }
  clf.Save(ClassifierStem(cfg), {{"corpus_digest", corpus.Digest()},
                                 {"class_names", corpus.class_names},
                                 {"best_epoch", result.best_epoch},
                                 {"valid_accuracy", result.best_valid_accuracy},
                                 {"seed", cfg.seed()}});
  out << "classifier valid accuracy " << result.best_valid_accuracy << " (epoch "
      << result.best_epoch << "), saved " << BlobPath(ClassifierStem(cfg)).string() << "\n";
  return kExitOk;
}

int TrainItp(const RunConfig& cfg, std::ostream& out) {
  Classifier clf = LoadRunClassifier(cfg);
  Corpus corpus = LoadRunCorpus(cfg);
  Interpreter itp = MakeInterpreter(cfg.Interpreter(), clf, cfg.seed());
  auto result = TrainInterpreter(clf, itp, corpus, cfg.Loss(), cfg.InterpreterTraining(), cfg.seed());
  WriteHistoryJsonl(cfg.output_dir() / "interpreter_history.jsonl", result.history);
  itp.Save(InterpreterStem(cfg), {{"corpus_digest", corpus.Digest()},
                                  {"best_epoch", result.best_epoch},
                                  {"aborted", result.aborted},
                                  {"loss", cfg.doc()["loss"]},
                                  {"seed", cfg.seed()}});
  if (result.aborted) {
    out << "interpreter training stopped early: " << result.message << "\n";
    return kExitFailure;
  }
  out << "interpreter best epoch " << result.best_epoch << ", saved "
      << BlobPath(InterpreterStem(cfg)).string() << "\n";
  return kExitOk;
}

int ExplainCmd(const RunConfig& cfg, const std::string& wav, std::ostream& out) {
  Classifier clf = LoadRunClassifier(cfg);
  Interpreter itp = LoadRunInterpreter(cfg, clf);
  const auto& st = cfg.doc()["study"];
  InterpreterExplainer explainer(itp, st["method_label"].get<std::string>());
  if (!wav.empty()) {
    auto res = ExplainWith(clf, explainer, ReadWav(wav));
    const fs::path dir = cfg.output_dir() / "explain";
    fs::create_directories(dir);
    const std::string stem = fs::path(wav).stem().string();
    WriteWav(dir / (stem + "_explanation.wav"), res.explanation);
    WriteWav(dir / (stem + "_complement.wav"), res.complement);
    out << "predicted class " << res.predicted_class << " p_x=" << res.probs_x.probs[res.predicted_class]
        << " p_i=" << res.probs_i.probs[res.predicted_class]
        << " p_iout=" << res.probs_iout.probs[res.predicted_class] << "\n";
    return kExitOk;
  }
  Corpus corpus = LoadRunCorpus(cfg);
  ExportOptions eo;
  eo.num_stimuli = st["num_stimuli"];
  eo.method_label = st["method_label"];
  eo.split = ParseSplit(cfg.doc()["evaluation"]["split"]);
  auto manifest = ExportExplanations(clf, explainer, corpus, StudyDir(cfg), eo);
  out << "exported " << manifest.stimuli.size() << " stimuli to " << StudyDir(cfg).string() << "\n";
  return kExitOk;
}

int EvalCmd(const RunConfig& cfg, std::ostream& out) {
  // Checkpoints first so a missing one is reported before any heavy work.
  Classifier clf = LoadRunClassifier(cfg);
  Interpreter itp = LoadRunInterpreter(cfg, clf);
  Corpus corpus = LoadRunCorpus(cfg);
  const auto& ev = cfg.doc()["evaluation"];
  const Split split = ParseSplit(ev["split"]);
  const auto mode = ParseContamination(ev["ood_mode"]);
  if (mode != ContaminationKind::kNone) corpus = MakeOodCorpus(corpus, mode, ev["ood_snr_db"], cfg.seed());

  std::vector<MetricsReport> reports;
  InterpreterExplainer explainer(itp);
  reports.push_back(EvaluateSuite(clf, explainer, corpus, split));
  if (ev["baseline"].get<bool>()) {
    GradientSaliencyExplainer baseline;
    reports.push_back(EvaluateSuite(clf, baseline, corpus, split));
  }
  nlohmann::json doc = {{"split", SplitName(split)},
                        {"ood_mode", ContaminationName(mode)},
                        {"corpus_digest", corpus.Digest()},
                        {"reports", nlohmann::json::array()}};
  if (mode != ContaminationKind::kNone) doc["ood_snr_db"] = ev["ood_snr_db"];
  for (const auto& r : reports) doc["reports"].push_back(r.ToJson());
  const std::string table = FormatReportTable(reports);
  WriteJsonFile(cfg.output_dir() / "metrics.json", doc);
  WriteText(cfg.output_dir() / "metrics.txt", table);
  out << table;
  return kExitOk;
}

int ServeCmd(const RunConfig& cfg, std::ostream& out) {
  const auto& st = cfg.doc()["study"];
  const fs::path manifest_path = StudyDir(cfg) / "manifest.json";
  LMACTD_CHECK(fs::exists(manifest_path), IoError,
               "missing study manifest " + manifest_path.string() + " (run explain)");
  StudyServiceOptions so;
  so.host = st["host"];
  so.port = st["port"];
  so.ratings_path = StudyDir(cfg) / st["ratings"].get<std::string>();
  so.ui_dir = st["ui_dir"].get<std::string>();
  so.mos.method = ParseCiMethod(st["ci"]);
  so.mos.bootstrap_resamples = st["bootstrap_resamples"];
  so.mos.seed = cfg.seed();
  StudyService service(StudyManifest::Load(manifest_path), StudyDir(cfg), so);
  out << "serving study on " << so.host << ":" << so.port << " (ratings -> "
      << so.ratings_path.string() << ")" << std::endl;
  service.Run();
  return kExitOk;
}

int MosCmd(const RunConfig& cfg, const std::string& ratings_arg, std::ostream& out) {
  const auto& st = cfg.doc()["study"];
  const fs::path ratings =
      ratings_arg.empty() ? StudyDir(cfg) / st["ratings"].get<std::string>() : fs::path(ratings_arg);
  LMACTD_CHECK(fs::exists(ratings), IoError, "missing ratings log " + ratings.string());
  auto records = ReadRatingsJsonl(ratings);
  MosOptions mo;
  mo.method = ParseCiMethod(st["ci"]);
  mo.bootstrap_resamples = st["bootstrap_resamples"];
  mo.seed = cfg.seed();
  auto summary = SummarizeMos(records, mo);
  WriteJsonFile(cfg.output_dir() / "mos.json", summary.ToJson());
  for (const auto& [label, m] : summary.methods) {
    out << label << ": MOS " << m.mean << " (n=" << m.count << ")";
    if (m.ci_lo) out << " CI [" << *m.ci_lo << ", " << *m.ci_hi << "]";
    out << "\n";
  }
  return kExitOk;
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"lmactd: time-domain post-hoc explanations for audio classifiers", "lmactd"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--set", overrides, "Override a config key, e.g. --set interpreter.alpha=0.5")
      ->take_all()
      ->allow_extra_args(false);

  auto* gen = app.add_subcommand("gen-data", "Generate or import the corpus");
  auto* tclf = app.add_subcommand("train-clf", "Train the classifier");
  auto* titp = app.add_subcommand("train-itp", "Train the interpreter against the frozen classifier");
  auto* expl = app.add_subcommand("explain", "Render explanations / export study stimuli");
  std::string wav;
  expl->add_option("--wav", wav, "Explain a single WAV file instead of exporting stimuli");
  auto* eval = app.add_subcommand("eval", "Compute faithfulness and saliency metrics");
  auto* serve = app.add_subcommand("serve-study", "Run the listening-study ratings service");
  auto* mos = app.add_subcommand("mos", "Summarize a ratings log");
  std::string ratings;
  mos->add_option("--ratings", ratings, "Ratings JSON-lines file");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    RunConfig cfg = config_path.empty() ? RunConfig() : RunConfig::FromFile(config_path);
    for (const auto& s : overrides) cfg.Set(s);
    cfg.Validate();
    if (cfg.deterministic()) torch::set_num_threads(1);
    cfg.Echo();
    if (gen->parsed()) return GenData(cfg, out);
    if (tclf->parsed()) return TrainClf(cfg, out);
    if (titp->parsed()) return TrainItp(cfg, out);
    if (expl->parsed()) return ExplainCmd(cfg, wav, out);
    if (eval->parsed()) return EvalCmd(cfg, out);
    if (serve->parsed()) return ServeCmd(cfg, out);
    if (mos->parsed()) return MosCmd(cfg, ratings, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const MissingCheckpoint& e) {
    err << "error: " << e.what() << "\n";
    return kExitMissingCheckpoint;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace lmactd
