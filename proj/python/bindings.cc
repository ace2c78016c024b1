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

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>
#include <sstream>

#include "lmactd/classifier.h"
#include "lmactd/cli.h"
#include "lmactd/datasets.h"
#include "lmactd/dsp.h"
#include "lmactd/error.h"
#include "lmactd/interpreter.h"
#include "lmactd/metrics.h"
#include "lmactd/mos.h"
#include "lmactd/training.h"

namespace py = pybind11;

namespace lmactd::python {
namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using IntArray = py::array_t<int, py::array::c_style | py::array::forcecast>;

std::vector<double> ToVector(const DoubleArray& a) { return {a.data(), a.data() + a.size()}; }

Waveform ToWave(const FloatArray& a, int sample_rate) {
  if (a.ndim() != 1) throw InvalidArgument("waveform must be one-dimensional");
  return {std::vector<float>(a.data(), a.data() + a.size()), sample_rate};
}

py::array_t<float> ToArray(const Waveform& w) {
  py::array_t<float> out(static_cast<py::ssize_t>(w.size()));
  std::copy(w.samples.begin(), w.samples.end(), out.mutable_data());
  return out;
}

py::object ToPython(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

std::vector<ConfidenceTriple> Triples(const DoubleArray& p_x, const DoubleArray* p_i, const DoubleArray* p_iout) {
  std::vector<ConfidenceTriple> t(p_x.size());
  for (const auto* a : {p_i, p_iout})
    if (a && a->size() != p_x.size()) throw InvalidArgument("confidence arrays differ in length");
  for (std::size_t k = 0; k < t.size(); ++k) {
    t[k].p_x = p_x.data()[k];
    if (p_i) t[k].p_i = p_i->data()[k];
    if (p_iout) t[k].p_iout = p_iout->data()[k];
  }
  return t;
}

// A trained classifier/interpreter pair loaded from a run directory.
class Pipeline {
 public:
  explicit Pipeline(const std::filesystem::path& run_dir)
      : clf_(Classifier::Load(run_dir / "classifier")), itp_(Interpreter::Load(run_dir / "interpreter", clf_)) {
    clf_.Freeze();
  }

  int sample_rate() const { return clf_.sample_rate(); }
  const std::vector<std::string>& class_names() const { return clf_.class_names(); }
  double alpha() const { return itp_.alpha(); }

  std::vector<double> Classify(const FloatArray& wave) const {
    auto w = ToWave(wave, clf_.sample_rate());
    py::gil_scoped_release nogil;
    return clf_.Classify(w).probs;
  }

  py::dict Explain(const FloatArray& wave) const {
    auto w = ToWave(wave, clf_.sample_rate());
    ExplanationResult r;
    {
      py::gil_scoped_release nogil;
      r = lmactd::Explain(clf_, itp_, w);
    }
    py::dict d;
    d["explanation"] = ToArray(r.explanation);
    d["complement"] = ToArray(r.complement);
    d["predicted_class"] = r.predicted_class;
    d["probs_x"] = r.probs_x.probs;
    d["probs_i"] = r.probs_i.probs;
    d["probs_iout"] = r.probs_iout.probs;
    return d;
  }

 private:
  Classifier clf_;
  Interpreter itp_;
};

}  // namespace

PYBIND11_MODULE(_lmactd, m) {
  m.doc() = "Time-domain post-hoc explanations for audio classifiers";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);

  m.def("average_increase", [](const DoubleArray& p_x, const DoubleArray& p_i) {
    return AverageIncrease(Triples(p_x, &p_i, nullptr));
  }, py::arg("p_x"), py::arg("p_i"));
  m.def("average_decrease", [](const DoubleArray& p_x, const DoubleArray& p_i) {
    return AverageDecrease(Triples(p_x, &p_i, nullptr));
  }, py::arg("p_x"), py::arg("p_i"));
  m.def("average_gain", [](const DoubleArray& p_x, const DoubleArray& p_i) {
    return AverageGain(Triples(p_x, &p_i, nullptr));
  }, py::arg("p_x"), py::arg("p_i"));
  m.def("faithfulness", [](const DoubleArray& p_x, const DoubleArray& p_iout) {
    return Faithfulness(Triples(p_x, nullptr, &p_iout));
  }, py::arg("p_x"), py::arg("p_iout"));
  m.def("input_fidelity", [](const IntArray& pred_x, const IntArray& pred_i) {
    if (pred_x.size() != pred_i.size()) throw InvalidArgument("prediction arrays differ in length");
    std::vector<ConfidenceTriple> t(pred_x.size());
    for (std::size_t k = 0; k < t.size(); ++k) {
      t[k].pred_x = pred_x.data()[k];
      t[k].pred_i = pred_i.data()[k];
    }
    return InputFidelity(t);
  }, py::arg("pred_x"), py::arg("pred_i"));
  m.def("sparseness", [](const DoubleArray& a) { return Sparseness(ToVector(a)); }, py::arg("saliency"));
  m.def("complexity", [](const DoubleArray& a) { return Complexity(ToVector(a)); }, py::arg("saliency"));

  m.def("masking_loss", [](std::vector<double> px, std::vector<double> pi, std::vector<double> po, double reg,
                           std::tuple<double, double, double> lambdas) {
    const auto [li, lo, lr] = lambdas;
    auto b = MaskingLoss({px, {}}, {pi, {}}, {po, {}}, reg, LossWeights{li, lo, lr});
    py::dict d;
    d["total"] = b.total;
    d["mask_in"] = b.mask_in;
    d["mask_out"] = b.mask_out;
    d["reg"] = b.reg;
    return d;
  }, py::arg("probs_x"), py::arg("probs_i"), py::arg("probs_iout"), py::arg("reg"),
     py::arg("lambdas") = std::make_tuple(5.0, 0.2, 6.0));

  m.def("mix_at_snr", [](const FloatArray& signal, const FloatArray& noise, double snr_db, int sample_rate,
                         std::size_t offset) {
    auto r = MixAtSnr(ToWave(signal, sample_rate), ToWave(noise, sample_rate), snr_db, offset);
    return py::make_tuple(ToArray(r.mixture), r.noise_gain, r.output_gain);
  }, py::arg("signal"), py::arg("noise"), py::arg("snr_db"), py::arg("sample_rate") = 16000,
     py::arg("offset") = 0);

  m.def("mos_summary", [](const std::vector<int>& scores, const std::string& ci, double confidence, uint64_t seed,
                          const std::string& method_label) {
    std::vector<RatingRecord> r;
    for (std::size_t k = 0; k < scores.size(); ++k)
      r.push_back({"r" + std::to_string(k), "s", method_label, scores[k], ""});
    MosOptions o;
    o.method = ParseCiMethod(ci);
    o.confidence = confidence;
    o.seed = seed;
    return ToPython(SummarizeMos(r, o).ToJson());
  }, py::arg("scores"), py::arg("ci") = "t", py::arg("confidence") = 0.95, py::arg("seed") = 0,
     py::arg("method_label") = "LMAC-TD");

  m.def("synthetic_corpus", [](int num_classes, int per_class, double clip_seconds, int sample_rate, uint64_t seed) {
    SyntheticCorpusOptions o{num_classes, per_class, clip_seconds, sample_rate, seed};
    Corpus c = GenerateSyntheticCorpus(o);
    py::list samples;
    for (const auto& s : c.samples) {
      py::dict d;
      d["id"] = s.id;
      d["class_id"] = s.class_id;
      d["split"] = SplitName(s.split);
      d["wave"] = ToArray(s.wave);
      samples.append(d);
    }
    py::dict d;
    d["digest"] = c.Digest();
    d["class_names"] = c.class_names;
    d["sample_rate"] = c.sample_rate;
    d["samples"] = samples;
    return d;
  }, py::arg("num_classes") = 5, py::arg("per_class") = 20, py::arg("clip_seconds") = 1.0,
     py::arg("sample_rate") = 16000, py::arg("seed") = 0);

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    int code;
    {
      py::gil_scoped_release nogil;
      code = RunCli(args, out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
  }, py::arg("args"), "Runs the command-line tool in-process; returns (exit_code, stdout, stderr).");

  py::class_<Pipeline>(m, "Pipeline")
      .def(py::init([](const std::string& run_dir) { return std::make_unique<Pipeline>(run_dir); }),
           py::arg("run_dir"))
      .def_property_readonly("sample_rate", &Pipeline::sample_rate)
      .def_property_readonly("class_names", &Pipeline::class_names)
      .def_property_readonly("alpha", &Pipeline::alpha)
      .def("classify", &Pipeline::Classify, py::arg("wave"))
      .def("explain", &Pipeline::Explain, py::arg("wave"));
}

}  // namespace lmactd::python
