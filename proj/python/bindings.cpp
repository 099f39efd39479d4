#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <string>
#include <vector>

#include "cli.hpp"

#include "asdkit/audio_io.hpp"
#include "asdkit/baseline_ae.hpp"
#include "asdkit/dataset.hpp"
#include "asdkit/error.hpp"
#include "asdkit/features.hpp"
#include "asdkit/metrics.hpp"

namespace py = pybind11;
using namespace asdkit;

namespace {

std::vector<metrics::ScoredSample> samples_of(const std::vector<double>& normal, const std::vector<double>& anomalous) {
  std::vector<metrics::ScoredSample> s;
  s.reserve(normal.size() + anomalous.size());
  for (double v : normal) s.push_back({v, false, ""});
  for (double v : anomalous) s.push_back({v, true, ""});
  return s;
}

metrics::TieRule tie_rule(const std::string& name) {
  if (name == "zero") return metrics::TieRule::kZero;
  if (name == "half") return metrics::TieRule::kHalf;
  throw ConfigError("ties must be 'zero' or 'half', got '" + name + "'");
}

AudioClip clip_of(std::vector<double> samples, int sample_rate) {
  AudioClip clip;
  clip.samples = std::move(samples);
  clip.sample_rate = sample_rate;
  validate_clip(clip);
  return clip;
}

}  // namespace

PYBIND11_MODULE(_asdkit, m) {
  m.doc() = "Acoustic anomaly detection toolkit: metrics, audio I/O, features and models";

  static py::exception<Error> base_error(m, "AsdkitError", PyExc_RuntimeError);
  static py::exception<Error> config_error(m, "ConfigError", base_error.ptr());
  static py::exception<Error> data_error(m, "DataError", base_error.ptr());
  static py::exception<Error> numeric_error(m, "NumericError", base_error.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      switch (e.kind()) {
        case ErrorKind::kConfig:
          PyErr_SetString(config_error.ptr(), e.what());
          break;
        case ErrorKind::kData:
          PyErr_SetString(data_error.ptr(), e.what());
          break;
        default:
          PyErr_SetString(numeric_error.ptr(), e.what());
      }
    }
  });

  m.def(
      "auc",
      [](const std::vector<double>& normal, const std::vector<double>& anomalous, const std::string& ties) {
        return metrics::auc(samples_of(normal, anomalous), tie_rule(ties));
      },
      py::arg("normal"), py::arg("anomalous"), py::arg("ties") = "zero",
      "Fraction of (normal, anomalous) pairs ranked correctly.");
  m.def(
      "pauc",
      [](const std::vector<double>& normal, const std::vector<double>& anomalous, double p, const std::string& ties) {
        return metrics::pauc(samples_of(normal, anomalous), p, tie_rule(ties));
      },
      py::arg("normal"), py::arg("anomalous"), py::arg("p") = 0.1, py::arg("ties") = "zero",
      "AUC restricted to the floor(p * N) highest-scoring normal samples.");
  m.def(
      "roc_curve",
      [](const std::vector<double>& normal, const std::vector<double>& anomalous) {
        std::vector<double> fpr, tpr;
        for (const auto& pt : metrics::roc_curve(samples_of(normal, anomalous))) {
          fpr.push_back(pt.fpr);
          tpr.push_back(pt.tpr);
        }
        return py::make_tuple(fpr, tpr);
      },
      py::arg("normal"), py::arg("anomalous"), "Empirical ROC as (fpr, tpr) lists.");

  m.def(
      "read_wav",
      [](const std::filesystem::path& path, int channel) {
        WavReadOptions opts;
        opts.channel = channel;
        const AudioClip clip = read_wav(path, opts);
        const Vector samples = Eigen::Map<const Vector>(clip.samples.data(), static_cast<Eigen::Index>(clip.samples.size()));
        return py::make_tuple(samples, clip.sample_rate);
      },
      py::arg("path"), py::arg("channel") = 0, "Samples in [-1, 1] and the sample rate.");
  m.def(
      "write_wav",
      [](const std::filesystem::path& path, std::vector<double> samples, int sample_rate) {
        write_wav(clip_of(std::move(samples), sample_rate), path);
      },
      py::arg("path"), py::arg("samples"), py::arg("sample_rate") = kPipelineSampleRate,
      "Writes mono 16-bit PCM.");

  m.def(
      "log_mel",
      [](std::vector<double> samples, int sample_rate) {
        const FeatureExtractor fx{FeatureConfig{}};
        return fx.log_mel(clip_of(std::move(samples), sample_rate)).values;
      },
      py::arg("samples"), py::arg("sample_rate") = kPipelineSampleRate,
      "Log-mel energies with the default configuration, n_mels x frames.");
  m.def(
      "feature_frames",
      [](std::vector<double> samples, int sample_rate) {
        const FeatureExtractor fx{FeatureConfig{}};
        return fx.frames(clip_of(std::move(samples), sample_rate)).vectors;
      },
      py::arg("samples"), py::arg("sample_rate") = kPipelineSampleRate,
      "Context-stacked feature vectors, one row per frame.");

  py::class_<AeModel>(m, "AutoencoderModel")
      .def_static("load", &load_ae_model, py::arg("manifest"), "Loads a model written by 'asdkit train'.")
      .def_property_readonly("machine_type", [](const AeModel& a) { return a.machine.machine_type; })
      .def_property_readonly("machine_id", [](const AeModel& a) { return a.machine.machine_id; })
      .def_property_readonly("layer_dims", [](const AeModel& a) { return a.network.dims(); })
      .def(
          "score",
          [](const AeModel& a, std::vector<double> samples, int sample_rate) {
            return anomaly_score(a, clip_of(std::move(samples), sample_rate));
          },
          py::arg("samples"), py::arg("sample_rate") = kPipelineSampleRate,
          "Mean reconstruction error over the clip's frames.")
      .def(
          "score_frames", [](const AeModel& a, const Matrix& frames) { return anomaly_score(a, frames); },
          py::arg("frames"));

  m.def(
      "synthesize_corpus",
      [](const std::string& spec_text, const std::filesystem::path& root) {
        return generate_synth_corpus(parse_synth_spec(spec_text), root).size();
      },
      py::arg("spec_text"), py::arg("root"), "Writes a synthetic corpus and returns the number of clips.");

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "asdkit");
        std::vector<char*> argv;
        for (auto& a : args) argv.push_back(a.data());
        py::gil_scoped_release release;
        return cli::run(static_cast<int>(argv.size()), argv.data());
      },
      py::arg("args"), "Runs an asdkit subcommand in-process and returns its exit code.");
}
