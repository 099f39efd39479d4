#include "asdkit/classifier_asd.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "asdkit/baseline_ae.hpp"
#include "asdkit/error.hpp"
#include "manifest.hpp"

namespace asdkit {

std::string classifier_mode_name(ClassifierMode m) {
  return m == ClassifierMode::kWithinType ? "within_type" : "outlier_exposed";
}

ClassifierMode parse_classifier_mode(const std::string& s) {
  if (s == "within_type") return ClassifierMode::kWithinType;
  if (s == "outlier_exposed") return ClassifierMode::kOutlierExposed;
  throw ConfigError("unknown classifier mode '" + s + "' (within_type or outlier_exposed)");
}

int IdClassifier::class_of(const MachineKey& key) const {
  const auto it = std::find(id_index.begin(), id_index.end(), key);
  if (it == id_index.end()) throw ConfigError("machine " + key.stem() + " is not a class of this classifier");
  return static_cast<int>(it - id_index.begin());
}

TrainedClassifier train_id_classifier(const ClipsByMachine& data, ClassifierMode mode,
                                      const std::string& machine_type, const ClassifierConfig& config,
                                      std::uint64_t seed) {
  IdClassifier clf;
  clf.mode = mode;
  clf.machine_type = machine_type;
  clf.features = config.features;
  std::vector<const std::vector<AudioClip>*> other;
  for (const auto& [key, clips] : data) {
    if (key.machine_type == machine_type) {
      clf.id_index.push_back(key);
      if (clips.empty()) throw DataError("no training clips for class " + key.stem());
    } else if (mode == ClassifierMode::kOutlierExposed && !clips.empty()) {
      other.push_back(&clips);
    }
  }
  const int k = static_cast<int>(clf.id_index.size()) + (mode == ClassifierMode::kOutlierExposed ? 1 : 0);
  if (mode == ClassifierMode::kOutlierExposed && other.empty()) {
    throw ConfigError("outlier_exposed classifier needs normal clips of at least one other machine type");
  }
  if (k < 2) {
    throw ConfigError("classifier for '" + machine_type + "' has " + std::to_string(k) +
                      " class(es); at least two are required");
  }

  const FeatureExtractor fx(config.features);
  std::vector<Matrix> parts;
  std::vector<int> labels;
  auto add = [&](const std::vector<AudioClip>& clips, int cls) {
    parts.push_back(stack_frames(fx, clips));
    labels.insert(labels.end(), static_cast<std::size_t>(parts.back().rows()), cls);
  };
  for (std::size_t c = 0; c < clf.id_index.size(); ++c) add(data.at(clf.id_index[c]), static_cast<int>(c));
  for (const auto* clips : other) add(*clips, k - 1);
  Matrix frames(static_cast<Eigen::Index>(labels.size()), config.features.frame_dim());
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    frames.middleRows(at, p.rows()) = p;
    at += p.rows();
  }

  std::vector<int> dims{config.features.frame_dim()};
  for (int h : config.hidden) dims.push_back(h);
  dims.push_back(k);
  clf.network = nn::init_network(dims, ae_activations(dims.size() - 1), mix_seed(seed, 0xc1a5));
  nn::TrainConfig tc = config.train;
  tc.seed = mix_seed(seed, 0x7a17);

  TrainedClassifier out;
  out.loss_history = nn::train(clf.network, frames, labels, tc).loss_history;
  out.model = std::move(clf);
  return out;
}

Matrix frame_log_probs(const IdClassifier& clf, const AudioClip& clip) {
  const FeatureExtractor fx(clf.features);
  return nn::log_softmax(nn::predict(clf.network, fx.frames(clip).vectors));
}

double claimed_class_nll(const Matrix& log_probs, int cls) {
  if (log_probs.rows() == 0) throw DataError("no frames to score");
  if (cls < 0 || cls >= log_probs.cols()) throw ConfigError("class index out of range");
  const double cap = -std::log(kProbabilityFloor);
  double sum = 0.0;
  for (Eigen::Index r = 0; r < log_probs.rows(); ++r) sum += std::min(-log_probs(r, cls), cap);
  return sum / static_cast<double>(log_probs.rows());
}

double classification_anomaly_score(const IdClassifier& clf, const AudioClip& clip, const MachineKey& claimed) {
  const int cls = clf.class_of(claimed);
  return claimed_class_nll(frame_log_probs(clf, clip), cls);
}

SimilarityReport similarity_audit(const IdClassifier& clf, const ClipsByMachine& heldout, double threshold) {
  SimilarityReport report;
  report.threshold = threshold;
  const FeatureExtractor fx(clf.features);
  // predicted[c][j]: frames of target class c assigned to class j.
  const auto n = clf.id_index.size();
  std::vector<std::vector<double>> predicted(n, std::vector<double>(static_cast<std::size_t>(clf.num_classes()), 0.0));
  std::vector<double> totals(n, 0.0);
  std::vector<bool> present(n, false);
  for (std::size_t c = 0; c < n; ++c) {
    const auto it = heldout.find(clf.id_index[c]);
    if (it == heldout.end() || it->second.empty()) continue;
    present[c] = true;
    const Matrix logits = nn::predict(clf.network, stack_frames(fx, it->second));
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      Eigen::Index best;
      logits.row(r).maxCoeff(&best);
      predicted[c][static_cast<std::size_t>(best)] += 1.0;
    }
    totals[c] = static_cast<double>(logits.rows());
    report.frame_accuracy[clf.id_index[c]] = predicted[c][c] / totals[c];
  }
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      if (!present[a] || !present[b]) continue;
      PairConfusion pc{clf.id_index[a], clf.id_index[b], 0.0, false};
      pc.confusion = (predicted[a][b] + predicted[b][a]) / (totals[a] + totals[b]);
      pc.flagged = pc.confusion > threshold;
      report.pairs.push_back(pc);
    }
  }
  return report;
}

std::filesystem::path save_classifier(const IdClassifier& clf, const std::filesystem::path& dir,
                                      const std::string& run_config_hash) {
  detail::Json extra;
  extra["machine_type"] = clf.machine_type;
  extra["mode"] = classifier_mode_name(clf.mode);
  detail::Json ids = detail::Json::array();
  for (const auto& k : clf.id_index) ids.push_back(detail::key_json(k));
  extra["id_index"] = ids;
  return detail::save_model_files(dir, "classifier_" + clf.machine_type, "classifier", clf.network, clf.features,
                                  run_config_hash, std::move(extra));
}

IdClassifier load_classifier(const std::filesystem::path& manifest) {
  auto loaded = detail::load_model_files(manifest, "classifier");
  IdClassifier clf;
  try {
    clf.machine_type = loaded.manifest.at("machine_type").get<std::string>();
    clf.mode = parse_classifier_mode(loaded.manifest.at("mode").get<std::string>());
    for (const auto& k : loaded.manifest.at("id_index")) clf.id_index.push_back(detail::key_from_json(k));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(manifest.string() + ": malformed manifest: " + e.what());
  }
  clf.features = loaded.features;
  clf.network = std::move(loaded.network);
  const std::set<MachineKey> unique(clf.id_index.begin(), clf.id_index.end());
  const auto expected_k = clf.id_index.size() + (clf.mode == ClassifierMode::kOutlierExposed ? 1 : 0);
  if (unique.size() != clf.id_index.size() || static_cast<std::size_t>(clf.network.out_dim()) != expected_k ||
      clf.network.in_dim() != clf.features.frame_dim()) {
    throw DataError(manifest.string() + ": id_index does not match the checkpoint's shape");
  }
  return clf;
}

}  // namespace asdkit
