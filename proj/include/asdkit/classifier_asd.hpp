#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "asdkit/audio_io.hpp"
#include "asdkit/features.hpp"
#include "asdkit/machine_key.hpp"
#include "asdkit/nn.hpp"

namespace asdkit {

enum class ClassifierMode {
  kWithinType,      // classes are the Machine IDs of one type
  kOutlierExposed,  // target-type IDs plus one pooled class for every other type
};

std::string classifier_mode_name(ClassifierMode m);
ClassifierMode parse_classifier_mode(const std::string& s);

inline constexpr double kProbabilityFloor = 1e-12;

struct ClassifierConfig {
  FeatureConfig features;
  std::vector<int> hidden = {128, 128, 64};
  nn::TrainConfig train;  // seed replaced by the one given to train_id_classifier
};

struct IdClassifier {
  nn::Network network;
  /// Class c < id_index.size() is id_index[c]; in outlier-exposed mode the
  /// final class collects every other machine type.
  std::vector<MachineKey> id_index;
  ClassifierMode mode = ClassifierMode::kWithinType;
  std::string machine_type;
  FeatureConfig features;

  int num_classes() const { return static_cast<int>(network.out_dim()); }
  /// Class index of `key`; ConfigError if it is not a target ID.
  int class_of(const MachineKey& key) const;
};

struct TrainedClassifier {
  IdClassifier model;
  std::vector<double> loss_history;
};

using ClipsByMachine = std::map<MachineKey, std::vector<AudioClip>>;

/// Frame-level softmax classifier over the IDs of `machine_type`. In
/// outlier-exposed mode every clip of another type feeds the extra class.
/// Throws ConfigError for fewer than two classes, DataError for an empty class.
TrainedClassifier train_id_classifier(const ClipsByMachine& data, ClassifierMode mode,
                                      const std::string& machine_type, const ClassifierConfig& config,
                                      std::uint64_t seed);

/// Per-frame class log-probabilities, frames x K.
Matrix frame_log_probs(const IdClassifier& clf, const AudioClip& clip);

/// Mean over frames of -log max(p(class | frame), 1e-12).
double claimed_class_nll(const Matrix& log_probs, int cls);

/// Higher means the clip looks less like its claimed machine ID.
double classification_anomaly_score(const IdClassifier& clf, const AudioClip& clip, const MachineKey& claimed);

struct PairConfusion {
  MachineKey a;
  MachineKey b;
  /// Fraction of a's and b's held-out frames assigned to the other one of the pair.
  double confusion = 0.0;
  bool flagged = false;
};

struct SimilarityReport {
  std::vector<PairConfusion> pairs;
  /// Argmax accuracy per target ID over its held-out frames.
  std::map<MachineKey, double> frame_accuracy;
  double threshold = 0.3;
};

/// Pairwise confusion among the classifier's target IDs on held-out normal
/// clips. Pairs above `threshold` risk frequent false positives.
SimilarityReport similarity_audit(const IdClassifier& clf, const ClipsByMachine& heldout, double threshold = 0.3);

std::filesystem::path save_classifier(const IdClassifier& clf, const std::filesystem::path& dir,
                                      const std::string& run_config_hash = {});
IdClassifier load_classifier(const std::filesystem::path& manifest);

}  // namespace asdkit
