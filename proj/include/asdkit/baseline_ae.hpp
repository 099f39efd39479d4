#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "asdkit/audio_io.hpp"
#include "asdkit/features.hpp"
#include "asdkit/machine_key.hpp"
#include "asdkit/nn.hpp"

namespace asdkit {

/// How "one input layer, three hidden layers and one output layer" per
/// encoder/decoder half is read. kFourPerHalf: in-128-128-128-8 (and mirrored);
/// kFivePerHalf: in-128-128-128-128-8.
enum class AeLayout { kFourPerHalf, kFivePerHalf };

std::string ae_layout_name(AeLayout l);
AeLayout parse_ae_layout(const std::string& s);

struct AeArchitecture {
  int hidden_units = 128;
  int bottleneck = 8;
  AeLayout layout = AeLayout::kFourPerHalf;
};

/// Layer sizes input -> ... -> bottleneck -> ... -> output.
std::vector<int> ae_layer_dims(int input_dim, int output_dim, const AeArchitecture& arch);
/// ReLU on every layer except the last.
std::vector<nn::Activation> ae_activations(std::size_t n_layers);

struct AeModel {
  nn::Network network;
  MachineKey machine;
  FeatureConfig features;
  AeArchitecture arch;

  /// Number of weight layers in the encoder half; its output is the bottleneck.
  std::size_t encoder_layers() const { return network.layers.size() / 2; }
  int bottleneck_dim() const { return static_cast<int>(network.layers[encoder_layers() - 1].out_dim()); }
};

AeModel build_baseline_ae(int input_dim, std::uint64_t seed, const AeArchitecture& arch = {});

/// Encoder output (bottleneck activations), one row per frame.
Matrix encode(const AeModel& model, const Matrix& frames);

struct BaselineConfig {
  FeatureConfig features;
  AeArchitecture arch;
  nn::TrainConfig train;  // its seed is replaced by the seed given to train_baseline
};

struct TrainedAe {
  AeModel model;
  std::vector<double> loss_history;
};

/// Pools the context frames of every clip and fits the AE with MSE.
/// Throws ConfigError for an empty clip set, DataError naming a clip whose
/// features cannot be extracted.
TrainedAe train_baseline(std::span<const AudioClip> clips, const MachineKey& machine,
                         const BaselineConfig& config, std::uint64_t seed);

/// Squared l2 reconstruction error of each row through `net`.
Vector reconstruction_errors(const nn::Network& net, const Matrix& inputs, const Matrix& targets);

/// Mean over valid context frames of ||phi_t - D(E(phi_t))||^2.
double anomaly_score(const AeModel& model, const AudioClip& clip);
double anomaly_score(const AeModel& model, const Matrix& frames);

enum class Decision { kNormal, kAnomaly };

/// Anomaly iff score > threshold.
inline Decision decide(double score, double threshold) {
  return score > threshold ? Decision::kAnomaly : Decision::kNormal;
}

/// Writes <dir>/<stem>.model (checkpoint) and <dir>/<stem>.json (manifest);
/// returns the manifest path. `run_config_hash` is recorded verbatim.
std::filesystem::path save_ae_model(const AeModel& model, const std::filesystem::path& dir,
                                    const std::string& run_config_hash = {});
AeModel load_ae_model(const std::filesystem::path& manifest);

/// Stacks the context frames of several clips; DataError names a failing clip.
Matrix stack_frames(const FeatureExtractor& fx, std::span<const AudioClip> clips,
                    std::vector<Eigen::Index>* rows_per_clip = nullptr);

}  // namespace asdkit
