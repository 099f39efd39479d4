#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <utility>
#include <string>
#include <vector>

#include "asdkit/baseline_ae.hpp"
#include "asdkit/classifier_asd.hpp"

namespace asdkit {

/// kConstantTarget: a one-hot ID is appended to the encoder input; with a wrong
/// ID the network is trained to emit a fixed vector instead of the input.
/// kIdRegression: the one-hot ID is appended to both input and target, so the
/// AE must reconstruct the ID along with the features.
enum class ConditioningVariant { kConstantTarget, kIdRegression };

std::string conditioning_variant_name(ConditioningVariant v);
ConditioningVariant parse_conditioning_variant(const std::string& s);

/// Target used for wrong-ID rows in the constant-target variant.
enum class ConstantPolicy { kFeatureMean, kZero };

std::string constant_policy_name(ConstantPolicy p);
ConstantPolicy parse_constant_policy(const std::string& s);

struct ConditionedConfig {
  FeatureConfig features;
  AeArchitecture arch;
  nn::TrainConfig train;  // seed replaced by the one given to train_conditioned_ae
  ConditioningVariant variant = ConditioningVariant::kConstantTarget;
  double mismatch_prob = 0.5;    // q, constant-target only
  double mismatch_weight = 1.0;  // loss weight of wrong-ID rows
  double id_weight = 1.0;        // lambda, id-regression only
  ConstantPolicy constant = ConstantPolicy::kFeatureMean;
  /// Also append the one-hot ID to the bottleneck code fed to the decoder.
  bool decoder_conditioning = false;

  void validate() const;
};

struct ConditionedAeModel {
  /// The whole AE, or only the encoder when decoder_conditioning is set.
  nn::Network network;
  /// Maps [code | onehot(ID)] to the output; empty unless decoder_conditioning.
  nn::Network decoder;
  bool decoder_conditioning = false;
  ConditioningVariant variant = ConditioningVariant::kConstantTarget;
  std::vector<MachineKey> id_index;
  std::string machine_type;
  Vector constant_vector;  // constant-target only, feature dim
  double id_weight = 1.0;
  double mismatch_prob = 0.5;
  double mismatch_weight = 1.0;
  FeatureConfig features;
  AeArchitecture arch;

  int num_ids() const { return static_cast<int>(id_index.size()); }
  int feature_dim() const { return features.frame_dim(); }
  int id_of(const MachineKey& key) const;
};

struct TrainedConditionedAe {
  ConditionedAeModel model;
  std::vector<double> loss_history;
  std::vector<std::string> warnings;
};

/// Input rows for conditioning every frame on ID index `id`: [frames | onehot(id)].
Matrix conditioned_inputs(const Matrix& frames, int id, int num_ids);

/// Layer sizes of the encoder (or whole AE) and of the separate decoder,
/// which is empty unless `decoder_conditioning`.
std::pair<std::vector<int>, std::vector<int>> conditioned_layer_dims(int feature_dim, int num_ids,
                                                                     ConditioningVariant variant,
                                                                     const AeArchitecture& arch,
                                                                     bool decoder_conditioning);

/// Network output for rows already laid out as [frames | onehot(ID)].
Matrix conditioned_forward(const ConditionedAeModel& model, const Matrix& inputs);

struct ConditionedBackprop {
  double loss = 0.0;
  nn::Gradients network;
  nn::Gradients decoder;  // empty unless decoder_conditioning
};

/// Training loss of one minibatch (inputs, targets, row_weights) and its
/// gradients with respect to every parameter of the model.
ConditionedBackprop conditioned_backprop(const ConditionedAeModel& model, const nn::Minibatch& batch);

/// Trains one conditioned AE on all IDs of a single machine type.
TrainedConditionedAe train_conditioned_ae(const ClipsByMachine& data, const ConditionedConfig& config,
                                          std::uint64_t seed);

/// Weighted mean squared error used in training. Rows are scaled by
/// `row_weights`; in id-regression the last `num_ids` columns are scaled by
/// `id_weight`.
nn::LossValue conditioned_loss(ConditioningVariant variant, const Matrix& pred, const Matrix& targets,
                               const Vector& row_weights, int num_ids, double id_weight);

/// Per-frame error given the network output for conditioning on `id`.
/// Constant-target: ||phi - out||^2. Id-regression: ||phi - out_f||^2 +
/// lambda ||onehot(id) - out_id||^2.
Vector conditioned_frame_errors(ConditioningVariant variant, const Matrix& frames, const Matrix& output, int id,
                                int num_ids, double id_weight);

Vector conditioned_frame_errors(const ConditionedAeModel& model, const Matrix& frames, int id);

double conditioned_anomaly_score(const ConditionedAeModel& model, const AudioClip& clip, const MachineKey& claimed);
/// Score of `clip` conditioned on an arbitrary ID of the model, for
/// cross-conditioning diagnostics.
double conditioned_anomaly_score(const ConditionedAeModel& model, const Matrix& frames, int id);

std::filesystem::path save_conditioned_ae(const ConditionedAeModel& model, const std::filesystem::path& dir,
                                          const std::string& run_config_hash = {});
ConditionedAeModel load_conditioned_ae(const std::filesystem::path& manifest);

}  // namespace asdkit
