#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "asdkit/baseline_ae.hpp"
#include "asdkit/classifier_asd.hpp"
#include "asdkit/conditioned_ae.hpp"
#include "asdkit/features.hpp"
#include "asdkit/nn.hpp"

namespace asdkit {

enum class Method { kBaselineAe, kClassifier, kConditionedAe };

std::string method_name(Method m);
Method parse_method(const std::string& s);

/// Everything a train/score run depends on. Loaded from a "key = value" file;
/// unknown keys are an error.
///
/// Keys (defaults in parentheses):
///   frame_length (1024) hop_length (512) window (hann) n_mels (64)
///   f_min (0) f_max (8000) context (2)
///   epochs (100) batch_size (512) learning_rate (0.001) seed (0)
///   method (baseline_ae | classifier | conditioned_ae)
///   ae_layout (four_per_half) hidden_units (128) bottleneck (8)
///   classifier_mode (within_type) classifier_hidden (128,128,64)
///   variant (constant_target) mismatch_prob (0.5) mismatch_weight (1)
///   id_weight (1) constant_policy (mean) decoder_conditioning (false)
///   machine_types (all types found)   threads (1)
struct RunConfig {
  FeatureConfig features;
  nn::TrainConfig train;
  Method method = Method::kBaselineAe;
  AeArchitecture arch;
  ClassifierMode classifier_mode = ClassifierMode::kWithinType;
  std::vector<int> classifier_hidden = {128, 128, 64};
  ConditioningVariant variant = ConditioningVariant::kConstantTarget;
  double mismatch_prob = 0.5;
  double mismatch_weight = 1.0;
  double id_weight = 1.0;
  ConstantPolicy constant_policy = ConstantPolicy::kFeatureMean;
  bool decoder_conditioning = false;
  std::vector<std::string> machine_types;
  int threads = 1;

  /// Applies one key; ConfigError for an unknown key or a bad value.
  void set(const std::string& key, const std::string& value);
  void validate() const;
  /// All keys in a fixed order, one "key = value" per line.
  std::string canonical() const;
  std::uint64_t hash() const;

  BaselineConfig baseline() const;
  ClassifierConfig classifier() const;
  ConditionedConfig conditioned() const;
};

RunConfig parse_run_config(const std::string& text);

}  // namespace asdkit
