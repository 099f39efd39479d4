#pragma once

// Shared model-manifest plumbing. Every trained model is stored as a binary
// checkpoint plus a JSON manifest next to it.

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "asdkit/features.hpp"
#include "asdkit/machine_key.hpp"
#include "asdkit/nn.hpp"

namespace asdkit::detail {

using Json = nlohmann::ordered_json;

inline constexpr int kManifestVersion = 1;

Json feature_config_json(const FeatureConfig& cfg);
FeatureConfig feature_config_from_json(const Json& j);

Json key_json(const MachineKey& key);
MachineKey key_from_json(const Json& j);

Json vector_json(const Vector& v);
Vector vector_from_json(const Json& j);

/// Saves <dir>/<stem>.model and <dir>/<stem>.json. `manifest` receives the
/// common fields (format, version, method, checkpoint, features, hashes).
std::filesystem::path save_model_files(const std::filesystem::path& dir, const std::string& stem,
                                       const std::string& method, const nn::Network& net,
                                       const FeatureConfig& features, const std::string& run_config_hash,
                                       Json manifest);

struct LoadedModel {
  Json manifest;
  nn::Network network;
  FeatureConfig features;
};

/// Reads a manifest, checks its method and that the feature configuration,
/// the recorded feature hash and the checkpoint hash all agree.
LoadedModel load_model_files(const std::filesystem::path& manifest_path, const std::string& method);

}  // namespace asdkit::detail
