#include "manifest.hpp"

#include "asdkit/error.hpp"
#include "asdkit/util.hpp"

namespace asdkit::detail {

Json feature_config_json(const FeatureConfig& cfg) {
  Json j;
  j["frame_length"] = cfg.stft.frame_length;
  j["hop_length"] = cfg.stft.hop_length;
  j["window"] = window_name(cfg.stft.window);
  j["n_mels"] = cfg.n_mels;
  j["f_min"] = cfg.f_min;
  j["f_max"] = cfg.f_max;
  j["context"] = cfg.context;
  j["sample_rate"] = cfg.sample_rate;
  return j;
}

FeatureConfig feature_config_from_json(const Json& j) {
  FeatureConfig cfg;
  cfg.stft.frame_length = j.at("frame_length").get<int>();
  cfg.stft.hop_length = j.at("hop_length").get<int>();
  cfg.stft.window = parse_window(j.at("window").get<std::string>());
  cfg.n_mels = j.at("n_mels").get<int>();
  cfg.f_min = j.at("f_min").get<double>();
  cfg.f_max = j.at("f_max").get<double>();
  cfg.context = j.at("context").get<int>();
  cfg.sample_rate = j.at("sample_rate").get<int>();
  cfg.validate();
  return cfg;
}

Json key_json(const MachineKey& key) {
  return Json{{"machine_type", key.machine_type}, {"machine_id", key.machine_id}};
}

MachineKey key_from_json(const Json& j) {
  MachineKey k{j.at("machine_type").get<std::string>(), j.at("machine_id").get<int>()};
  k.validate();
  return k;
}

Json vector_json(const Vector& v) {
  Json arr = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Vector vector_from_json(const Json& j) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

std::filesystem::path save_model_files(const std::filesystem::path& dir, const std::string& stem,
                                       const std::string& method, const nn::Network& net,
                                       const FeatureConfig& features, const std::string& run_config_hash,
                                       Json extra) {
  const std::string checkpoint = stem + ".model";
  nn::save_checkpoint(dir / checkpoint, net, features.hash());
  Json m;
  m["format"] = "asdkit-model";
  m["version"] = kManifestVersion;
  m["method"] = method;
  m["checkpoint"] = checkpoint;
  m["features"] = feature_config_json(features);
  m["feature_hash"] = hex64(features.hash());
  m["run_config_hash"] = run_config_hash;
  for (auto& [k, v] : extra.items()) m[k] = v;
  const auto path = dir / (stem + ".json");
  write_file_atomic(path, m.dump(2) + "\n");
  return path;
}

LoadedModel load_model_files(const std::filesystem::path& manifest_path, const std::string& method) {
  LoadedModel out;
  try {
    out.manifest = Json::parse(read_file(manifest_path));
    if (out.manifest.at("format").get<std::string>() != "asdkit-model") {
      throw DataError(manifest_path.string() + ": not an asdkit model manifest");
    }
    if (out.manifest.at("version").get<int>() != kManifestVersion) {
      throw DataError(manifest_path.string() + ": unsupported manifest version");
    }
    const auto found = out.manifest.at("method").get<std::string>();
    if (found != method) throw DataError(manifest_path.string() + ": method is '" + found + "', expected '" + method + "'");
    out.features = feature_config_from_json(out.manifest.at("features"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(manifest_path.string() + ": malformed manifest: " + e.what());
  }
  const std::string recorded = out.manifest.at("feature_hash").get<std::string>();
  if (recorded != hex64(out.features.hash())) {
    throw ConfigError(manifest_path.string() + ": feature configuration does not match its recorded hash");
  }
  const auto ck = nn::load_checkpoint(manifest_path.parent_path() / out.manifest.at("checkpoint").get<std::string>());
  if (ck.config_hash != out.features.hash()) {
    throw ConfigError(manifest_path.string() + ": checkpoint was trained with a different feature configuration");
  }
  out.network = ck.network;
  return out;
}

}  // namespace asdkit::detail
