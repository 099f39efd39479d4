#include "asdkit/baseline_ae.hpp"

#include "asdkit/error.hpp"
#include "manifest.hpp"

namespace asdkit {

std::string ae_layout_name(AeLayout l) { return l == AeLayout::kFourPerHalf ? "four_per_half" : "five_per_half"; }

AeLayout parse_ae_layout(const std::string& s) {
  if (s == "four_per_half" || s == "4") return AeLayout::kFourPerHalf;
  if (s == "five_per_half" || s == "5") return AeLayout::kFivePerHalf;
  throw ConfigError("unknown AE layout '" + s + "' (four_per_half or five_per_half)");
}

std::vector<int> ae_layer_dims(int input_dim, int output_dim, const AeArchitecture& arch) {
  if (input_dim < 1 || output_dim < 1) throw ConfigError("autoencoder input/output dims must be >= 1");
  if (arch.hidden_units < 1 || arch.bottleneck < 1) throw ConfigError("autoencoder widths must be >= 1");
  const int hidden = arch.layout == AeLayout::kFourPerHalf ? 3 : 4;
  std::vector<int> dims{input_dim};
  for (int i = 0; i < hidden; ++i) dims.push_back(arch.hidden_units);
  dims.push_back(arch.bottleneck);
  for (int i = 0; i < hidden; ++i) dims.push_back(arch.hidden_units);
  dims.push_back(output_dim);
  return dims;
}

std::vector<nn::Activation> ae_activations(std::size_t n_layers) {
  std::vector<nn::Activation> acts(n_layers, nn::Activation::kRelu);
  if (!acts.empty()) acts.back() = nn::Activation::kIdentity;
  return acts;
}

AeModel build_baseline_ae(int input_dim, std::uint64_t seed, const AeArchitecture& arch) {
  const auto dims = ae_layer_dims(input_dim, input_dim, arch);
  const auto acts = ae_activations(dims.size() - 1);
  AeModel m;
  m.network = nn::init_network(dims, acts, seed);
  m.arch = arch;
  return m;
}

Matrix encode(const AeModel& model, const Matrix& frames) {
  const auto rec = nn::forward(model.network, frames);
  return rec.post[model.encoder_layers()];
}

Matrix stack_frames(const FeatureExtractor& fx, std::span<const AudioClip> clips,
                    std::vector<Eigen::Index>* rows_per_clip) {
  std::vector<Matrix> parts;
  parts.reserve(clips.size());
  Eigen::Index total = 0;
  for (const auto& clip : clips) {
    try {
      parts.push_back(fx.frames(clip).vectors);
    } catch (const Error& e) {
      throw DataError("feature extraction failed for clip '" + clip.source_name + "': " + e.what());
    }
    total += parts.back().rows();
    if (rows_per_clip) rows_per_clip->push_back(parts.back().rows());
  }
  Matrix out(total, fx.config().frame_dim());
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p;
    at += p.rows();
  }
  return out;
}

TrainedAe train_baseline(std::span<const AudioClip> clips, const MachineKey& machine,
                         const BaselineConfig& config, std::uint64_t seed) {
  if (clips.empty()) throw ConfigError("train_baseline: no training clips for " + machine.stem());
  const FeatureExtractor fx(config.features);
  const Matrix data = stack_frames(fx, clips);

  TrainedAe out;
  out.model = build_baseline_ae(config.features.frame_dim(), mix_seed(seed, 0x1a17), config.arch);
  out.model.machine = machine;
  out.model.features = config.features;
  nn::TrainConfig tc = config.train;
  tc.seed = mix_seed(seed, 0x7a17);
  out.loss_history = nn::train(out.model.network, data, data, tc).loss_history;
  return out;
}

Vector reconstruction_errors(const nn::Network& net, const Matrix& inputs, const Matrix& targets) {
  const Matrix out = nn::predict(net, inputs);
  if (out.rows() != targets.rows() || out.cols() != targets.cols()) {
    throw DimensionError("reconstruction target shape does not match the network output");
  }
  return (out - targets).rowwise().squaredNorm();
}

double anomaly_score(const AeModel& model, const Matrix& frames) {
  if (frames.rows() == 0) throw DataError("anomaly_score: no context frames");
  return reconstruction_errors(model.network, frames, frames).mean();
}

double anomaly_score(const AeModel& model, const AudioClip& clip) {
  const FeatureExtractor fx(model.features);
  return anomaly_score(model, fx.frames(clip).vectors);
}

std::filesystem::path save_ae_model(const AeModel& model, const std::filesystem::path& dir,
                                    const std::string& run_config_hash) {
  detail::Json extra;
  extra["machine"] = detail::key_json(model.machine);
  extra["architecture"] = {{"hidden_units", model.arch.hidden_units},
                           {"bottleneck", model.arch.bottleneck},
                           {"layout", ae_layout_name(model.arch.layout)}};
  return detail::save_model_files(dir, "ae_" + model.machine.stem(), "baseline_ae", model.network, model.features,
                                  run_config_hash, std::move(extra));
}

AeModel load_ae_model(const std::filesystem::path& manifest) {
  auto loaded = detail::load_model_files(manifest, "baseline_ae");
  AeModel m;
  try {
    m.machine = detail::key_from_json(loaded.manifest.at("machine"));
    const auto& a = loaded.manifest.at("architecture");
    m.arch.hidden_units = a.at("hidden_units").get<int>();
    m.arch.bottleneck = a.at("bottleneck").get<int>();
    m.arch.layout = parse_ae_layout(a.at("layout").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(manifest.string() + ": malformed manifest: " + e.what());
  }
  m.features = loaded.features;
  m.network = std::move(loaded.network);
  const int d = m.features.frame_dim();
  if (m.network.dims() != ae_layer_dims(d, d, m.arch)) {
    throw DataError(manifest.string() + ": checkpoint layer sizes do not match the recorded architecture");
  }
  return m;
}

}  // namespace asdkit
