#include "asdkit/conditioned_ae.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "asdkit/error.hpp"
#include "manifest.hpp"

namespace asdkit {

std::string conditioning_variant_name(ConditioningVariant v) {
  return v == ConditioningVariant::kConstantTarget ? "constant_target" : "id_regression";
}

ConditioningVariant parse_conditioning_variant(const std::string& s) {
  if (s == "constant_target") return ConditioningVariant::kConstantTarget;
  if (s == "id_regression") return ConditioningVariant::kIdRegression;
  throw ConfigError("unknown conditioning variant '" + s + "' (constant_target or id_regression)");
}

std::string constant_policy_name(ConstantPolicy p) { return p == ConstantPolicy::kFeatureMean ? "mean" : "zero"; }

ConstantPolicy parse_constant_policy(const std::string& s) {
  if (s == "mean") return ConstantPolicy::kFeatureMean;
  if (s == "zero") return ConstantPolicy::kZero;
  throw ConfigError("unknown constant policy '" + s + "' (mean or zero)");
}

void ConditionedConfig::validate() const {
  if (!(mismatch_prob >= 0.0 && mismatch_prob <= 1.0)) throw ConfigError("mismatch_prob must be in [0, 1]");
  if (!(mismatch_weight >= 0.0) || !std::isfinite(mismatch_weight)) throw ConfigError("mismatch_weight must be >= 0");
  if (!(id_weight >= 0.0) || !std::isfinite(id_weight)) throw ConfigError("id_weight must be >= 0");
}

int ConditionedAeModel::id_of(const MachineKey& key) const {
  const auto it = std::find(id_index.begin(), id_index.end(), key);
  if (it == id_index.end()) throw ConfigError("machine " + key.stem() + " is not an ID of this conditioned AE");
  return static_cast<int>(it - id_index.begin());
}

Matrix conditioned_inputs(const Matrix& frames, int id, int num_ids) {
  if (id < 0 || id >= num_ids) throw ConfigError("conditioning ID index out of range");
  Matrix in = Matrix::Zero(frames.rows(), frames.cols() + num_ids);
  in.leftCols(frames.cols()) = frames;
  in.col(frames.cols() + id).setOnes();
  return in;
}

std::pair<std::vector<int>, std::vector<int>> conditioned_layer_dims(int feature_dim, int num_ids,
                                                                     ConditioningVariant variant,
                                                                     const AeArchitecture& arch,
                                                                     bool decoder_conditioning) {
  const int out_dim = variant == ConditioningVariant::kConstantTarget ? feature_dim : feature_dim + num_ids;
  const auto full = ae_layer_dims(feature_dim + num_ids, out_dim, arch);
  if (!decoder_conditioning) return {full, {}};
  const auto mid = static_cast<std::ptrdiff_t>((full.size() - 1) / 2);
  std::vector<int> encoder(full.begin(), full.begin() + mid + 1);
  std::vector<int> decoder{arch.bottleneck + num_ids};
  decoder.insert(decoder.end(), full.begin() + mid + 1, full.end());
  return {encoder, decoder};
}

Matrix conditioned_forward(const ConditionedAeModel& model, const Matrix& inputs) {
  if (!model.decoder_conditioning) return nn::predict(model.network, inputs);
  const Matrix code = nn::predict(model.network, inputs);
  Matrix dec_in(inputs.rows(), code.cols() + model.num_ids());
  dec_in << code, inputs.rightCols(model.num_ids());
  return nn::predict(model.decoder, dec_in);
}

ConditionedBackprop conditioned_backprop(const ConditionedAeModel& model, const nn::Minibatch& batch) {
  const int k = model.num_ids();
  ConditionedBackprop out;
  const nn::ForwardRecord enc = nn::forward(model.network, batch.inputs);
  if (!model.decoder_conditioning) {
    const nn::LossValue lv =
        conditioned_loss(model.variant, enc.output(), batch.targets, batch.row_weights, k, model.id_weight);
    out.loss = lv.loss;
    if (std::isfinite(lv.loss)) out.network = nn::backward(model.network, enc, lv.grad);
    return out;
  }
  const Eigen::Index z = enc.output().cols();
  Matrix dec_in(batch.inputs.rows(), z + k);
  dec_in << enc.output(), batch.inputs.rightCols(k);
  const nn::ForwardRecord dec = nn::forward(model.decoder, dec_in);
  const nn::LossValue lv =
      conditioned_loss(model.variant, dec.output(), batch.targets, batch.row_weights, k, model.id_weight);
  out.loss = lv.loss;
  if (!std::isfinite(lv.loss)) return out;
  out.decoder = nn::backward(model.decoder, dec, lv.grad);
  out.network = nn::backward(model.network, enc, out.decoder.input.leftCols(z));
  return out;
}

TrainedConditionedAe train_conditioned_ae(const ClipsByMachine& data, const ConditionedConfig& config,
                                          std::uint64_t seed) {
  config.validate();
  TrainedConditionedAe out;
  ConditionedAeModel& m = out.model;
  m.variant = config.variant;
  m.features = config.features;
  m.arch = config.arch;
  m.id_weight = config.id_weight;
  m.mismatch_prob = config.mismatch_prob;
  m.mismatch_weight = config.mismatch_weight;
  for (const auto& [key, clips] : data) {
    if (clips.empty()) throw DataError("no training clips for " + key.stem());
    if (m.id_index.empty()) m.machine_type = key.machine_type;
    if (key.machine_type != m.machine_type) {
      throw ConfigError("conditioned AE trains on one machine type; got '" + m.machine_type + "' and '" +
                        key.machine_type + "'");
    }
    m.id_index.push_back(key);
  }
  if (m.id_index.empty()) throw DataError("conditioned AE: no training data");
  if (m.id_index.size() == 1) {
    out.warnings.push_back("conditioned AE for '" + m.machine_type + "' has a single ID; conditioning is vacuous");
  }

  const FeatureExtractor fx(config.features);
  std::vector<Matrix> parts;
  std::vector<int> ids;
  for (std::size_t i = 0; i < m.id_index.size(); ++i) {
    parts.push_back(stack_frames(fx, data.at(m.id_index[i])));
    ids.insert(ids.end(), static_cast<std::size_t>(parts.back().rows()), static_cast<int>(i));
  }
  const int d = config.features.frame_dim();
  const int k = m.num_ids();
  Matrix frames(static_cast<Eigen::Index>(ids.size()), d);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    frames.middleRows(at, p.rows()) = p;
    at += p.rows();
  }

  const int out_dim = config.variant == ConditioningVariant::kConstantTarget ? d : d + k;
  m.decoder_conditioning = config.decoder_conditioning;
  const auto [dims, decoder_dims] = conditioned_layer_dims(d, k, config.variant, config.arch, m.decoder_conditioning);
  if (m.decoder_conditioning) {
    const std::vector<nn::Activation> relu(dims.size() - 1, nn::Activation::kRelu);
    m.network = nn::init_network(dims, relu, mix_seed(seed, 0xc0de));
    m.decoder = nn::init_network(decoder_dims, ae_activations(decoder_dims.size() - 1), mix_seed(seed, 0xdec0));
  } else {
    m.network = nn::init_network(dims, ae_activations(dims.size() - 1), mix_seed(seed, 0xc0de));
  }
  if (config.variant == ConditioningVariant::kConstantTarget) {
    m.constant_vector = config.constant == ConstantPolicy::kFeatureMean ? Vector(frames.colwise().mean().transpose())
                                                                        : Vector::Zero(d);
  }

  const double q = k > 1 ? config.mismatch_prob : 0.0;
  const double mismatch_w = config.mismatch_weight;
  const Vector c = m.constant_vector;

  nn::BatchBuilder build = [&](std::span<const Eigen::Index> rows, Rng& rng) {
    nn::Minibatch mb;
    const auto b = static_cast<Eigen::Index>(rows.size());
    mb.inputs = Matrix::Zero(b, d + k);
    mb.targets.resize(b, out_dim);
    mb.row_weights = Vector::Ones(b);
    for (Eigen::Index i = 0; i < b; ++i) {
      const Eigen::Index r = rows[static_cast<std::size_t>(i)];
      const int id = ids[static_cast<std::size_t>(r)];
      mb.inputs.row(i).head(d) = frames.row(r);
      if (config.variant == ConditioningVariant::kConstantTarget) {
        int used = id;
        if (q > 0.0 && rng.uniform() < q) {
          used = static_cast<int>(rng.below(static_cast<std::uint64_t>(k - 1)));
          if (used >= id) ++used;
          mb.targets.row(i) = c.transpose();
          mb.row_weights[i] = mismatch_w;
        } else {
          mb.targets.row(i) = frames.row(r);
        }
        mb.inputs(i, d + used) = 1.0;
      } else {
        mb.inputs(i, d + id) = 1.0;
        mb.targets.row(i) = mb.inputs.row(i);
      }
    }
    return mb;
  };

  nn::TrainConfig tc = config.train;
  tc.seed = mix_seed(seed, 0x7a17);
  nn::AdamState network_state = nn::AdamState::for_training(m.network, tc);
  nn::AdamState decoder_state = m.decoder_conditioning ? nn::AdamState::for_training(m.decoder, tc) : nn::AdamState{};
  auto step = [&](const nn::Minibatch& mb) {
    const ConditionedBackprop bp = conditioned_backprop(m, mb);
    if (std::isfinite(bp.loss)) {
      nn::adam_step(m.network, bp.network, network_state);
      if (m.decoder_conditioning) nn::adam_step(m.decoder, bp.decoder, decoder_state);
    }
    return bp.loss;
  };
  out.loss_history = nn::run_epochs(frames.rows(), build, step, tc).loss_history;
  return out;
}

nn::LossValue conditioned_loss(ConditioningVariant variant, const Matrix& pred, const Matrix& targets,
                               const Vector& row_weights, int num_ids, double id_weight) {
  if (pred.rows() != targets.rows() || pred.cols() != targets.cols() || row_weights.size() != pred.rows()) {
    throw DimensionError("conditioned_loss: prediction, target and weight shapes differ");
  }
  const double inv_b = 1.0 / static_cast<double>(pred.rows());
  Matrix diff = pred - targets;
  if (variant == ConditioningVariant::kIdRegression) {
    // Column weights: 1 on features, lambda on the ID block.
    diff.rightCols(num_ids) *= std::sqrt(id_weight);
  }
  const Vector sq = diff.rowwise().squaredNorm();
  nn::LossValue lv;
  lv.loss = sq.dot(row_weights) * inv_b;
  if (variant == ConditioningVariant::kIdRegression) diff.rightCols(num_ids) *= std::sqrt(id_weight);
  lv.grad = (2.0 * inv_b) * (row_weights.asDiagonal() * diff);
  return lv;
}

Vector conditioned_frame_errors(ConditioningVariant variant, const Matrix& frames, const Matrix& output, int id,
                                int num_ids, double id_weight) {
  const Eigen::Index d = frames.cols();
  if (output.rows() != frames.rows()) throw DimensionError("conditioned output row count mismatch");
  if (variant == ConditioningVariant::kConstantTarget) {
    if (output.cols() != d) throw DimensionError("constant-target output must have the feature dimension");
    return (output - frames).rowwise().squaredNorm();
  }
  if (output.cols() != d + num_ids) throw DimensionError("id-regression output must have feature + ID dimension");
  Matrix id_err = output.rightCols(num_ids);
  id_err.col(id).array() -= 1.0;
  return (output.leftCols(d) - frames).rowwise().squaredNorm() + id_weight * id_err.rowwise().squaredNorm();
}

Vector conditioned_frame_errors(const ConditionedAeModel& model, const Matrix& frames, int id) {
  const Matrix out = conditioned_forward(model, conditioned_inputs(frames, id, model.num_ids()));
  return conditioned_frame_errors(model.variant, frames, out, id, model.num_ids(), model.id_weight);
}

double conditioned_anomaly_score(const ConditionedAeModel& model, const Matrix& frames, int id) {
  if (frames.rows() == 0) throw DataError("conditioned_anomaly_score: no context frames");
  return conditioned_frame_errors(model, frames, id).mean();
}

double conditioned_anomaly_score(const ConditionedAeModel& model, const AudioClip& clip, const MachineKey& claimed) {
  const int id = model.id_of(claimed);
  const FeatureExtractor fx(model.features);
  return conditioned_anomaly_score(model, fx.frames(clip).vectors, id);
}

std::filesystem::path save_conditioned_ae(const ConditionedAeModel& m, const std::filesystem::path& dir,
                                          const std::string& run_config_hash) {
  detail::Json extra;
  extra["machine_type"] = m.machine_type;
  extra["variant"] = conditioning_variant_name(m.variant);
  detail::Json ids = detail::Json::array();
  for (const auto& k : m.id_index) ids.push_back(detail::key_json(k));
  extra["id_index"] = ids;
  extra["constant_vector"] = detail::vector_json(m.constant_vector);
  extra["id_weight"] = m.id_weight;
  extra["mismatch_prob"] = m.mismatch_prob;
  extra["mismatch_weight"] = m.mismatch_weight;
  extra["architecture"] = {{"hidden_units", m.arch.hidden_units},
                           {"bottleneck", m.arch.bottleneck},
                           {"layout", ae_layout_name(m.arch.layout)}};
  const std::string stem = "conditioned_" + m.machine_type;
  extra["decoder_conditioning"] = m.decoder_conditioning;
  if (m.decoder_conditioning) {
    const std::string decoder_file = stem + ".decoder.model";
    nn::save_checkpoint(dir / decoder_file, m.decoder, m.features.hash());
    extra["decoder_checkpoint"] = decoder_file;
  }
  return detail::save_model_files(dir, stem, "conditioned_ae", m.network, m.features, run_config_hash,
                                  std::move(extra));
}

ConditionedAeModel load_conditioned_ae(const std::filesystem::path& manifest) {
  auto loaded = detail::load_model_files(manifest, "conditioned_ae");
  ConditionedAeModel m;
  std::string decoder_file;
  try {
    const auto& j = loaded.manifest;
    m.machine_type = j.at("machine_type").get<std::string>();
    m.variant = parse_conditioning_variant(j.at("variant").get<std::string>());
    for (const auto& k : j.at("id_index")) m.id_index.push_back(detail::key_from_json(k));
    m.constant_vector = detail::vector_from_json(j.at("constant_vector"));
    m.id_weight = j.at("id_weight").get<double>();
    m.mismatch_prob = j.at("mismatch_prob").get<double>();
    m.mismatch_weight = j.at("mismatch_weight").get<double>();
    const auto& a = j.at("architecture");
    m.arch.hidden_units = a.at("hidden_units").get<int>();
    m.arch.bottleneck = a.at("bottleneck").get<int>();
    m.arch.layout = parse_ae_layout(a.at("layout").get<std::string>());
    m.decoder_conditioning = j.value("decoder_conditioning", false);
    if (m.decoder_conditioning) decoder_file = j.at("decoder_checkpoint").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(manifest.string() + ": malformed manifest: " + e.what());
  }
  m.features = loaded.features;
  m.network = std::move(loaded.network);
  if (m.decoder_conditioning) {
    const auto ck = nn::load_checkpoint(manifest.parent_path() / decoder_file);
    if (ck.config_hash != m.features.hash()) {
      throw ConfigError(manifest.string() + ": decoder was trained with a different feature configuration");
    }
    m.decoder = ck.network;
  }
  const auto [dims, decoder_dims] =
      conditioned_layer_dims(m.feature_dim(), m.num_ids(), m.variant, m.arch, m.decoder_conditioning);
  const std::set<MachineKey> unique(m.id_index.begin(), m.id_index.end());
  const std::vector<int> found_decoder = m.decoder_conditioning ? m.decoder.dims() : std::vector<int>{};
  if (unique.size() != m.id_index.size() || m.network.dims() != dims || found_decoder != decoder_dims ||
      (m.variant == ConditioningVariant::kConstantTarget && m.constant_vector.size() != m.feature_dim())) {
    throw DataError(manifest.string() + ": checkpoint shape does not match the recorded configuration");
  }
  return m;
}

}  // namespace asdkit
