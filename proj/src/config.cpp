#include "asdkit/config.hpp"

#include <sstream>

#include "asdkit/error.hpp"
#include "asdkit/util.hpp"

namespace asdkit {
namespace {

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string join_strings(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
  return s;
}

int to_int(const std::string& key, const std::string& value) {
  const long long v = parse_int(key, value);
  if (v < -2147483647LL || v > 2147483647LL) throw ConfigError(key + ": out of range");
  return static_cast<int>(v);
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::kBaselineAe: return "baseline_ae";
    case Method::kClassifier: return "classifier";
    case Method::kConditionedAe: return "conditioned_ae";
  }
  return "baseline_ae";
}

Method parse_method(const std::string& s) {
  if (s == "baseline_ae") return Method::kBaselineAe;
  if (s == "classifier") return Method::kClassifier;
  if (s == "conditioned_ae") return Method::kConditionedAe;
  throw ConfigError("method: unknown '" + s + "' (baseline_ae, classifier, conditioned_ae)");
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "frame_length") features.stft.frame_length = to_int(key, value);
  else if (key == "hop_length") features.stft.hop_length = to_int(key, value);
  else if (key == "window") features.stft.window = parse_window(value);
  else if (key == "n_mels") features.n_mels = to_int(key, value);
  else if (key == "f_min") features.f_min = parse_double(key, value);
  else if (key == "f_max") features.f_max = parse_double(key, value);
  else if (key == "context") features.context = to_int(key, value);
  else if (key == "epochs") train.epochs = to_int(key, value);
  else if (key == "batch_size") train.batch_size = to_int(key, value);
  else if (key == "learning_rate") train.learning_rate = parse_double(key, value);
  else if (key == "seed") train.seed = static_cast<std::uint64_t>(parse_int(key, value));
  else if (key == "method") method = parse_method(value);
  else if (key == "ae_layout") arch.layout = parse_ae_layout(value);
  else if (key == "hidden_units") arch.hidden_units = to_int(key, value);
  else if (key == "bottleneck") arch.bottleneck = to_int(key, value);
  else if (key == "classifier_mode") classifier_mode = parse_classifier_mode(value);
  else if (key == "classifier_hidden") {
    classifier_hidden.clear();
    for (const auto& part : split(value, ',')) classifier_hidden.push_back(to_int(key, part));
  } else if (key == "variant") variant = parse_conditioning_variant(value);
  else if (key == "mismatch_prob") mismatch_prob = parse_double(key, value);
  else if (key == "mismatch_weight") mismatch_weight = parse_double(key, value);
  else if (key == "id_weight") id_weight = parse_double(key, value);
  else if (key == "decoder_conditioning") decoder_conditioning = parse_bool(key, value);
  else if (key == "constant_policy") constant_policy = parse_constant_policy(value);
  else if (key == "machine_types") {
    machine_types.clear();
    for (const auto& part : split(value, ',')) {
      if (!part.empty()) machine_types.push_back(part);
    }
  } else if (key == "threads") threads = to_int(key, value);
  else throw ConfigError("unknown config key '" + key + "'");
}

void RunConfig::validate() const {
  features.validate();
  train.validate();
  if (arch.hidden_units < 1 || arch.bottleneck < 1) throw ConfigError("hidden_units/bottleneck must be >= 1");
  for (int h : classifier_hidden) {
    if (h < 1) throw ConfigError("classifier_hidden: widths must be >= 1");
  }
  conditioned().validate();
  if (threads < 1 || threads > 256) throw ConfigError("threads must be in [1, 256]");
}

std::string RunConfig::canonical() const {
  std::ostringstream os;
  os.precision(17);
  os << "frame_length = " << features.stft.frame_length << "\n"
     << "hop_length = " << features.stft.hop_length << "\n"
     << "window = " << window_name(features.stft.window) << "\n"
     << "n_mels = " << features.n_mels << "\n"
     << "f_min = " << features.f_min << "\n"
     << "f_max = " << features.f_max << "\n"
     << "context = " << features.context << "\n"
     << "epochs = " << train.epochs << "\n"
     << "batch_size = " << train.batch_size << "\n"
     << "learning_rate = " << train.learning_rate << "\n"
     << "seed = " << train.seed << "\n"
     << "method = " << method_name(method) << "\n"
     << "ae_layout = " << ae_layout_name(arch.layout) << "\n"
     << "hidden_units = " << arch.hidden_units << "\n"
     << "bottleneck = " << arch.bottleneck << "\n"
     << "classifier_mode = " << classifier_mode_name(classifier_mode) << "\n"
     << "classifier_hidden = " << join_ints(classifier_hidden) << "\n"
     << "variant = " << conditioning_variant_name(variant) << "\n"
     << "mismatch_prob = " << mismatch_prob << "\n"
     << "mismatch_weight = " << mismatch_weight << "\n"
     << "id_weight = " << id_weight << "\n"
     << "constant_policy = " << constant_policy_name(constant_policy) << "\n"
     << "decoder_conditioning = " << (decoder_conditioning ? "true" : "false") << "\n"
     << "machine_types = " << join_strings(machine_types) << "\n";
  // threads does not affect results and is left out.
  return os.str();
}

std::uint64_t RunConfig::hash() const { return fnv1a64(canonical()); }

BaselineConfig RunConfig::baseline() const { return {features, arch, train}; }

ClassifierConfig RunConfig::classifier() const { return {features, classifier_hidden, train}; }

ConditionedConfig RunConfig::conditioned() const {
  ConditionedConfig c;
  c.features = features;
  c.arch = arch;
  c.train = train;
  c.variant = variant;
  c.mismatch_prob = mismatch_prob;
  c.mismatch_weight = mismatch_weight;
  c.id_weight = id_weight;
  c.constant = constant_policy;
  c.decoder_conditioning = decoder_conditioning;
  return c;
}

RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  for (const auto& [k, v] : parse_key_values(text)) cfg.set(k, v);
  cfg.validate();
  return cfg;
}

}  // namespace asdkit
