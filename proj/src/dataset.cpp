#include "asdkit/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <regex>
#include <set>
#include <sstream>

#include "asdkit/error.hpp"
#include "asdkit/util.hpp"

namespace asdkit {
namespace fs = std::filesystem;

std::string MachineKey::stem() const {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%02d", machine_id);
  return machine_type + "_id_" + buf;
}

void MachineKey::validate() const {
  if (machine_type.empty()) throw ConfigError("machine type must be non-empty");
  if (machine_id < 0) throw ConfigError("machine id must be >= 0");
}

std::string display_machine_type(const std::string& t) {
  static const std::map<std::string, std::string> names = {
      {"ToyCar", "Toy-car"}, {"ToyConveyor", "Toy-conveyor"}, {"valve", "Valve"},
      {"pump", "Pump"},      {"fan", "Fan"},                  {"slider", "Slide rail"},
  };
  const auto it = names.find(t);
  return it == names.end() ? t : it->second;
}

std::string split_name(Split s) { return s == Split::kTrain ? "train" : "test"; }

std::string label_name(Label l) {
  switch (l) {
    case Label::kNormal: return "normal";
    case Label::kAnomaly: return "anomaly";
    case Label::kUnlabeled: return "unlabeled";
  }
  return "unlabeled";
}

std::optional<ParsedName> parse_clip_name(const std::string& filename) {
  static const std::regex grammar(R"(^(?:(normal|anomaly)_)?id_(\d+)_(\d+)\.wav$)");
  std::smatch m;
  if (!std::regex_match(filename, m, grammar)) return std::nullopt;
  ParsedName p;
  p.machine_id = std::stoi(m[2].str());
  if (!m[1].matched) {
    p.label = Label::kUnlabeled;
  } else {
    p.label = m[1].str() == "normal" ? Label::kNormal : Label::kAnomaly;
  }
  return p;
}

std::string clip_name(Label label, int machine_id, int index) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "id_%02d_%08d.wav", machine_id, index);
  if (label == Label::kUnlabeled) return buf;
  return label_name(label) + "_" + buf;
}

void DatasetIndex::add(DatasetEntry entry) {
  entry.key.validate();
  if (entry.split == Split::kTrain && entry.label == Label::kAnomaly) {
    throw DataError("training entry labeled anomaly: " + entry.path.string() +
                    " (training data must be normal only)");
  }
  if (!paths_.insert(entry.path).second) throw DataError("duplicate dataset path: " + entry.path.string());
  entries_.push_back(std::move(entry));
}

std::vector<MachineKey> DatasetIndex::keys() const {
  std::set<MachineKey> s;
  for (const auto& e : entries_) s.insert(e.key);
  return {s.begin(), s.end()};
}

std::vector<MachineKey> DatasetIndex::keys(Split split) const {
  std::set<MachineKey> s;
  for (const auto& e : entries_) {
    if (e.split == split) s.insert(e.key);
  }
  return {s.begin(), s.end()};
}

std::vector<std::string> DatasetIndex::machine_types() const {
  std::set<std::string> s;
  for (const auto& e : entries_) s.insert(e.key.machine_type);
  return {s.begin(), s.end()};
}

std::vector<DatasetEntry> DatasetIndex::select(const MachineKey& key, Split split) const {
  std::vector<DatasetEntry> out;
  for (const auto& e : entries_) {
    if (e.key == key && e.split == split) out.push_back(e);
  }
  return out;
}

std::size_t DatasetIndex::count(const MachineKey& key, Split split, Label label) const {
  return static_cast<std::size_t>(std::count_if(entries_.begin(), entries_.end(), [&](const DatasetEntry& e) {
    return e.key == key && e.split == split && e.label == label;
  }));
}

DatasetIndex scan_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) throw IoError("dataset root is not a directory: " + root.string());
  DatasetIndex index;
  std::vector<fs::path> types;
  for (const auto& d : fs::directory_iterator(root)) {
    if (d.is_directory()) types.push_back(d.path());
  }
  std::sort(types.begin(), types.end());
  for (const auto& type_dir : types) {
    for (Split split : {Split::kTrain, Split::kTest}) {
      const fs::path dir = type_dir / split_name(split);
      if (!fs::is_directory(dir)) continue;
      std::vector<fs::path> files;
      for (const auto& f : fs::directory_iterator(dir)) {
        if (f.is_regular_file() && f.path().extension() == ".wav") files.push_back(f.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& f : files) {
        const auto parsed = parse_clip_name(f.filename().string());
        if (!parsed || (split == Split::kTrain && parsed->label == Label::kAnomaly)) {
          index.rejects.push_back(f);
          continue;
        }
        index.add({f, {type_dir.filename().string(), parsed->machine_id}, split, parsed->label});
      }
    }
  }
  if (index.empty()) throw DataError("no dataset files found under " + root.string());
  return index;
}

std::string rejects_report(const DatasetIndex& index) {
  std::string out;
  for (const auto& p : index.rejects) out += p.string() + "\n";
  return out;
}

std::string anomaly_kind_name(AnomalyKind k) {
  switch (k) {
    case AnomalyKind::kAddedHarmonic: return "added_harmonic";
    case AnomalyKind::kClicks: return "clicks";
    case AnomalyKind::kLevelShift: return "level_shift";
  }
  return "added_harmonic";
}

AnomalyKind parse_anomaly_kind(const std::string& s) {
  if (s == "added_harmonic") return AnomalyKind::kAddedHarmonic;
  if (s == "clicks") return AnomalyKind::kClicks;
  if (s == "level_shift") return AnomalyKind::kLevelShift;
  throw ConfigError("anomaly: unknown kind '" + s + "' (added_harmonic, clicks, level_shift)");
}

void SynthSpec::validate() const {
  if (machine_type.empty() || machine_type.find('/') != std::string::npos) {
    throw ConfigError("machine_type: must be a non-empty directory name");
  }
  if (sample_rate <= 0) throw ConfigError("sample_rate: must be positive");
  const double nyquist = sample_rate / 2.0;
  std::set<int> ids;
  for (const auto& v : voices) {
    if (v.machine_id < 0) throw ConfigError("tones." + std::to_string(v.machine_id) + ": negative machine id");
    if (!ids.insert(v.machine_id).second) throw ConfigError("tones." + std::to_string(v.machine_id) + ": duplicate id");
    if (v.tones_hz.empty()) throw ConfigError("tones." + std::to_string(v.machine_id) + ": no tones");
    for (double f : v.tones_hz) {
      const double top = f * (1.0 + frequency_jitter) *
                         (anomaly == AnomalyKind::kAddedHarmonic ? std::max(1.0, harmonic_multiple) : 1.0);
      if (!(f > 0.0) || top >= nyquist) {
        throw ConfigError("tones." + std::to_string(v.machine_id) + ": tone " + std::to_string(f) +
                          " Hz (or its anomaly harmonic) is not below the Nyquist frequency " +
                          std::to_string(nyquist) + " Hz");
      }
    }
  }
  if (!(amplitude_min > 0.0 && amplitude_min <= amplitude_max && amplitude_max <= 1.0)) {
    throw ConfigError("amplitude_min/amplitude_max: need 0 < min <= max <= 1");
  }
  if (!(frequency_jitter >= 0.0 && frequency_jitter < 0.5)) throw ConfigError("frequency_jitter: must be in [0, 0.5)");
  if (!std::isfinite(snr_db)) throw ConfigError("snr_db: must be finite");
  if (!(harmonic_multiple > 0.0)) throw ConfigError("harmonic_multiple: must be positive");
  if (!(harmonic_gain >= 0.0)) throw ConfigError("harmonic_gain: must be >= 0");
  if (!(click_rate_hz >= 0.0)) throw ConfigError("click_rate_hz: must be >= 0");
  if (!(click_amplitude >= 0.0 && click_amplitude <= 1.0)) throw ConfigError("click_amplitude: must be in [0, 1]");
  if (!std::isfinite(level_shift_db)) throw ConfigError("level_shift_db: must be finite");
  if (!(clip_seconds > 0.0)) throw ConfigError("clip_seconds: must be positive");
  if (n_train < 0 || n_test_normal < 0 || n_test_anomaly < 0) throw ConfigError("clip counts must be >= 0");
}

SynthSpec parse_synth_spec(const std::string& text) {
  SynthSpec s;
  for (const auto& [key, value] : parse_key_values(text)) {
    if (key.rfind("tones.", 0) == 0) {
      ToneVoice v;
      v.machine_id = static_cast<int>(parse_int(key, key.substr(6)));
      for (const auto& f : split(value, ',')) v.tones_hz.push_back(parse_double(key, f));
      s.voices.push_back(std::move(v));
    } else if (key == "machine_type") {
      s.machine_type = value;
    } else if (key == "amplitude_min") {
      s.amplitude_min = parse_double(key, value);
    } else if (key == "amplitude_max") {
      s.amplitude_max = parse_double(key, value);
    } else if (key == "frequency_jitter") {
      s.frequency_jitter = parse_double(key, value);
    } else if (key == "snr_db") {
      s.snr_db = parse_double(key, value);
    } else if (key == "anomaly") {
      s.anomaly = parse_anomaly_kind(value);
    } else if (key == "harmonic_multiple") {
      s.harmonic_multiple = parse_double(key, value);
    } else if (key == "harmonic_gain") {
      s.harmonic_gain = parse_double(key, value);
    } else if (key == "click_rate_hz") {
      s.click_rate_hz = parse_double(key, value);
    } else if (key == "click_amplitude") {
      s.click_amplitude = parse_double(key, value);
    } else if (key == "level_shift_db") {
      s.level_shift_db = parse_double(key, value);
    } else if (key == "clip_seconds") {
      s.clip_seconds = parse_double(key, value);
    } else if (key == "n_train") {
      s.n_train = static_cast<int>(parse_int(key, value));
    } else if (key == "n_test_normal") {
      s.n_test_normal = static_cast<int>(parse_int(key, value));
    } else if (key == "n_test_anomaly") {
      s.n_test_anomaly = static_cast<int>(parse_int(key, value));
    } else if (key == "seed") {
      s.seed = static_cast<std::uint64_t>(parse_int(key, value));
    } else if (key == "sample_rate") {
      s.sample_rate = static_cast<int>(parse_int(key, value));
    } else {
      throw ConfigError("unknown synth spec key '" + key + "'");
    }
  }
  std::sort(s.voices.begin(), s.voices.end(),
            [](const ToneVoice& a, const ToneVoice& b) { return a.machine_id < b.machine_id; });
  s.validate();
  return s;
}

AudioClip synthesize_clip(const SynthSpec& spec, const ToneVoice& voice, Split split, Label label,
                          int index) {
  const std::uint64_t stream =
      fnv1a64(spec.machine_type + "|" + std::to_string(voice.machine_id) + "|" + split_name(split) + "|" +
              label_name(label) + "|" + std::to_string(index));
  Rng rng(mix_seed(spec.seed, stream));
  const auto n = static_cast<std::size_t>(std::llround(spec.clip_seconds * spec.sample_rate));
  const double two_pi = 2.0 * std::numbers::pi;
  const double sr = spec.sample_rate;
  const bool anomalous = label == Label::kAnomaly;

  std::vector<double> machine(n, 0.0);
  double expected_power = 0.0;
  for (double f0 : voice.tones_hz) {
    const double f = f0 * (1.0 + spec.frequency_jitter * rng.uniform(-1.0, 1.0));
    const double amp = rng.uniform(spec.amplitude_min, spec.amplitude_max);
    const double phase = rng.uniform(0.0, two_pi);
    expected_power += 0.5 * amp * amp;
    for (std::size_t i = 0; i < n; ++i) machine[i] += amp * std::sin(two_pi * f * i / sr + phase);
    if (anomalous && spec.anomaly == AnomalyKind::kAddedHarmonic) {
      const double h_amp = spec.harmonic_gain * amp;
      const double h_phase = rng.uniform(0.0, two_pi);
      for (std::size_t i = 0; i < n; ++i) {
        machine[i] += h_amp * std::sin(two_pi * spec.harmonic_multiple * f * i / sr + h_phase);
      }
    }
  }
  if (anomalous && spec.anomaly == AnomalyKind::kLevelShift) {
    const double gain = std::pow(10.0, spec.level_shift_db / 20.0);
    for (double& s : machine) s *= gain;
  }

  // Noise level follows the normal recipe so anomalies never change it.
  const double noise_sd = std::sqrt(expected_power / std::pow(10.0, spec.snr_db / 10.0));
  AudioClip clip;
  clip.sample_rate = spec.sample_rate;
  clip.source_name = clip_name(label, voice.machine_id, index);
  clip.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) clip.samples[i] = machine[i] + noise_sd * rng.normal();

  if (anomalous && spec.anomaly == AnomalyKind::kClicks) {
    const auto decay = static_cast<std::size_t>(0.002 * sr);
    const auto count = static_cast<std::size_t>(std::max(1.0, std::round(spec.click_rate_hz * spec.clip_seconds)));
    for (std::size_t c = 0; c < count; ++c) {
      const std::size_t at = rng.below(n);
      for (std::size_t k = 0; k < 4 * decay && at + k < n; ++k) {
        clip.samples[at + k] += spec.click_amplitude * std::exp(-static_cast<double>(k) / decay) * rng.uniform(-1.0, 1.0);
      }
    }
  }
  for (double& s : clip.samples) s = std::clamp(s, -1.0, 1.0);
  return clip;
}

DatasetIndex generate_synth_corpus(const SynthSpec& spec, const fs::path& root) {
  spec.validate();
  DatasetIndex index;
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec || !fs::is_directory(root)) throw IoError("cannot create corpus root: " + root.string());

  struct Batch {
    Split split;
    Label label;
    int count;
  };
  const Batch batches[] = {{Split::kTrain, Label::kNormal, spec.n_train},
                           {Split::kTest, Label::kNormal, spec.n_test_normal},
                           {Split::kTest, Label::kAnomaly, spec.n_test_anomaly}};
  for (const auto& voice : spec.voices) {
    for (const auto& b : batches) {
      const fs::path dir = root / spec.machine_type / split_name(b.split);
      for (int i = 0; i < b.count; ++i) {
        const AudioClip clip = synthesize_clip(spec, voice, b.split, b.label, i);
        const fs::path path = dir / clip.source_name;
        write_wav(clip, path);
        index.add({path, {spec.machine_type, voice.machine_id}, b.split, b.label});
      }
    }
  }
  if (index.empty()) index.warnings.push_back("synthetic corpus request produced no clips");
  return index;
}

std::string submission_file_name(const MachineKey& key) { return "anomaly_score_" + key.stem() + ".csv"; }

std::optional<MachineKey> parse_submission_file_name(const std::string& name) {
  static const std::regex grammar(R"(^anomaly_score_(.+)_id_(\d+)\.csv$)");
  std::smatch m;
  if (!std::regex_match(name, m, grammar)) return std::nullopt;
  return MachineKey{m[1].str(), std::stoi(m[2].str())};
}

fs::path write_submission(const std::map<std::string, double>& scores, const MachineKey& key,
                          const fs::path& dir, bool header) {
  if (scores.empty()) throw DataError("write_submission: no scores for " + key.stem());
  std::string out = header ? "filename,score\n" : "";
  char buf[64];
  for (const auto& [name, score] : scores) {
    if (name.find(',') != std::string::npos) throw DataError("write_submission: comma in file name " + name);
    std::snprintf(buf, sizeof(buf), "%.6g", score);
    out += name + "," + buf + "\n";
  }
  const fs::path path = dir / submission_file_name(key);
  write_file_atomic(path, out);
  return path;
}

std::vector<std::pair<std::string, double>> read_submission(const fs::path& path) {
  std::vector<std::pair<std::string, double>> rows;
  const std::string text = read_file(path);
  std::size_t line_no = 0;
  for (const auto& line : split(text, '\n')) {
    ++line_no;
    if (line.empty() || (line_no == 1 && line == "filename,score")) continue;
    const auto cells = split(line, ',');
    if (cells.size() != 2) {
      throw DataError(path.filename().string() + " line " + std::to_string(line_no) + ": expected 'filename,score'");
    }
    try {
      rows.emplace_back(cells[0], parse_double("score", cells[1]));
    } catch (const ConfigError& e) {
      throw DataError(path.filename().string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

std::string format_label_csv(const DatasetIndex& index) {
  std::string out;
  for (const auto& e : index.entries()) {
    if (e.split != Split::kTest || e.label == Label::kUnlabeled) continue;
    out += e.key.machine_type + "," + std::to_string(e.key.machine_id) + "," + e.path.filename().string() + "," +
           label_name(e.label) + "\n";
  }
  return out;
}

std::map<MachineKey, std::map<std::string, Label>> parse_label_csv(const std::string& text) {
  std::map<MachineKey, std::map<std::string, Label>> out;
  std::size_t line_no = 0;
  for (const auto& line : split(text, '\n')) {
    ++line_no;
    if (line.empty() || (line_no == 1 && line == "machine_type,machine_id,filename,label")) continue;
    const auto cells = split(line, ',');
    const std::string where = "label CSV line " + std::to_string(line_no);
    if (cells.size() != 4) throw DataError(where + ": expected 'machine_type,machine_id,filename,label'");
    Label label;
    if (cells[3] == "normal" || cells[3] == "0") {
      label = Label::kNormal;
    } else if (cells[3] == "anomaly" || cells[3] == "1") {
      label = Label::kAnomaly;
    } else {
      throw DataError(where + ": unknown label '" + cells[3] + "'");
    }
    MachineKey key{cells[0], 0};
    try {
      key.machine_id = static_cast<int>(parse_int("machine_id", cells[1]));
    } catch (const ConfigError& e) {
      throw DataError(where + ": " + e.what());
    }
    if (!out[key].emplace(cells[2], label).second) throw DataError(where + ": duplicate file " + cells[2]);
  }
  return out;
}

}  // namespace asdkit
