#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "asdkit/audio_io.hpp"
#include "asdkit/machine_key.hpp"

namespace asdkit {

enum class Split { kTrain, kTest };
enum class Label { kNormal, kAnomaly, kUnlabeled };

std::string split_name(Split s);
std::string label_name(Label l);

struct DatasetEntry {
  std::filesystem::path path;
  MachineKey key;
  Split split = Split::kTrain;
  Label label = Label::kNormal;
};

/// File layout: <root>/<machine_type>/{train,test}/<name>.wav with
///   <name> = normal_id_<NN>_<digits> | anomaly_id_<NN>_<digits> | id_<NN>_<digits>
/// The last form is an unlabeled (evaluation-style) file.
struct ParsedName {
  int machine_id = 0;
  Label label = Label::kUnlabeled;
};
std::optional<ParsedName> parse_clip_name(const std::string& filename);
std::string clip_name(Label label, int machine_id, int index);

class DatasetIndex {
 public:
  /// Rejects anomaly-labeled training entries and duplicate paths.
  void add(DatasetEntry entry);

  const std::vector<DatasetEntry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }

  std::vector<MachineKey> keys() const;
  std::vector<MachineKey> keys(Split split) const;
  std::vector<std::string> machine_types() const;
  std::vector<DatasetEntry> select(const MachineKey& key, Split split) const;
  std::size_t count(const MachineKey& key, Split split, Label label) const;

  /// Files that did not match the naming grammar; not fatal.
  std::vector<std::filesystem::path> rejects;
  std::vector<std::string> warnings;

 private:
  std::vector<DatasetEntry> entries_;
  std::set<std::filesystem::path> paths_;
};

/// Walks <root>/<type>/{train,test}/*.wav. Throws DataError if nothing usable
/// is found.
DatasetIndex scan_dataset(const std::filesystem::path& root);

/// Plain-text rejects report, one path per line.
std::string rejects_report(const DatasetIndex& index);

enum class AnomalyKind { kAddedHarmonic, kClicks, kLevelShift };
std::string anomaly_kind_name(AnomalyKind k);
AnomalyKind parse_anomaly_kind(const std::string& s);

struct ToneVoice {
  int machine_id = 0;
  std::vector<double> tones_hz;
};

/// Recipe for a deterministic synthetic corpus: each machine ID is a mixture of
/// its own tones plus white noise; anomalies alter that recipe.
struct SynthSpec {
  std::string machine_type = "synth";
  std::vector<ToneVoice> voices;
  double amplitude_min = 0.05;   // per-tone peak amplitude, drawn per clip
  double amplitude_max = 0.10;
  double frequency_jitter = 0.005;  // relative, drawn per clip and tone
  double snr_db = 20.0;
  AnomalyKind anomaly = AnomalyKind::kAddedHarmonic;
  double harmonic_multiple = 2.0;
  double harmonic_gain = 0.5;    // harmonic amplitude relative to its tone
  double click_rate_hz = 8.0;
  double click_amplitude = 0.5;
  double level_shift_db = 6.0;
  double clip_seconds = 2.0;
  int n_train = 20;
  int n_test_normal = 10;
  int n_test_anomaly = 10;
  std::uint64_t seed = 0;
  int sample_rate = kPipelineSampleRate;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Parses "key = value" lines ('#' comments). Voices are given as
/// "tones.<id> = f1, f2, ...". Unknown keys are rejected.
SynthSpec parse_synth_spec(const std::string& text);

/// One clip of the recipe; `index` distinguishes clips of the same kind.
AudioClip synthesize_clip(const SynthSpec& spec, const ToneVoice& voice, Split split, Label label,
                          int index);

/// Writes the corpus under `root` using the scan_dataset layout.
DatasetIndex generate_synth_corpus(const SynthSpec& spec, const std::filesystem::path& root);

/// Challenge submission file name, anomaly_score_<type>_id_<NN>.csv.
std::string submission_file_name(const MachineKey& key);
std::optional<MachineKey> parse_submission_file_name(const std::string& name);

/// Writes "filename,score" rows (6 significant digits) in filename order into
/// `dir`; returns the file path. The "filename,score" header line is optional
/// and read_submission skips it.
std::filesystem::path write_submission(const std::map<std::string, double>& scores,
                                       const MachineKey& key, const std::filesystem::path& dir,
                                       bool header = false);
std::vector<std::pair<std::string, double>> read_submission(const std::filesystem::path& path);

/// Ground-truth CSV: "machine_type,machine_id,filename,label" rows with label
/// normal|anomaly. No header is written; a leading header line is skipped when read.
std::string format_label_csv(const DatasetIndex& index);
std::map<MachineKey, std::map<std::string, Label>> parse_label_csv(const std::string& text);

}  // namespace asdkit
