#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <Eigen/Dense>

#include "asdkit/audio_io.hpp"

namespace asdkit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Window { kHann, kRectangular };

std::string window_name(Window w);
Window parse_window(const std::string& name);

struct StftConfig {
  int frame_length = 1024;  // also the FFT size
  int hop_length = 512;
  Window window = Window::kHann;

  int fft_size() const { return frame_length; }
  int n_bins() const { return frame_length / 2 + 1; }
  void validate() const;
};

/// Periodic taper of length `n` (Hann: 0.5 - 0.5 cos(2 pi i / n)).
Vector make_window(Window w, int n);

/// Power spectrogram, (fft_size/2 + 1) x T with
/// T = 1 + floor((L - frame_length) / hop_length). Frames are not padded.
Matrix stft_power(const AudioClip& clip, const StftConfig& cfg);

/// HTK mel scale.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

struct MelFilterbank {
  Matrix weights;  // n_mels x n_bins, nonnegative, unit peak
  Vector center_hz;
  double f_min = 0.0;
  double f_max = 0.0;
  int sample_rate = 0;

  int n_mels() const { return static_cast<int>(weights.rows()); }
};

/// Triangular filters whose edges and centers are equally spaced on the mel
/// scale between f_min and f_max. Throws ConfigError when a filter would
/// cover no FFT bin.
MelFilterbank mel_filterbank(int n_mels, const StftConfig& cfg, int sample_rate, double f_min,
                             double f_max);

inline constexpr double kLogMelFloor = 1e-10;

/// F x T log-mel energies, 10 log10(max(W P, 1e-10)).
struct FeatureMatrix {
  Matrix values;
  int n_mels() const { return static_cast<int>(values.rows()); }
  int n_frames() const { return static_cast<int>(values.cols()); }
};

FeatureMatrix log_mel(const Matrix& power, const MelFilterbank& fb);

/// Context-stacked frame vectors. Row r is (X_r, X_{r+1}, ..., X_{r+2P}),
/// i.e. the frame centered on source column r + P, with no edge padding.
struct ContextFrames {
  Matrix vectors;  // (T - 2P) x F(2P + 1)
  int context = 0;
  int n_mels = 0;
  /// Set when T <= 2P; `vectors` then has zero rows.
  bool too_short = false;

  Eigen::Index rows() const { return vectors.rows(); }
  int dim() const { return n_mels * (2 * context + 1); }
};

ContextFrames frame_context(const FeatureMatrix& x, int context);

/// Everything needed to turn a clip into model input rows.
struct FeatureConfig {
  StftConfig stft;
  int n_mels = 64;
  double f_min = 0.0;
  double f_max = 8000.0;
  int context = 2;
  int sample_rate = kPipelineSampleRate;

  int frame_dim() const { return n_mels * (2 * context + 1); }
  void validate() const;
  /// Canonical text form; the hash below is computed over it.
  std::string canonical() const;
  std::uint64_t hash() const;
};

/// Feature extractor bound to one configuration; builds the filterbank once.
/// Immutable after construction, so one instance can serve many threads.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(FeatureConfig cfg);

  const FeatureConfig& config() const { return cfg_; }
  const MelFilterbank& filterbank() const { return fb_; }

  FeatureMatrix log_mel(const AudioClip& clip) const;
  /// Throws DataError naming the clip when it yields no context frame.
  ContextFrames frames(const AudioClip& clip) const;

 private:
  FeatureConfig cfg_;
  MelFilterbank fb_;
};

/// Feature cache file: "ASDFEAT1", then little-endian u32 F, u32 T, u32 P,
/// u64 config hash, then F*T float64 values in column-major (frame) order.
void write_feature_cache(const std::filesystem::path& path, const FeatureMatrix& x, int context,
                         std::uint64_t config_hash);

struct FeatureCache {
  FeatureMatrix features;
  int context = 0;
  std::uint64_t config_hash = 0;
};

FeatureCache read_feature_cache(const std::filesystem::path& path);

}  // namespace asdkit
