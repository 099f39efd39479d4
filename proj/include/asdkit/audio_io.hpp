#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace asdkit {

inline constexpr int kPipelineSampleRate = 16000;

/// Mono waveform with amplitudes in [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = kPipelineSampleRate;
  std::string source_name;

  double duration_seconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

/// Throws RangeError / ConfigError when the clip breaks an AudioClip invariant:
/// non-empty, finite samples in [-1, 1], positive sample rate.
void validate_clip(const AudioClip& clip);

struct WavReadOptions {
  int channel = 0;
  /// Required rate; 0 accepts whatever the header says.
  int expected_sample_rate = kPipelineSampleRate;
};

/// Reads a RIFF/WAVE file holding 16-bit integer PCM or 32-bit IEEE float.
///
/// Integer samples map to [-1, 1) by division by 32768, so -32768 becomes
/// exactly -1.0 and +32767 becomes 32767/32768. The selected channel of a
/// multichannel file is returned; the sample count is never altered.
AudioClip read_wav(const std::filesystem::path& path, const WavReadOptions& opts = {});

/// Writes a mono 16-bit PCM file. Samples are scaled by 32768, rounded, and
/// saturated at 32767, so 1.0 is stored as 32767.
void write_wav(const AudioClip& clip, const std::filesystem::path& path);

/// In-memory variants of the above, used by the file functions and tests.
AudioClip decode_wav(const std::string& bytes, const WavReadOptions& opts = {},
                     const std::string& source_name = {});
std::string encode_wav(const AudioClip& clip);

}  // namespace asdkit
