#pragma once

#include <cmath>
#include <map>
#include <numbers>
#include <vector>

#include "asdkit/classifier_asd.hpp"
#include "asdkit/dataset.hpp"

namespace asdkit::testing {

/// Clips of every voice in `spec`, grouped by machine, straight from the
/// generator without touching the filesystem.
inline ClipsByMachine synth_clips(const SynthSpec& spec, Split split, Label label, int count) {
  ClipsByMachine out;
  for (const auto& v : spec.voices) {
    auto& clips = out[MachineKey{spec.machine_type, v.machine_id}];
    for (int i = 0; i < count; ++i) clips.push_back(synthesize_clip(spec, v, split, label, i));
  }
  return out;
}

/// Clips of the single voice with `machine_id`.
inline std::vector<AudioClip> voice_clips(const SynthSpec& spec, int machine_id, Split split, Label label, int count) {
  std::vector<AudioClip> clips;
  for (const auto& v : spec.voices) {
    if (v.machine_id != machine_id) continue;
    for (int i = 0; i < count; ++i) clips.push_back(synthesize_clip(spec, v, split, label, i));
  }
  return clips;
}

inline SynthSpec two_tone_spec(std::uint64_t seed = 1) {
  SynthSpec s;
  s.voices = {{0, {500.0, 3000.0}}, {1, {1000.0, 2500.0}}};
  s.clip_seconds = 1.0;
  s.seed = seed;
  return s;
}

inline AudioClip tone_clip(double hz, double seconds, double amplitude = 0.5) {
  AudioClip c;
  const auto n = static_cast<std::size_t>(seconds * c.sample_rate);
  for (std::size_t i = 0; i < n; ++i) {
    c.samples.push_back(amplitude * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / c.sample_rate));
  }
  c.source_name = "tone";
  return c;
}

}  // namespace asdkit::testing
