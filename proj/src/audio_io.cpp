#include "asdkit/audio_io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>

#include "asdkit/error.hpp"
#include "asdkit/util.hpp"

namespace asdkit {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t le16(const std::string& b, std::size_t at) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[at]) |
                                    (static_cast<unsigned char>(b[at + 1]) << 8));
}

std::uint32_t le32(const std::string& b, std::size_t at) {
  return static_cast<std::uint32_t>(le16(b, at)) |
         (static_cast<std::uint32_t>(le16(b, at + 2)) << 16);
}

void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

void put32(std::string& out, std::uint32_t v) {
  put16(out, static_cast<std::uint16_t>(v & 0xffff));
  put16(out, static_cast<std::uint16_t>(v >> 16));
}

struct FmtChunk {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t block_align = 0;
  std::uint16_t bits = 0;
};

FmtChunk parse_fmt(const std::string& b, std::size_t at, std::uint32_t size) {
  if (size < 16) throw ParseError("fmt chunk: size " + std::to_string(size) + " < 16");
  FmtChunk f;
  f.format = le16(b, at);
  f.channels = le16(b, at + 2);
  f.sample_rate = le32(b, at + 4);
  f.block_align = le16(b, at + 12);
  f.bits = le16(b, at + 14);
  if (f.format == kFormatExtensible) {
    if (size < 40) throw ParseError("fmt chunk: extensible header truncated");
    // First two bytes of the sub-format GUID carry the real format tag.
    f.format = le16(b, at + 24);
  }
  if (f.channels == 0) throw ParseError("fmt chunk: zero channels");
  if (f.sample_rate == 0) throw ParseError("fmt chunk: zero sample rate");
  return f;
}

}  // namespace

void validate_clip(const AudioClip& clip) {
  if (clip.sample_rate <= 0) throw ConfigError("clip '" + clip.source_name + "': non-positive sample rate");
  if (clip.samples.empty()) throw RangeError("clip '" + clip.source_name + "': no samples");
  for (std::size_t i = 0; i < clip.samples.size(); ++i) {
    const double s = clip.samples[i];
    if (!std::isfinite(s) || s < -1.0 || s > 1.0) {
      throw RangeError("clip '" + clip.source_name + "': sample " + std::to_string(i) +
                       " = " + std::to_string(s) + " outside [-1, 1]");
    }
  }
}

AudioClip decode_wav(const std::string& b, const WavReadOptions& opts,
                     const std::string& source_name) {
  if (b.size() < 12 || b.compare(0, 4, "RIFF") != 0) throw ParseError("RIFF chunk: missing 'RIFF' tag");
  if (b.compare(8, 4, "WAVE") != 0) throw ParseError("RIFF chunk: form type is not 'WAVE'");

  FmtChunk fmt;
  bool have_fmt = false;
  std::size_t data_at = 0;
  std::uint32_t data_size = 0;
  bool have_data = false;

  std::size_t pos = 12;
  while (pos + 8 <= b.size()) {
    const std::string id = b.substr(pos, 4);
    const std::uint32_t size = le32(b, pos + 4);
    const std::size_t body = pos + 8;
    if (id == "fmt ") {
      if (body + size > b.size()) throw ParseError("fmt chunk: truncated");
      fmt = parse_fmt(b, body, size);
      have_fmt = true;
    } else if (id == "data") {
      if (body + size > b.size()) throw ParseError("data chunk: declares " + std::to_string(size) + " bytes, file is truncated");
      data_at = body;
      data_size = size;
      have_data = true;
    }
    pos = body + size + (size & 1u);
  }
  if (!have_fmt) throw ParseError("fmt chunk: missing");
  if (!have_data) throw ParseError("data chunk: missing");

  const bool pcm16 = fmt.format == kFormatPcm && fmt.bits == 16;
  const bool float32 = fmt.format == kFormatFloat && fmt.bits == 32;
  if (!pcm16 && !float32) {
    throw UnsupportedFormatError("unsupported encoding: format tag " + std::to_string(fmt.format) +
                                 ", " + std::to_string(fmt.bits) + " bits");
  }
  const std::size_t bytes_per_sample = fmt.bits / 8;
  if (fmt.block_align != bytes_per_sample * fmt.channels) throw ParseError("fmt chunk: inconsistent block alignment");
  if (opts.channel < 0 || opts.channel >= fmt.channels) {
    throw ConfigError("channel " + std::to_string(opts.channel) + " requested, file has " +
                      std::to_string(fmt.channels));
  }
  if (opts.expected_sample_rate != 0 &&
      fmt.sample_rate != static_cast<std::uint32_t>(opts.expected_sample_rate)) {
    throw RateMismatchError("sample rate " + std::to_string(fmt.sample_rate) + " Hz, expected " +
                            std::to_string(opts.expected_sample_rate) + " Hz");
  }
  if (data_size % fmt.block_align != 0) throw ParseError("data chunk: size is not a whole number of frames");

  AudioClip clip;
  clip.sample_rate = static_cast<int>(fmt.sample_rate);
  clip.source_name = source_name;
  const std::size_t frames = data_size / fmt.block_align;
  clip.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    const std::size_t at = data_at + i * fmt.block_align + opts.channel * bytes_per_sample;
    if (pcm16) {
      clip.samples[i] = static_cast<std::int16_t>(le16(b, at)) / 32768.0;
    } else {
      const float v = std::bit_cast<float>(le32(b, at));
      if (!std::isfinite(v) || v < -1.0f || v > 1.0f) {
        throw RangeError("data chunk: float sample " + std::to_string(i) + " outside [-1, 1]");
      }
      clip.samples[i] = v;
    }
  }
  if (clip.samples.empty()) throw ParseError("data chunk: no sample frames");
  return clip;
}

std::string encode_wav(const AudioClip& clip) {
  validate_clip(clip);
  const auto n = static_cast<std::uint32_t>(clip.samples.size());
  std::string out;
  out.reserve(44 + 2 * static_cast<std::size_t>(n));
  out += "RIFF";
  put32(out, 36 + 2 * n);
  out += "WAVEfmt ";
  put32(out, 16);
  put16(out, kFormatPcm);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(clip.sample_rate));
  put32(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);
  put16(out, 2);
  put16(out, 16);
  out += "data";
  put32(out, 2 * n);
  for (double s : clip.samples) {
    long q = std::lround(s * 32768.0);
    if (q > 32767) q = 32767;
    if (q < -32768) q = -32768;
    put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  return out;
}

AudioClip read_wav(const std::filesystem::path& path, const WavReadOptions& opts) {
  return decode_wav(read_file(path), opts, path.filename().string());
}

void write_wav(const AudioClip& clip, const std::filesystem::path& path) {
  write_file_atomic(path, encode_wav(clip));
}

}  // namespace asdkit
