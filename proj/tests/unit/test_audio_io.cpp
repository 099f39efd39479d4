#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "doctest.h"
#include "temp_dir.hpp"

#include "asdkit/audio_io.hpp"
#include "asdkit/error.hpp"
#include "asdkit/util.hpp"

using namespace asdkit;

namespace {

void put16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>(v >> 8));
}

void put32(std::string& s, std::uint32_t v) {
  put16(s, static_cast<std::uint16_t>(v & 0xffff));
  put16(s, static_cast<std::uint16_t>(v >> 16));
}

/// Hand-assembled RIFF/WAVE bytes, independent of encode_wav.
std::string wav_bytes(std::uint16_t format, std::uint16_t channels, std::uint32_t rate, std::uint16_t bits,
                      const std::string& payload, bool extensible = false) {
  std::string fmt;
  put16(fmt, extensible ? 0xFFFE : format);
  put16(fmt, channels);
  put32(fmt, rate);
  put32(fmt, rate * channels * bits / 8);
  put16(fmt, static_cast<std::uint16_t>(channels * bits / 8));
  put16(fmt, bits);
  if (extensible) {
    put16(fmt, 22);
    put16(fmt, bits);
    put32(fmt, 0);
    put16(fmt, format);
    fmt += std::string("\x00\x00\x00\x00\x10\x00\x80\x00\x00\xAA\x00\x38\x9B\x71", 14);
  }
  std::string body = "WAVE";
  body += "fmt ";
  put32(body, static_cast<std::uint32_t>(fmt.size()));
  body += fmt;
  body += "data";
  put32(body, static_cast<std::uint32_t>(payload.size()));
  body += payload;
  std::string out = "RIFF";
  put32(out, static_cast<std::uint32_t>(body.size()));
  return out + body;
}

std::string pcm16(const std::vector<std::int16_t>& v) {
  std::string s;
  for (auto x : v) put16(s, static_cast<std::uint16_t>(x));
  return s;
}

std::string f32(const std::vector<float>& v) {
  std::string s;
  for (float x : v) {
    std::uint32_t u;
    std::memcpy(&u, &x, 4);
    put32(s, u);
  }
  return s;
}

AudioClip seeded_clip(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  AudioClip c;
  for (std::size_t i = 0; i < n; ++i) c.samples.push_back(rng.uniform(-1.0, 1.0));
  return c;
}

}  // namespace

TEST_SUITE("audio_io") {
  TEST_CASE("pcm16 sample 16384 reads as 0.5") {
    const auto clip = decode_wav(wav_bytes(1, 1, 16000, 16, pcm16({16384})));
    REQUIRE(clip.samples.size() == 1);
    CHECK(clip.samples[0] == 0.5);
    CHECK(clip.sample_rate == 16000);
  }

  TEST_CASE("160000 samples at 16 kHz last ten seconds") {
    const auto clip = decode_wav(wav_bytes(1, 1, 16000, 16, pcm16(std::vector<std::int16_t>(160000, 7))));
    CHECK(clip.samples.size() == 160000);
    CHECK(clip.duration_seconds() == 10.0);
  }

  TEST_CASE("integer extremes map asymmetrically") {
    const auto clip = decode_wav(wav_bytes(1, 1, 16000, 16, pcm16({-32768, 32767, 0})));
    CHECK(clip.samples[0] == -1.0);
    CHECK(clip.samples[1] == 32767.0 / 32768.0);
    CHECK(clip.samples[2] == 0.0);
  }

  TEST_CASE("float32 files are read as is") {
    const auto clip = decode_wav(wav_bytes(3, 1, 16000, 32, f32({0.25f, -0.75f})));
    CHECK(clip.samples == std::vector<double>{0.25, -0.75});
    CHECK_THROWS_AS(decode_wav(wav_bytes(3, 1, 16000, 32, f32({1.5f}))), RangeError);
  }

  TEST_CASE("extensible headers resolve the sub-format") {
    const auto a = decode_wav(wav_bytes(1, 1, 16000, 16, pcm16({8192}), true));
    CHECK(a.samples[0] == 0.25);
    const auto b = decode_wav(wav_bytes(3, 1, 16000, 32, f32({0.5f}), true));
    CHECK(b.samples[0] == 0.5);
  }

  TEST_CASE("channel selection returns exactly that channel") {
    const std::string bytes = wav_bytes(1, 2, 16000, 16, pcm16({100, -200, 300, -400, 500, -600}));
    WavReadOptions opts;
    const auto left = decode_wav(bytes, opts);
    CHECK(left.samples == std::vector<double>{100 / 32768.0, 300 / 32768.0, 500 / 32768.0});
    opts.channel = 1;
    const auto right = decode_wav(bytes, opts);
    CHECK(right.samples == std::vector<double>{-200 / 32768.0, -400 / 32768.0, -600 / 32768.0});
    opts.channel = 2;
    CHECK_THROWS_AS(decode_wav(bytes, opts), ConfigError);
  }

  TEST_CASE("other sample rates are rejected unless allowed") {
    const std::string bytes = wav_bytes(1, 1, 44100, 16, pcm16({1, 2}));
    CHECK_THROWS_AS(decode_wav(bytes), RateMismatchError);
    WavReadOptions any;
    any.expected_sample_rate = 0;
    CHECK(decode_wav(bytes, any).sample_rate == 44100);
  }

  TEST_CASE("unsupported encodings are reported as such") {
    CHECK_THROWS_AS(decode_wav(wav_bytes(1, 1, 16000, 24, std::string(6, '\0'))), UnsupportedFormatError);
    CHECK_THROWS_AS(decode_wav(wav_bytes(6, 1, 16000, 8, std::string(4, '\0'))), UnsupportedFormatError);
  }

  TEST_CASE("malformed containers name the chunk") {
    CHECK_THROWS_WITH_AS(decode_wav("RIFX1234WAVE"), doctest::Contains("RIFF"), ParseError);
    std::string bytes = wav_bytes(1, 1, 16000, 16, pcm16({1, 2, 3}));
    CHECK_THROWS_WITH_AS(decode_wav(bytes.substr(0, bytes.size() - 2)), doctest::Contains("data"), ParseError);
    std::string no_fmt = "RIFF";
    put32(no_fmt, 12);
    no_fmt += "WAVEdata";
    put32(no_fmt, 0);
    CHECK_THROWS_WITH_AS(decode_wav(no_fmt), doctest::Contains("fmt"), ParseError);
  }

  TEST_CASE("encoding stores one as 32767 and zero as zero") {
    AudioClip c;
    c.samples = {1.0, -1.0, 0.0};
    const auto back = decode_wav(encode_wav(c));
    CHECK(back.samples[0] == 32767.0 / 32768.0);
    CHECK(back.samples[1] == -1.0);
    CHECK(back.samples[2] == 0.0);
  }

  TEST_CASE("a silent second is 16000 zero frames") {
    testing::TempDir dir("wav");
    AudioClip c;
    c.samples.assign(16000, 0.0);
    write_wav(c, dir / "zero.wav");
    const std::string bytes = read_file(dir / "zero.wav");
    CHECK(bytes.size() == 44 + 32000);
    CHECK(bytes.substr(44) == std::string(32000, '\0'));
    CHECK(read_wav(dir / "zero.wav").samples.size() == 16000);
  }

  TEST_CASE("round trip stays within one quantization step") {
    testing::TempDir dir("wav");
    const AudioClip c = seeded_clip(20000, 99);
    write_wav(c, dir / "r.wav");
    const auto back = read_wav(dir / "r.wav");
    REQUIRE(back.samples.size() == c.samples.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < c.samples.size(); ++i) worst = std::max(worst, std::abs(back.samples[i] - c.samples[i]));
    CHECK(worst <= 1.0 / 32768.0);
    CHECK(back.source_name.find("r.wav") != std::string::npos);
  }

  TEST_CASE("writing rejects out-of-range and empty clips") {
    testing::TempDir dir("wav");
    AudioClip loud;
    loud.samples = {0.0, 1.5};
    CHECK_THROWS_AS(write_wav(loud, dir / "x.wav"), RangeError);
    AudioClip nan;
    nan.samples = {std::nan("")};
    CHECK_THROWS_AS(write_wav(nan, dir / "x.wav"), RangeError);
    CHECK_THROWS_AS(write_wav(AudioClip{}, dir / "x.wav"), RangeError);
  }

  TEST_CASE("unwritable and missing paths are I/O errors") {
    testing::TempDir dir("wav");
    write_file_atomic(dir / "plain", "not a directory");
    AudioClip c;
    c.samples = {0.0};
    CHECK_THROWS_AS(write_wav(c, dir / "plain" / "x.wav"), IoError);
    CHECK_THROWS_AS(read_wav(dir / "missing.wav"), IoError);
  }
}
