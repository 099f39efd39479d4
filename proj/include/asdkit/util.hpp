#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace asdkit {

/// 64-bit FNV-1a. Stable across platforms, used for config fingerprints.
constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v);

/// SplitMix64 finalizer; derives independent stream seeds from a master seed.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return mix_seed(mix_seed(a) ^ (b + 0x632be59bd9b4e019ULL));
}

/// Seeded generator with distribution helpers whose output does not depend on
/// the standard library implementation (std::*_distribution is unspecified).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n), by rejection sampling.
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via Box-Muller (no cached spare, so draws stay stateless).
  double normal();

 private:
  std::mt19937_64 engine_;
};

/// Writes `contents` to `path` through a sibling temp file and rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

/// "key = value" lines; blank lines and '#' comments skipped, whitespace
/// trimmed. Throws ConfigError on a line without '=' or a repeated key.
std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text);

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
/// Strict numeric parses; ConfigError names `field` on failure.
double parse_double(const std::string& field, const std::string& value);
long long parse_int(const std::string& field, const std::string& value);
/// true/false, 1/0 or yes/no.
bool parse_bool(const std::string& field, const std::string& value);

}  // namespace asdkit
