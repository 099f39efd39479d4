#include "asdkit/features.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <mutex>
#include <numbers>
#include <sstream>

#include "asdkit/error.hpp"
#include "asdkit/util.hpp"

namespace asdkit {
namespace {

static_assert(std::endian::native == std::endian::little, "binary formats assume little-endian hosts");

// FFTW's planner is not thread-safe; execution on a finished plan is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(int n) : n_(n) {
    in_ = fftw_alloc_real(n);
    out_ = fftw_alloc_complex(n / 2 + 1);
    std::lock_guard lock(fftw_planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(n, in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    {
      std::lock_guard lock(fftw_planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* input() { return in_; }
  void execute() { fftw_execute(plan_); }
  double power(int k) const { return out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1]; }

 private:
  int n_;
  double* in_;
  fftw_complex* out_;
  fftw_plan plan_;
};

template <typename T>
void put_raw(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get_raw(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw ParseError("feature cache: truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

std::string window_name(Window w) { return w == Window::kHann ? "hann" : "rectangular"; }

Window parse_window(const std::string& name) {
  if (name == "hann") return Window::kHann;
  if (name == "rectangular") return Window::kRectangular;
  throw ConfigError("unknown window '" + name + "' (expected hann or rectangular)");
}

void StftConfig::validate() const {
  if (frame_length <= 0 || !std::has_single_bit(static_cast<unsigned>(frame_length))) {
    throw ConfigError("frame_length must be a positive power of two, got " + std::to_string(frame_length));
  }
  if (hop_length <= 0 || hop_length > frame_length) {
    throw ConfigError("hop_length must be in (0, frame_length], got " + std::to_string(hop_length));
  }
}

Vector make_window(Window w, int n) {
  Vector win(n);
  for (int i = 0; i < n; ++i) {
    win[i] = w == Window::kHann ? 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n) : 1.0;
  }
  return win;
}

Matrix stft_power(const AudioClip& clip, const StftConfig& cfg) {
  cfg.validate();
  const auto len = static_cast<long>(clip.samples.size());
  if (len < cfg.frame_length) {
    throw DataError("clip '" + clip.source_name + "' has " + std::to_string(len) +
                    " samples, shorter than one frame (" + std::to_string(cfg.frame_length) + ")");
  }
  const long frames = 1 + (len - cfg.frame_length) / cfg.hop_length;
  const Vector win = make_window(cfg.window, cfg.frame_length);
  Matrix power(cfg.n_bins(), frames);
  RealFft fft(cfg.fft_size());
  for (long t = 0; t < frames; ++t) {
    const double* src = clip.samples.data() + t * cfg.hop_length;
    double* dst = fft.input();
    for (int i = 0; i < cfg.frame_length; ++i) dst[i] = src[i] * win[i];
    fft.execute();
    for (int k = 0; k < cfg.n_bins(); ++k) power(k, t) = fft.power(k);
  }
  return power;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank mel_filterbank(int n_mels, const StftConfig& cfg, int sample_rate, double f_min,
                             double f_max) {
  cfg.validate();
  if (n_mels < 1) throw ConfigError("n_mels must be >= 1");
  if (sample_rate <= 0) throw ConfigError("sample_rate must be positive");
  if (!(f_min >= 0.0 && f_min < f_max && f_max <= sample_rate / 2.0)) {
    throw ConfigError("mel band edges must satisfy 0 <= f_min < f_max <= sample_rate/2");
  }
  const double mel_lo = hz_to_mel(f_min);
  const double mel_hi = hz_to_mel(f_max);
  std::vector<double> edges(n_mels + 2);
  for (int i = 0; i < n_mels + 2; ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1));
  }

  MelFilterbank fb;
  fb.f_min = f_min;
  fb.f_max = f_max;
  fb.sample_rate = sample_rate;
  fb.weights = Matrix::Zero(n_mels, cfg.n_bins());
  fb.center_hz.resize(n_mels);
  const double bin_hz = static_cast<double>(sample_rate) / cfg.fft_size();
  for (int m = 0; m < n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    fb.center_hz[m] = mid;
    bool any = false;
    for (int k = 0; k < cfg.n_bins(); ++k) {
      const double f = k * bin_hz;
      const double w = std::min((f - lo) / (mid - lo), (hi - f) / (hi - mid));
      if (w > 0.0) {
        fb.weights(m, k) = w;
        any = true;
      }
    }
    if (!any) {
      throw ConfigError("mel filter " + std::to_string(m) + " (" + std::to_string(lo) + "-" +
                        std::to_string(hi) + " Hz) covers no FFT bin; too many filters for fft_size " +
                        std::to_string(cfg.fft_size()));
    }
  }
  return fb;
}

FeatureMatrix log_mel(const Matrix& power, const MelFilterbank& fb) {
  if (power.rows() != fb.weights.cols()) {
    throw DimensionError("log_mel: power has " + std::to_string(power.rows()) +
                         " rows, filterbank expects " + std::to_string(fb.weights.cols()));
  }
  FeatureMatrix x;
  x.values = (fb.weights * power).unaryExpr([](double e) { return 10.0 * std::log10(std::max(e, kLogMelFloor)); });
  return x;
}

ContextFrames frame_context(const FeatureMatrix& x, int context) {
  if (context < 0) throw ConfigError("context radius must be >= 0");
  ContextFrames out;
  out.context = context;
  out.n_mels = x.n_mels();
  const int span = 2 * context + 1;
  const long rows = std::max<long>(x.n_frames() - 2L * context, 0);
  out.too_short = rows == 0;
  out.vectors.resize(rows, static_cast<Eigen::Index>(x.n_mels()) * span);
  for (long r = 0; r < rows; ++r) {
    for (int b = 0; b < span; ++b) {
      out.vectors.row(r).segment(static_cast<Eigen::Index>(b) * x.n_mels(), x.n_mels()) =
          x.values.col(r + b).transpose();
    }
  }
  return out;
}

void FeatureConfig::validate() const {
  stft.validate();
  if (n_mels < 1) throw ConfigError("n_mels must be >= 1");
  if (context < 0) throw ConfigError("context must be >= 0");
  if (sample_rate <= 0) throw ConfigError("sample_rate must be positive");
  if (!(f_min >= 0.0 && f_min < f_max && f_max <= sample_rate / 2.0)) {
    throw ConfigError("f_min/f_max must satisfy 0 <= f_min < f_max <= sample_rate/2");
  }
}

std::string FeatureConfig::canonical() const {
  std::ostringstream os;
  os.precision(17);
  os << "frame_length=" << stft.frame_length << ";hop_length=" << stft.hop_length
     << ";window=" << window_name(stft.window) << ";n_mels=" << n_mels << ";f_min=" << f_min
     << ";f_max=" << f_max << ";context=" << context << ";sample_rate=" << sample_rate;
  return os.str();
}

std::uint64_t FeatureConfig::hash() const { return fnv1a64(canonical()); }

FeatureExtractor::FeatureExtractor(FeatureConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  fb_ = mel_filterbank(cfg_.n_mels, cfg_.stft, cfg_.sample_rate, cfg_.f_min, cfg_.f_max);
}

FeatureMatrix FeatureExtractor::log_mel(const AudioClip& clip) const {
  if (clip.sample_rate != cfg_.sample_rate) {
    throw RateMismatchError("clip '" + clip.source_name + "' at " + std::to_string(clip.sample_rate) +
                            " Hz, features configured for " + std::to_string(cfg_.sample_rate) + " Hz");
  }
  return asdkit::log_mel(stft_power(clip, cfg_.stft), fb_);
}

ContextFrames FeatureExtractor::frames(const AudioClip& clip) const {
  ContextFrames f = frame_context(log_mel(clip), cfg_.context);
  if (f.too_short) {
    throw DataError("clip '" + clip.source_name + "' is too short for context radius " +
                    std::to_string(cfg_.context));
  }
  return f;
}

void write_feature_cache(const std::filesystem::path& path, const FeatureMatrix& x, int context,
                         std::uint64_t config_hash) {
  std::string out = "ASDFEAT1";
  put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(x.n_mels()));
  put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(x.n_frames()));
  put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(context));
  put_raw<std::uint64_t>(out, config_hash);
  out.append(reinterpret_cast<const char*>(x.values.data()), sizeof(double) * x.values.size());
  write_file_atomic(path, out);
}

FeatureCache read_feature_cache(const std::filesystem::path& path) {
  const std::string in = read_file(path);
  if (in.size() < 8 || in.compare(0, 8, "ASDFEAT1") != 0) throw ParseError("feature cache: bad magic");
  std::size_t pos = 8;
  const auto f = get_raw<std::uint32_t>(in, pos);
  const auto t = get_raw<std::uint32_t>(in, pos);
  FeatureCache c;
  c.context = static_cast<int>(get_raw<std::uint32_t>(in, pos));
  c.config_hash = get_raw<std::uint64_t>(in, pos);
  const std::size_t n = static_cast<std::size_t>(f) * t;
  if (in.size() - pos != n * sizeof(double)) throw ParseError("feature cache: payload size does not match F x T");
  c.features.values.resize(f, t);
  std::memcpy(c.features.values.data(), in.data() + pos, n * sizeof(double));
  return c;
}

}  // namespace asdkit
