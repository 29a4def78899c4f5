// Copyright 2026 The vdub Authors
// SPDX-License-Identifier: Apache-2.0

#include "vdub/audio.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>

#include <fftw3.h>

#include "vdub/error.hpp"

namespace vdub {
namespace {

// Real-to-complex and complex-to-real transforms of one size, sharing buffers.
class RealFft {
 public:
  explicit RealFft(int n) : n_(n) {
    real_ = fftw_alloc_real(static_cast<std::size_t>(n));
    spec_ = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
    forward_ = fftw_plan_dft_r2c_1d(n, real_, spec_, FFTW_ESTIMATE);
    inverse_ = fftw_plan_dft_c2r_1d(n, spec_, real_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(inverse_);
    fftw_free(real_);
    fftw_free(spec_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  int size() const { return n_; }
  int bins() const { return n_ / 2 + 1; }
  double* real() { return real_; }
  std::complex<double>* spectrum() { return reinterpret_cast<std::complex<double>*>(spec_); }
  void forward() { fftw_execute(forward_); }
  // Unnormalised: the caller divides by size().
  void inverse() { fftw_execute(inverse_); }

 private:
  int n_;
  double* real_;
  fftw_complex* spec_;
  fftw_plan forward_;
  fftw_plan inverse_;
};

std::vector<double> hann(int n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) w[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  return w;
}

// Reflection without edge repeat, folded as often as needed for short signals.
double reflect_at(const std::vector<double>& x, std::ptrdiff_t i) {
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  if (n == 1) return x[0];
  const std::ptrdiff_t period = 2 * (n - 1);
  std::ptrdiff_t k = i % period;
  if (k < 0) k += period;
  if (k >= n) k = period - k;
  return x[static_cast<std::size_t>(k)];
}

std::size_t frame_count(std::size_t samples, int hop) {
  return (samples + static_cast<std::size_t>(hop) - 1) / static_cast<std::size_t>(hop);
}

void check_waveform(const std::vector<double>& x, const MelParams& p) {
  if (x.empty()) throw SignalError("empty waveform");
  for (double v : x) {
    if (!std::isfinite(v)) throw SignalError("waveform contains non-finite samples");
  }
  if (p.hop <= 0 || p.n_fft <= 0 || p.win <= 0 || p.win > p.n_fft) {
    throw SignalError("invalid STFT parameters");
  }
}

double hz_to_mel(double f) {
  const double f_sp = 200.0 / 3.0;
  const double min_log_hz = 1000.0;
  const double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  return f < min_log_hz ? f / f_sp : min_log_mel + std::log(f / min_log_hz) / logstep;
}

double mel_to_hz(double m) {
  const double f_sp = 200.0 / 3.0;
  const double min_log_hz = 1000.0;
  const double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  return m < min_log_mel ? m * f_sp : min_log_hz * std::exp(logstep * (m - min_log_mel));
}

// Windowed frame t of x (centred at t * hop), zero-padded to n_fft.
void load_frame(const std::vector<double>& x, std::size_t t, const MelParams& p,
                const std::vector<double>& window, double* out) {
  const std::ptrdiff_t start = static_cast<std::ptrdiff_t>(t) * p.hop - p.n_fft / 2;
  const int offset = (p.n_fft - p.win) / 2;
  std::fill(out, out + p.n_fft, 0.0);
  for (int i = 0; i < p.win; ++i) {
    out[offset + i] = window[static_cast<std::size_t>(i)] * reflect_at(x, start + offset + i);
  }
}

using ComplexFrames = std::vector<std::vector<std::complex<double>>>;

ComplexFrames stft_complex(const std::vector<double>& x, std::size_t frames, const MelParams& p,
                           RealFft& fft, const std::vector<double>& window) {
  ComplexFrames out(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    load_frame(x, t, p, window, fft.real());
    fft.forward();
    out[t].assign(fft.spectrum(), fft.spectrum() + fft.bins());
  }
  return out;
}

// Overlap-add inverse of stft_complex, trimmed to `length` samples.
std::vector<double> istft(const ComplexFrames& spec, std::size_t length, const MelParams& p,
                          RealFft& fft, const std::vector<double>& window) {
  const std::size_t frames = spec.size();
  const std::size_t padded = (frames - 1) * static_cast<std::size_t>(p.hop) + static_cast<std::size_t>(p.n_fft);
  std::vector<double> acc(padded, 0.0);
  std::vector<double> norm(padded, 0.0);
  const int offset = (p.n_fft - p.win) / 2;
  for (std::size_t t = 0; t < frames; ++t) {
    std::copy(spec[t].begin(), spec[t].end(), fft.spectrum());
    fft.inverse();
    const std::size_t base = t * static_cast<std::size_t>(p.hop);
    for (int i = 0; i < p.win; ++i) {
      const double w = window[static_cast<std::size_t>(i)];
      const std::size_t k = base + static_cast<std::size_t>(offset + i);
      acc[k] += w * fft.real()[offset + i] / p.n_fft;
      norm[k] += w * w;
    }
  }
  std::vector<double> y(length, 0.0);
  const std::size_t shift = static_cast<std::size_t>(p.n_fft / 2);
  for (std::size_t i = 0; i < length && i + shift < padded; ++i) {
    const double nrm = norm[i + shift];
    y[i] = nrm > 1e-10 ? acc[i + shift] / nrm : 0.0;
  }
  return y;
}

// Nonnegative least-squares estimate of linear magnitudes S >= 0 with
// filterbank * S ~= target, via multiplicative updates from a clamped
// pseudo-inverse start.
Mat invert_filterbank(const Mat& filterbank, const Mat& target_mel_mag) {
  const Mat fb_t = filterbank.transpose();
  const Mat pinv = filterbank.completeOrthogonalDecomposition().pseudoInverse();
  Mat s = (pinv * target_mel_mag).cwiseMax(1e-10);
  const Mat gram = fb_t * filterbank;
  const Mat numer = (fb_t * target_mel_mag).cwiseMax(0.0);
  for (int it = 0; it < 100; ++it) {
    Mat denom = gram * s;
    s = s.cwiseProduct(numer.cwiseQuotient(denom.cwiseMax(1e-12)));
  }
  return s;
}

}  // namespace

MelParams MelParams::from_geometry(const FrameGeometry& g) {
  MelParams p;
  p.sample_rate = g.sample_rate;
  p.n_fft = g.win_size;
  p.hop = g.hop_size;
  p.win = g.win_size;
  p.fmax = g.sample_rate / 2.0;
  return p;
}

Mat mel_filterbank(const MelParams& p) {
  const int bins = p.n_fft / 2 + 1;
  Mat fb = Mat::Zero(p.n_mels, bins);
  const double mmin = hz_to_mel(p.fmin);
  const double mmax = hz_to_mel(p.fmax);
  std::vector<double> pts(static_cast<std::size_t>(p.n_mels + 2));
  for (int i = 0; i < p.n_mels + 2; ++i) {
    pts[static_cast<std::size_t>(i)] = mel_to_hz(mmin + (mmax - mmin) * i / (p.n_mels + 1));
  }
  for (int m = 0; m < p.n_mels; ++m) {
    const double lo = pts[static_cast<std::size_t>(m)];
    const double mid = pts[static_cast<std::size_t>(m + 1)];
    const double hi = pts[static_cast<std::size_t>(m + 2)];
    const double enorm = 2.0 / (hi - lo);
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * p.sample_rate / p.n_fft;
      const double up = (f - lo) / (mid - lo);
      const double down = (hi - f) / (hi - mid);
      fb(m, k) = std::max(0.0, std::min(up, down)) * enorm;
    }
  }
  return fb;
}

Mat stft_magnitude(const std::vector<double>& x, const MelParams& p) {
  check_waveform(x, p);
  RealFft fft(p.n_fft);
  const auto window = hann(p.win);
  const std::size_t frames = frame_count(x.size(), p.hop);
  Mat mag(static_cast<Eigen::Index>(frames), fft.bins());
  for (std::size_t t = 0; t < frames; ++t) {
    load_frame(x, t, p, window, fft.real());
    fft.forward();
    for (int k = 0; k < fft.bins(); ++k) mag(static_cast<Eigen::Index>(t), k) = std::abs(fft.spectrum()[k]);
  }
  return mag;
}

MelSpectrogram mel_spectrogram(const std::vector<double>& x, const MelParams& p) {
  const Mat mag = stft_magnitude(x, p);
  MelSpectrogram out;
  out.params = p;
  out.frames = (mag * mel_filterbank(p).transpose()).cwiseMax(p.log_floor).array().log().matrix();
  return out;
}

std::vector<double> griffin_lim(const MelSpectrogram& mel, int iterations, std::uint64_t seed) {
  const MelParams& p = mel.params;
  if (iterations < 1) throw SignalError("griffin_lim: iterations must be >= 1");
  if (mel.frames.rows() < 1 || mel.frames.cols() != p.n_mels) {
    throw ShapeError("griffin_lim: mel must be T x n_mels with T >= 1");
  }
  const Mat fb = mel_filterbank(p);
  const Mat target = mel.frames.array().exp().matrix().transpose();  // n_mels x T
  const Mat mag = invert_filterbank(fb, target).transpose();          // T x bins

  RealFft fft(p.n_fft);
  const auto window = hann(p.win);
  const std::size_t frames = static_cast<std::size_t>(mag.rows());
  const std::size_t length = frames * static_cast<std::size_t>(p.hop);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(-std::numbers::pi, std::numbers::pi);
  ComplexFrames spec(frames, std::vector<std::complex<double>>(static_cast<std::size_t>(fft.bins())));
  for (std::size_t t = 0; t < frames; ++t) {
    for (int k = 0; k < fft.bins(); ++k) {
      spec[t][static_cast<std::size_t>(k)] = std::polar(mag(static_cast<Eigen::Index>(t), k), phase(rng));
    }
  }
  // Fast Griffin-Lim with momentum.
  const double momentum = 0.99;
  ComplexFrames prev = spec;
  std::vector<double> y;
  for (int it = 0; it < iterations; ++it) {
    y = istft(spec, length, p, fft, window);
    ComplexFrames rebuilt = stft_complex(y, frames, p, fft, window);
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t k = 0; k < rebuilt[t].size(); ++k) {
        const std::complex<double> accel = rebuilt[t][k] + momentum * (rebuilt[t][k] - prev[t][k]);
        prev[t][k] = rebuilt[t][k];
        const double a = std::abs(accel);
        const std::complex<double> unit = a > 1e-16 ? accel / a : std::complex<double>(1.0, 0.0);
        spec[t][k] = mag(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k)) * unit;
      }
    }
  }
  y = istft(spec, length, p, fft, window);
  for (double& v : y) v = std::clamp(v, -1.0, 1.0);
  return y;
}

Vec extract_pitch(const std::vector<double>& x, const FrameGeometry& g) {
  const MelParams p = MelParams::from_geometry(g);
  check_waveform(x, p);
  const std::size_t frames = frame_count(x.size(), p.hop);
  const int window = g.win_size;
  const int tau_min = static_cast<int>(std::floor(g.sample_rate / 600.0));
  const int tau_max = static_cast<int>(std::ceil(g.sample_rate / 50.0));
  const double threshold = 0.15;
  Vec f0 = Vec::Zero(static_cast<Eigen::Index>(frames));
  std::vector<double> buf(static_cast<std::size_t>(window + tau_max + 1));
  std::vector<double> diff(static_cast<std::size_t>(tau_max + 2));
  std::vector<double> cmnd(static_cast<std::size_t>(tau_max + 2));
  for (std::size_t t = 0; t < frames; ++t) {
    const std::ptrdiff_t start = static_cast<std::ptrdiff_t>(t) * p.hop - window / 2;
    double energy = 0.0;
    for (std::size_t i = 0; i < buf.size(); ++i) {
      const std::ptrdiff_t k = start + static_cast<std::ptrdiff_t>(i);
      buf[i] = (k < 0 || k >= static_cast<std::ptrdiff_t>(x.size())) ? 0.0 : x[static_cast<std::size_t>(k)];
      if (i < static_cast<std::size_t>(window)) energy += buf[i] * buf[i];
    }
    if (energy / window < 1e-8) continue;
    for (int tau = 1; tau <= tau_max + 1; ++tau) {
      double d = 0.0;
      for (int j = 0; j < window; ++j) {
        const double e = buf[static_cast<std::size_t>(j)] - buf[static_cast<std::size_t>(j + tau)];
        d += e * e;
      }
      diff[static_cast<std::size_t>(tau)] = d;
    }
    double running = 0.0;
    cmnd[0] = 1.0;
    for (int tau = 1; tau <= tau_max + 1; ++tau) {
      running += diff[static_cast<std::size_t>(tau)];
      cmnd[static_cast<std::size_t>(tau)] = running > 0.0 ? diff[static_cast<std::size_t>(tau)] * tau / running : 1.0;
    }
    int best = -1;
    for (int tau = std::max(tau_min, 2); tau <= tau_max; ++tau) {
      if (cmnd[static_cast<std::size_t>(tau)] < threshold) {
        while (tau + 1 <= tau_max && cmnd[static_cast<std::size_t>(tau + 1)] < cmnd[static_cast<std::size_t>(tau)]) ++tau;
        best = tau;
        break;
      }
    }
    if (best < 0) continue;
    const double a = cmnd[static_cast<std::size_t>(best - 1)];
    const double b = cmnd[static_cast<std::size_t>(best)];
    const double c = cmnd[static_cast<std::size_t>(best + 1)];
    const double denom = a - 2.0 * b + c;
    const double shift = std::abs(denom) > 1e-12 ? 0.5 * (a - c) / denom : 0.0;
    const double hz = g.sample_rate / (best + std::clamp(shift, -1.0, 1.0));
    if (hz >= 50.0 && hz <= 600.0) f0(static_cast<Eigen::Index>(t)) = hz;
  }
  return f0;
}

Vec extract_energy(const std::vector<double>& x, const FrameGeometry& g) {
  const Mat mag = stft_magnitude(x, MelParams::from_geometry(g));
  return mag.rowwise().norm();
}

namespace {

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(const std::vector<char>& buf, std::size_t at) {
  T v;
  std::memcpy(&v, buf.data() + at, sizeof(T));
  return v;
}

}  // namespace

WavData read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open WAV file: " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 || std::memcmp(buf.data() + 8, "WAVE", 4) != 0) {
    throw DataError("not a RIFF/WAVE file: " + path.string());
  }
  WavData wav;
  std::uint16_t channels = 0, bits = 0, format = 0;
  bool have_fmt = false;
  std::size_t at = 12;
  while (at + 8 <= buf.size()) {
    const std::string id(buf.data() + at, 4);
    const auto size = get<std::uint32_t>(buf, at + 4);
    const std::size_t body = at + 8;
    if (body + size > buf.size()) throw DataError("truncated WAV chunk in " + path.string());
    if (id == "fmt ") {
      format = get<std::uint16_t>(buf, body);
      channels = get<std::uint16_t>(buf, body + 2);
      wav.sample_rate = static_cast<int>(get<std::uint32_t>(buf, body + 4));
      bits = get<std::uint16_t>(buf, body + 14);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw DataError("WAV data chunk before fmt chunk: " + path.string());
      if (format != 1 || bits != 16 || channels != 1) {
        throw DataError("only mono 16-bit PCM WAV is supported: " + path.string());
      }
      const std::size_t n = size / 2;
      wav.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) wav.samples[i] = get<std::int16_t>(buf, body + 2 * i) / 32768.0;
      return wav;
    }
    at = body + size + (size & 1u);
  }
  throw DataError("WAV file has no data chunk: " + path.string());
}

void write_wav(const std::filesystem::path& path, const WavData& wav) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write WAV file: " + path.string());
  const auto data_bytes = static_cast<std::uint32_t>(wav.samples.size() * 2);
  out.write("RIFF", 4);
  put<std::uint32_t>(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put<std::uint32_t>(out, 16);
  put<std::uint16_t>(out, 1);
  put<std::uint16_t>(out, 1);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(wav.sample_rate));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(wav.sample_rate * 2));
  put<std::uint16_t>(out, 2);
  put<std::uint16_t>(out, 16);
  out.write("data", 4);
  put<std::uint32_t>(out, data_bytes);
  for (double v : wav.samples) {
    const double c = std::clamp(v, -1.0, 1.0);
    put<std::int16_t>(out, static_cast<std::int16_t>(std::lround(c * 32767.0)));
  }
  if (!out) throw DataError("WAV write failed: " + path.string());
}

}  // namespace vdub
