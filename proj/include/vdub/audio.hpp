// Copyright 2026 The vdub Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "vdub/geometry.hpp"
#include "vdub/tensor.hpp"

namespace vdub {

struct MelParams {
  int sample_rate = 16000;
  int n_fft = 640;
  int hop = 160;
  int win = 640;
  int n_mels = 80;
  double fmin = 0.0;
  double fmax = 8000.0;
  double log_floor = 1e-5;

  static MelParams from_geometry(const FrameGeometry& g);
};

struct MelSpectrogram {
  Mat frames;  // T_m x n_mels, natural-log magnitudes
  MelParams params;
};

// frames.rows() == ceil(samples / hop); frame t is centred on sample t * hop
// with reflection padding at the edges.
MelSpectrogram mel_spectrogram(const std::vector<double>& waveform, const MelParams& params = {});

// Magnitude STFT, frames x (n_fft / 2 + 1), same framing as mel_spectrogram.
Mat stft_magnitude(const std::vector<double>& waveform, const MelParams& params);

// n_mels x (n_fft / 2 + 1) Slaney-normalised triangular filters on the Slaney mel scale.
Mat mel_filterbank(const MelParams& params);

// Phase reconstruction from a log-mel spectrogram. Deterministic for a seed.
std::vector<double> griffin_lim(const MelSpectrogram& mel, int iterations = 60, std::uint64_t seed = 0);

// Per-frame F0 in Hz via YIN; 0 marks unvoiced frames. Length matches mel_spectrogram.
Vec extract_pitch(const std::vector<double>& waveform, const FrameGeometry& geometry);

// L2 norm of each STFT magnitude frame. Length matches mel_spectrogram.
Vec extract_energy(const std::vector<double>& waveform, const FrameGeometry& geometry);

struct WavData {
  int sample_rate = 16000;
  std::vector<double> samples;  // mono, [-1, 1]
};

// Mono 16-bit PCM only.
WavData read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const WavData& wav);

}  // namespace vdub
