// Copyright 2026 The vdub Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "vdub/dataset.hpp"
#include "vdub/model.hpp"

namespace vdub {

// Maps audio (mel frames) and video frames into a shared embedding space at
// the video frame rate.
class SyncEmbedder {
 public:
  virtual ~SyncEmbedder() = default;
  virtual std::string name() const = 0;
  // mel: (n * T_v) x n_mels -> T_v x D
  virtual Mat embed_audio(const Mat& mel, int n) const = 0;
  // video: T_v x F -> T_v x D
  virtual Mat embed_video(const Mat& video) const = 0;
};

// Audio side: mean of each group of n mel frames. Video side: an affine map
// into the mel space (identity when no map is given and F == n_mels).
class OracleEmbedder : public SyncEmbedder {
 public:
  OracleEmbedder() = default;
  // weights: (F + 1) x n_mels, last row is the bias.
  explicit OracleEmbedder(Mat weights) : weights_(std::move(weights)) {}

  std::string name() const override { return "oracle"; }
  Mat embed_audio(const Mat& mel, int n) const override;
  Mat embed_video(const Mat& video) const override;
  const Mat& weights() const { return weights_; }

 private:
  Mat weights_;
};

// Least-squares fit of the video map against per-frame mean mel targets.
OracleEmbedder fit_oracle_embedder(std::span<const Sample> samples, double ridge = 1e-3);

std::unique_ptr<SyncEmbedder> make_sync_embedder(const std::string& name, std::span<const Sample> fit_samples);

struct SyncPair {
  Mat audio;  // T_v x D
  Mat video;  // T_v x D
};

// Audio may cover up to one video frame more or less than the video; the
// result is cut to the shorter span.
SyncPair sync_embed(const Mat& mel, const Mat& video, int n, const SyncEmbedder& embedder);

struct SyncCurve {
  std::vector<int> offsets;
  std::vector<double> distances;
};

struct LseResult {
  double lse_d = 0.0;
  double lse_c = 0.0;
  int best_offset = 0;
  SyncCurve curve;
};

// distance(o) = mean over t in [M, T - M - W] of the Euclidean distance
// between audio frames t+o .. t+o+W-1 and video frames t .. t+W-1 (stacked).
// lse_d = min distance, lse_c = median distance - lse_d.
LseResult lse_metrics(const Mat& audio, const Mat& video, int max_offset = 15, int window = 5);

struct EvalOptions {
  int max_offset = 15;
  int window = 5;
  int griffin_lim_iters = 60;
  std::uint64_t seed = 0;
  bool use_vocoder = true;  // false scores the generated mel directly
};

struct SampleReport {
  std::string id;
  double mel_l1 = 0.0;
  double rate = 0.0;
  double lse_d = 0.0;
  double lse_c = 0.0;
  int best_offset = 0;
  int max_offset = 0;
  std::vector<double> distances;
  std::string error;  // non-empty when the sync metrics could not be computed
};

struct EvalReport {
  double lse_d = 0.0;
  double lse_c = 0.0;
  double mean_rate = 0.0;
  double mel_l1 = 0.0;
  std::size_t failed = 0;
  int max_offset = 15;
  std::vector<SampleReport> samples;
};

EvalReport evaluate(const DubbingModel& model, std::span<const Sample> samples, const SyncEmbedder& embedder,
                    const EvalOptions& options = {});

// Writes report.json and distances.ndf (samples x offsets, -1 where missing).
void write_report(const EvalReport& report, const std::filesystem::path& dir);

}  // namespace vdub
