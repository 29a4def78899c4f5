// Copyright 2026 The vdub Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vdub/dataset.hpp"
#include "vdub/model.hpp"

namespace vdub {

struct LossWeights {
  double mel = 1.0;
  double pitch = 0.1;
  double energy = 0.1;
};

struct LossBreakdown {
  double mel_loss = 0.0;
  double pitch_loss = 0.0;
  double energy_loss = 0.0;
  double dc_loss = 0.0;
  double total = 0.0;
  double rate = 0.0;  // diagonal attention rate, -dc_loss
  // lambda_mel, lambda_pitch, lambda_energy, lambda_DC
  std::array<double, 4> weights{1.0, 0.1, 0.1, 0.1};
};

struct LossTerms {
  Var mel, pitch, energy, dc, total;
  LossBreakdown breakdown;
};

// Pitch targets are in Hz (0 = unvoiced) and compared in log-Hz on voiced
// frames only; pitch_pred is already log-Hz.
LossTerms total_loss(Var mel_pred, const Mat& mel_target, Var pitch_pred, const Vec& pitch_target_hz,
                     Var energy_pred, const Vec& energy_target, Var attention, const Mask& mel_mask,
                     const Mask& video_mask, const Mask& phoneme_mask, const LossWeights& weights,
                     const DiagonalConfig& diagonal);

LossTerms model_loss(const ModelOutput& out, const Mat& mel_target, const VarianceTargets& targets,
                     const LossWeights& weights, const DiagonalConfig& diagonal);

// d^-0.5 * min(step^-0.5, step * warmup^-1.5)
double lr_schedule(long step, int d_model, int warmup);

struct Batch {
  std::vector<std::string> ids;
  std::vector<std::vector<int>> phonemes;  // right-padded with the pad id
  std::vector<Mask> phoneme_masks;
  std::vector<Mat> mouth;
  std::vector<Mask> video_masks;
  std::vector<Mat> mel;
  std::vector<Vec> pitch;
  std::vector<Vec> energy;
  std::vector<Mask> mel_masks;
  std::vector<std::optional<Vec>> faces;
  int upsample = 1;

  std::size_t size() const { return ids.size(); }
  ModelInput input(std::size_t i, bool with_targets) const;
  VarianceTargets targets(std::size_t i) const;
};

Batch collate_batch(std::span<const Sample* const> samples, bool with_faces);

// Mean over samples of the per-sample loss, each computed on its padded row.
LossBreakdown batch_loss(const DubbingModel& model, const Batch& batch, const LossWeights& weights,
                         const DiagonalConfig& diagonal);

struct TrainConfig {
  int batch_size = 8;
  int max_steps = 2000;
  int warmup_steps = 400;
  double lr_scale = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double epsilon = 1e-9;
  double grad_clip = 1.0;  // global norm; 0 disables
  int checkpoint_every = 100;
  int log_every = 1;
  int threads = 1;
  std::uint64_t seed = 1;
  LossWeights weights;
  DiagonalConfig diagonal;

  void validate() const;
};

class Adam {
 public:
  Adam() = default;
  Adam(const ParamStore& store, double beta1, double beta2, double epsilon);

  void update(ParamStore& store, const Gradients& grads, double lr);

  long step() const { return step_; }
  std::vector<Mat>& first_moment() { return m_; }
  std::vector<Mat>& second_moment() { return v_; }
  const std::vector<Mat>& first_moment() const { return m_; }
  const std::vector<Mat>& second_moment() const { return v_; }
  void set_step(long s) { step_ = s; }

 private:
  double beta1_ = 0.9, beta2_ = 0.98, epsilon_ = 1e-9;
  long step_ = 0;
  std::vector<Mat> m_, v_;
};

struct StepRecord {
  long step = 0;
  double lr = 0.0;
  double grad_norm = 0.0;
  LossBreakdown loss;
};

// Fits the pitch/energy quantization ranges to the voiced/real frames of `data`.
void fit_variance_ranges(ModelConfig& cfg, std::span<const Sample> data);

class Trainer {
 public:
  Trainer(DubbingModel& model, const TrainConfig& cfg, std::vector<Sample> data);

  // Runs one optimizer step. Throws NumericError on a non-finite loss or
  // gradient, leaving parameters untouched.
  StepRecord step();
  long completed_steps() const { return adam_.step(); }

  // Indices of the samples that form batch `step` (1-based).
  std::vector<std::size_t> batch_indices(long step) const;

  void save_checkpoint(const std::filesystem::path& dir) const;
  void load_checkpoint(const std::filesystem::path& dir);

  const TrainConfig& config() const { return cfg_; }
  DubbingModel& model() { return model_; }

 private:
  DubbingModel& model_;
  TrainConfig cfg_;
  std::vector<Sample> data_;
  Adam adam_;
};

struct TrainResult {
  std::vector<StepRecord> records;
  std::filesystem::path last_checkpoint;
};

// Trains until cfg.max_steps, writing checkpoints under out_dir/checkpoints
// and one JSON line per step to out_dir/metrics.jsonl. When resume_from is
// set, restores that checkpoint first and appends to the metrics log.
TrainResult train(DubbingModel& model, const TrainConfig& cfg, std::vector<Sample> data,
                  const std::filesystem::path& out_dir,
                  const std::optional<std::filesystem::path>& resume_from = std::nullopt,
                  const std::function<void(const StepRecord&)>& on_step = {});

// Directory name of the checkpoint written after `step`.
std::string checkpoint_name(long step);
std::filesystem::path latest_checkpoint(const std::filesystem::path& out_dir);

// Model-only checkpoint load; the config is read from the checkpoint.
DubbingModel load_model(const std::filesystem::path& checkpoint_dir);

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace vdub
