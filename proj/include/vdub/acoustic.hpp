// Copyright 2026 The vdub Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <random>
#include <vector>

#include "vdub/model_config.hpp"

namespace vdub {

// Two conv -> ReLU -> LayerNorm -> dropout stages and a scalar head.
class VariancePredictor {
 public:
  VariancePredictor() = default;
  VariancePredictor(ParamStore& store, const std::string& name, const ModelConfig& cfg, std::mt19937_64& rng);

  // Returns T x 1; padded rows are zero.
  Var operator()(const Context& ctx, Var h, const Mask& mask) const;

  // Parameter indices owned by this predictor, for freezing checks.
  const std::vector<std::size_t>& parameters() const { return params_; }

 private:
  double dropout_ = 0.0;
  Conv1d conv1_, conv2_;
  LayerNorm norm1_, norm2_;
  Linear head_;
  std::vector<std::size_t> params_;
};

// Uniform bins over [lo, hi]; values outside land in the edge bins.
int quantize(double value, double lo, double hi, int bins);

// log(Hz) with unvoiced frames filled by linear interpolation between the
// neighbouring voiced frames (edges hold the nearest voiced value). An
// all-unvoiced contour becomes `fallback` everywhere.
Vec interpolated_log_pitch(const Vec& pitch_hz, double fallback);

struct VarianceTargets {
  Vec pitch_hz;  // length T_m, 0 = unvoiced
  Vec energy;    // length T_m
};

struct VarianceOutputs {
  Var adapted;      // T_m x d
  Var pitch_pred;   // T_m x 1, log-Hz
  Var energy_pred;  // T_m x 1
  std::vector<int> pitch_bins;
  std::vector<int> energy_bins;
};

class VarianceAdaptor {
 public:
  VarianceAdaptor() = default;
  VarianceAdaptor(ParamStore& store, const ModelConfig& cfg, std::mt19937_64& rng);

  // With targets the embeddings are taken from the targets (teacher forcing);
  // without, from the predictions. Training mode requires targets.
  VarianceOutputs operator()(const Context& ctx, Var h, const Mask& mask, const VarianceTargets* targets) const;

  const VariancePredictor& pitch_predictor() const { return pitch_; }
  const VariancePredictor& energy_predictor() const { return energy_; }

 private:
  ModelConfig cfg_;
  VariancePredictor pitch_;
  VariancePredictor energy_;
  Embedding pitch_embedding_;
  Embedding energy_embedding_;
};

class MelDecoder {
 public:
  MelDecoder() = default;
  MelDecoder(ParamStore& store, const ModelConfig& cfg, std::mt19937_64& rng);

  Var operator()(const Context& ctx, Var adapted, const Mask& mask) const;
  const Linear& projection() const { return projection_; }

 private:
  int d_ = 0;
  std::vector<FftBlock> blocks_;
  Linear projection_;
};

}  // namespace vdub
