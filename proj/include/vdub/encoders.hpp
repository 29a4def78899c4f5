// Copyright 2026 The vdub Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <random>
#include <vector>

#include "vdub/model_config.hpp"

namespace vdub {

class PhonemeEncoder {
 public:
  PhonemeEncoder() = default;
  PhonemeEncoder(ParamStore& store, const ModelConfig& cfg, std::mt19937_64& rng);

  // ids may be right-padded; mask marks the real positions.
  Var operator()(const Context& ctx, const std::vector<int>& ids, const Mask& mask) const;

 private:
  Embedding embedding_;
  std::vector<FftBlock> blocks_;
};

class VideoEncoder {
 public:
  VideoEncoder() = default;
  VideoEncoder(ParamStore& store, const ModelConfig& cfg, std::mt19937_64& rng);

  // mouth is T_v x F features or T_v x (96*96) crops, as configured.
  Var operator()(const Context& ctx, const Mat& mouth, const Mask& mask) const;

  // Crop path only: 3-D conv, 2-D conv, spatial mean. Output T_v x F.
  Var frontend(const Context& ctx, Var crops) const;

 private:
  MouthKind kind_ = MouthKind::kFeatures;
  int feature_dim_ = 0;
  int channels_ = 0;
  std::size_t conv3d_weight_ = 0, conv3d_bias_ = 0;
  std::size_t conv2d_weight_ = 0, conv2d_bias_ = 0;
  Linear project_;
  std::vector<FftBlock> blocks_;
};

// Adds sinusoidal positions to x and zeroes padded rows.
Var add_positions(const Context& ctx, Var x, const Mask& mask);

}  // namespace vdub
