// Copyright 2026 The vdub Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>

#include "vdub/dataset.hpp"
#include "vdub/nn.hpp"

namespace vdub {

struct ModelConfig {
  int d = 256;
  int phoneme_blocks = 4;
  int video_blocks = 2;
  int decoder_blocks = 4;
  int heads = 2;
  int conv_kernel = 9;
  int conv_filter = 1024;
  double encoder_dropout = 0.2;
  double decoder_dropout = 0.2;
  double aligner_dropout = 0.5;

  int vocab_size = 42;
  int n_mels = 80;
  int upsample = 4;

  MouthKind video_input = MouthKind::kFeatures;
  int video_feature_dim = 512;  // F
  int frontend_channels = 16;   // channels of the 3-D front convolution (crops only)

  bool multi_speaker = false;
  int ise_hidden = 512;

  int predictor_filter = 256;
  int predictor_kernel = 3;
  double predictor_dropout = 0.5;
  int variance_bins = 256;
  // Quantization ranges; fitted to the training set before training starts.
  double log_pitch_min = std::log(50.0);
  double log_pitch_max = std::log(600.0);
  double energy_min = 0.0;
  double energy_max = 100.0;

  void validate() const;

  FftBlockConfig encoder_block() const { return {d, heads, conv_kernel, conv_filter, encoder_dropout}; }
  FftBlockConfig decoder_block() const { return {d, heads, conv_kernel, conv_filter, decoder_dropout}; }

  // Small configuration sized for single-core CPU training.
  static ModelConfig desk();
};

}  // namespace vdub
