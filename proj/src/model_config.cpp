// Copyright 2026 The vdub Authors
// SPDX-License-Identifier: Apache-2.0

#include "vdub/model_config.hpp"

#include "vdub/error.hpp"

namespace vdub {

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw ConfigError(std::string("model: ") + name + " must be >= 1");
  };
  positive(d, "d");
  positive(phoneme_blocks, "phoneme_blocks");
  positive(video_blocks, "video_blocks");
  positive(decoder_blocks, "decoder_blocks");
  positive(heads, "heads");
  positive(conv_kernel, "conv_kernel");
  positive(conv_filter, "conv_filter");
  positive(vocab_size, "vocab_size");
  positive(n_mels, "n_mels");
  positive(upsample, "upsample");
  positive(video_feature_dim, "video_feature_dim");
  positive(frontend_channels, "frontend_channels");
  positive(ise_hidden, "ise_hidden");
  positive(predictor_filter, "predictor_filter");
  positive(predictor_kernel, "predictor_kernel");
  if (variance_bins < 2) throw ConfigError("model: variance_bins must be >= 2");
  if (d % heads != 0) throw ConfigError("model: d must be divisible by heads");
  if (conv_kernel % 2 == 0 || predictor_kernel % 2 == 0) throw ConfigError("model: kernel sizes must be odd");
  for (double p : {encoder_dropout, decoder_dropout, aligner_dropout, predictor_dropout}) {
    if (!(p >= 0.0 && p < 1.0)) throw ConfigError("model: dropout must be in [0, 1)");
  }
  if (!(log_pitch_max > log_pitch_min)) throw ConfigError("model: empty pitch range");
  if (!(energy_max > energy_min)) throw ConfigError("model: empty energy range");
}

ModelConfig ModelConfig::desk() {
  ModelConfig c;
  c.d = 64;
  c.phoneme_blocks = 2;
  c.video_blocks = 1;
  c.decoder_blocks = 2;
  c.heads = 2;
  c.conv_kernel = 3;
  c.conv_filter = 128;
  c.encoder_dropout = 0.1;
  c.decoder_dropout = 0.1;
  c.video_feature_dim = 32;
  c.frontend_channels = 8;
  c.ise_hidden = 64;
  c.predictor_filter = 64;
  c.predictor_dropout = 0.2;
  return c;
}

}  // namespace vdub
