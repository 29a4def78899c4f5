// Copyright 2026 The vdub Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "vdub/acoustic.hpp"
#include "vdub/aligner.hpp"
#include "vdub/encoders.hpp"
#include "vdub/speaker.hpp"

namespace vdub {

struct ModelInput {
  std::vector<int> phonemes;
  Mask phoneme_mask;  // empty means all real
  Mat mouth;          // T_v rows
  Mask video_mask;    // empty means all real
  std::optional<Vec> face;  // 4096-D; required iff the model is multi-speaker
  std::optional<VarianceTargets> targets;  // length n * T_v
};

struct ModelOutput {
  Var phoneme_hidden;  // H_pho
  Var video_hidden;    // H_vid
  Var context;         // H_con
  Var attention;       // A
  Var mel_hidden;      // H_mel after the speaker embedding
  VarianceOutputs variance;
  Var mel;             // n*T_v x n_mels
  Mask phoneme_mask;
  Mask video_mask;
  Mask mel_mask;
};

struct Inference {
  Mat mel;
  Mat attention;
  Vec pitch_hz;
  Vec energy;
};

class DubbingModel {
 public:
  DubbingModel(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  ModelOutput forward(const Context& ctx, const ModelInput& input) const;
  // Evaluation-mode forward pass without targets.
  Inference infer(const ModelInput& input) const;

  const VarianceAdaptor& variance() const { return variance_; }
  const MelDecoder& decoder() const { return decoder_; }
  const IseMlp& ise() const { return ise_; }

 private:
  ModelConfig cfg_;
  ParamStore params_;
  PhonemeEncoder phoneme_encoder_;
  VideoEncoder video_encoder_;
  IseMlp ise_;
  VarianceAdaptor variance_;
  MelDecoder decoder_;
};

Mask upsample_mask(const Mask& mask, int n);

}  // namespace vdub
