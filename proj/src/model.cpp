// Copyright 2026 The vdub Authors
// SPDX-License-Identifier: Apache-2.0

#include "vdub/model.hpp"

#include "vdub/dataset.hpp"
#include "vdub/error.hpp"

namespace vdub {

Mask upsample_mask(const Mask& mask, int n) {
  Mask out;
  out.reserve(mask.size() * static_cast<std::size_t>(n));
  for (auto m : mask) out.insert(out.end(), static_cast<std::size_t>(n), m);
  return out;
}

DubbingModel::DubbingModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  phoneme_encoder_ = PhonemeEncoder(params_, cfg_, rng);
  video_encoder_ = VideoEncoder(params_, cfg_, rng);
  if (cfg_.multi_speaker) ise_ = IseMlp(params_, kFaceFeatureDim, cfg_.ise_hidden, cfg_.d, rng);
  variance_ = VarianceAdaptor(params_, cfg_, rng);
  decoder_ = MelDecoder(params_, cfg_, rng);
}

ModelOutput DubbingModel::forward(const Context& ctx, const ModelInput& in) const {
  ModelOutput out;
  out.phoneme_mask = in.phoneme_mask.empty() ? full_mask(in.phonemes.size()) : in.phoneme_mask;
  out.video_mask = in.video_mask.empty() ? full_mask(static_cast<std::size_t>(in.mouth.rows())) : in.video_mask;
  if (out.phoneme_mask.size() != in.phonemes.size()) throw ShapeError("model: phoneme mask length mismatch");
  if (static_cast<Eigen::Index>(out.video_mask.size()) != in.mouth.rows()) {
    throw ShapeError("model: video mask length mismatch");
  }
  if (cfg_.multi_speaker && !in.face) throw DataError("model: a face feature is required for a multi-speaker model");

  out.phoneme_hidden = phoneme_encoder_(ctx, in.phonemes, out.phoneme_mask);
  out.video_hidden = video_encoder_(ctx, in.mouth, out.video_mask);
  AlignerOutput al = text_video_attention(ctx, out.video_hidden, out.phoneme_hidden, out.video_mask,
                                          out.phoneme_mask, cfg_.aligner_dropout);
  out.context = al.context;
  out.attention = al.attention;
  out.mel_mask = upsample_mask(out.video_mask, cfg_.upsample);
  Var h = upsample_nearest(al.context, cfg_.upsample);
  if (cfg_.multi_speaker) h = ag::mask_rows(broadcast_add(h, ise_(ctx, *in.face)), out.mel_mask);
  out.mel_hidden = h;
  out.variance = variance_(ctx, h, out.mel_mask, in.targets ? &*in.targets : nullptr);
  out.mel = decoder_(ctx, out.variance.adapted, out.mel_mask);
  return out;
}

Inference DubbingModel::infer(const ModelInput& input) const {
  Tape tape;
  Context ctx{tape, params_, false, nullptr};
  ModelInput in = input;
  in.targets.reset();
  ModelOutput out = forward(ctx, in);
  Inference r;
  r.mel = out.mel.value();
  r.attention = out.attention.value();
  const Eigen::Index t = out.mel.rows();
  r.pitch_hz = Eigen::Map<const Vec>(out.variance.pitch_pred.value().data(), t).array().exp();
  r.energy = Eigen::Map<const Vec>(out.variance.energy_pred.value().data(), t).cwiseMax(0.0);
  if (!r.mel.allFinite()) throw NumericError("model produced non-finite mel frames");
  return r;
}

}  // namespace vdub
