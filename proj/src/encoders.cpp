// Copyright 2026 The vdub Authors
// SPDX-License-Identifier: Apache-2.0

#include "vdub/encoders.hpp"

#include <string>

#include "vdub/error.hpp"

namespace vdub {

namespace {

// Crop frontend geometry: 3-D conv 5x7x7, stride 1x4x4, pad 2x3x3 (96 -> 24),
// then 2-D conv 3x3, stride 2, pad 1 (24 -> 12).
constexpr int kT3 = 5, kK3 = 7, kS3 = 4, kP3 = 3;
constexpr int kOut3 = (kCropSize + 2 * kP3 - kK3) / kS3 + 1;
constexpr int kK2 = 3, kS2 = 2, kP2 = 1;
constexpr int kOut2 = (kOut3 + 2 * kP2 - kK2) / kS2 + 1;

std::vector<std::int64_t> conv3d_index(Eigen::Index frames) {
  const std::int64_t cols = kT3 * kK3 * kK3;
  std::vector<std::int64_t> idx(static_cast<std::size_t>(frames * kOut3 * kOut3 * cols), -1);
  std::size_t o = 0;
  for (Eigen::Index t = 0; t < frames; ++t) {
    for (int oy = 0; oy < kOut3; ++oy) {
      for (int ox = 0; ox < kOut3; ++ox) {
        for (int kt = 0; kt < kT3; ++kt) {
          const Eigen::Index st = t + kt - kT3 / 2;
          for (int ky = 0; ky < kK3; ++ky) {
            const int sy = oy * kS3 + ky - kP3;
            for (int kx = 0; kx < kK3; ++kx, ++o) {
              const int sx = ox * kS3 + kx - kP3;
              if (st < 0 || st >= frames || sy < 0 || sy >= kCropSize || sx < 0 || sx >= kCropSize) continue;
              idx[o] = (st * kCropSize + sy) * kCropSize + sx;
            }
          }
        }
      }
    }
  }
  return idx;
}

std::vector<std::int64_t> conv2d_index(Eigen::Index frames, int channels) {
  std::vector<std::int64_t> idx(static_cast<std::size_t>(frames * kOut2 * kOut2 * kK2 * kK2 * channels), -1);
  std::size_t o = 0;
  for (Eigen::Index t = 0; t < frames; ++t) {
    for (int oy = 0; oy < kOut2; ++oy) {
      for (int ox = 0; ox < kOut2; ++ox) {
        for (int ky = 0; ky < kK2; ++ky) {
          const int sy = oy * kS2 + ky - kP2;
          for (int kx = 0; kx < kK2; ++kx) {
            const int sx = ox * kS2 + kx - kP2;
            const bool inside = sy >= 0 && sy < kOut3 && sx >= 0 && sx < kOut3;
            for (int c = 0; c < channels; ++c, ++o) {
              if (inside) idx[o] = ((t * kOut3 + sy) * kOut3 + sx) * channels + c;
            }
          }
        }
      }
    }
  }
  return idx;
}

std::vector<FftBlock> make_blocks(ParamStore& store, const std::string& prefix, int count,
                                  const FftBlockConfig& cfg, std::mt19937_64& rng) {
  std::vector<FftBlock> blocks;
  for (int i = 0; i < count; ++i) blocks.emplace_back(store, prefix + "." + std::to_string(i), cfg, rng);
  return blocks;
}

}  // namespace

Var add_positions(const Context& ctx, Var x, const Mask& mask) {
  if (static_cast<Eigen::Index>(mask.size()) != x.rows()) throw ShapeError("mask length does not match sequence");
  Var pe = ctx.tape.constant(sinusoid_positions(x.rows(), x.cols()));
  return ag::mask_rows(ag::add(x, pe), mask);
}

PhonemeEncoder::PhonemeEncoder(ParamStore& store, const ModelConfig& cfg, std::mt19937_64& rng)
    : embedding_(store, "phoneme.embedding", cfg.vocab_size, cfg.d, rng),
      blocks_(make_blocks(store, "phoneme.block", cfg.phoneme_blocks, cfg.encoder_block(), rng)) {}

Var PhonemeEncoder::operator()(const Context& ctx, const std::vector<int>& ids, const Mask& mask) const {
  if (ids.empty()) throw DataError("phoneme encoder: empty sequence");
  Var h = add_positions(ctx, embedding_(ctx, ids), mask);
  for (const auto& b : blocks_) h = b(ctx, h, mask);
  return h;
}

VideoEncoder::VideoEncoder(ParamStore& store, const ModelConfig& cfg, std::mt19937_64& rng)
    : kind_(cfg.video_input), feature_dim_(cfg.video_feature_dim), channels_(cfg.frontend_channels) {
  if (kind_ == MouthKind::kCrops) {
    conv3d_weight_ = store.add("video.conv3d.weight", xavier_uniform(kT3 * kK3 * kK3, channels_, rng));
    conv3d_bias_ = store.add("video.conv3d.bias", Mat::Zero(1, channels_));
    conv2d_weight_ = store.add("video.conv2d.weight", xavier_uniform(kK2 * kK2 * channels_, feature_dim_, rng));
    conv2d_bias_ = store.add("video.conv2d.bias", Mat::Zero(1, feature_dim_));
  }
  project_ = Linear(store, "video.project", feature_dim_, cfg.d, rng);
  blocks_ = make_blocks(store, "video.block", cfg.video_blocks, cfg.encoder_block(), rng);
}

Var VideoEncoder::frontend(const Context& ctx, Var crops) const {
  const Eigen::Index frames = crops.rows();
  if (crops.cols() != kCropSize * kCropSize) {
    throw ShapeError("video encoder: mouth crops must be " + std::to_string(kCropSize) + "x" +
                     std::to_string(kCropSize) + ", got " + std::to_string(crops.cols()) + " pixels per frame");
  }
  Var c3 = ag::gather(crops, conv3d_index(frames), frames * kOut3 * kOut3, kT3 * kK3 * kK3);
  Var h3 = ag::relu(ag::add_row(ag::matmul(c3, ctx.p(conv3d_weight_)), ctx.p(conv3d_bias_)));
  Var c2 = ag::gather(h3, conv2d_index(frames, channels_), frames * kOut2 * kOut2, kK2 * kK2 * channels_);
  Var h2 = ag::relu(ag::add_row(ag::matmul(c2, ctx.p(conv2d_weight_)), ctx.p(conv2d_bias_)));
  return ag::group_mean_rows(h2, kOut2 * kOut2);
}

Var VideoEncoder::operator()(const Context& ctx, const Mat& mouth, const Mask& mask) const {
  if (mouth.rows() < 1) throw DataError("video encoder: no video frames");
  Var x = ctx.tape.constant(mouth);
  if (kind_ == MouthKind::kCrops) {
    x = frontend(ctx, x);
  } else if (mouth.cols() != feature_dim_) {
    throw ShapeError("video encoder: expected " + std::to_string(feature_dim_) + " features per frame, got " +
                     std::to_string(mouth.cols()));
  }
  Var h = add_positions(ctx, project_(ctx, x), mask);
  for (const auto& b : blocks_) h = b(ctx, h, mask);
  return h;
}

}  // namespace vdub
