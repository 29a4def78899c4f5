// Copyright 2026 The vdub Authors
// SPDX-License-Identifier: Apache-2.0

#include "vdub/acoustic.hpp"

#include <algorithm>
#include <cmath>

#include "vdub/encoders.hpp"
#include "vdub/error.hpp"

namespace vdub {

VariancePredictor::VariancePredictor(ParamStore& store, const std::string& name, const ModelConfig& cfg,
                                     std::mt19937_64& rng)
    : dropout_(cfg.predictor_dropout) {
  const std::size_t first = store.size();
  conv1_ = Conv1d(store, name + ".conv1", cfg.d, cfg.predictor_filter, cfg.predictor_kernel, rng);
  norm1_ = LayerNorm(store, name + ".norm1", cfg.predictor_filter);
  conv2_ = Conv1d(store, name + ".conv2", cfg.predictor_filter, cfg.predictor_filter, cfg.predictor_kernel, rng);
  norm2_ = LayerNorm(store, name + ".norm2", cfg.predictor_filter);
  head_ = Linear(store, name + ".head", cfg.predictor_filter, 1, rng);
  for (std::size_t i = first; i < store.size(); ++i) params_.push_back(i);
}

Var VariancePredictor::operator()(const Context& ctx, Var h, const Mask& mask) const {
  Var x = ag::mask_rows(norm1_(ctx, ag::relu(conv1_(ctx, h))), mask);
  x = ag::dropout(ctx, x, dropout_);
  x = ag::mask_rows(norm2_(ctx, ag::relu(conv2_(ctx, x))), mask);
  x = ag::dropout(ctx, x, dropout_);
  return ag::mask_rows(head_(ctx, x), mask);
}

int quantize(double value, double lo, double hi, int bins) {
  if (!std::isfinite(value)) throw NumericError("quantize: non-finite value");
  const double u = (value - lo) / (hi - lo);
  const int b = static_cast<int>(std::floor(u * bins));
  return std::clamp(b, 0, bins - 1);
}

Vec interpolated_log_pitch(const Vec& pitch_hz, double fallback) {
  const Eigen::Index n = pitch_hz.size();
  Vec out = Vec::Constant(n, fallback);
  std::vector<Eigen::Index> voiced;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (pitch_hz(i) > 0.0) voiced.push_back(i);
  }
  if (voiced.empty()) return out;
  for (Eigen::Index i : voiced) out(i) = std::log(pitch_hz(i));
  for (Eigen::Index i = 0; i < voiced.front(); ++i) out(i) = out(voiced.front());
  for (Eigen::Index i = voiced.back() + 1; i < n; ++i) out(i) = out(voiced.back());
  for (std::size_t v = 0; v + 1 < voiced.size(); ++v) {
    const Eigen::Index a = voiced[v], b = voiced[v + 1];
    for (Eigen::Index i = a + 1; i < b; ++i) {
      const double w = static_cast<double>(i - a) / static_cast<double>(b - a);
      out(i) = (1.0 - w) * out(a) + w * out(b);
    }
  }
  return out;
}

VarianceAdaptor::VarianceAdaptor(ParamStore& store, const ModelConfig& cfg, std::mt19937_64& rng)
    : cfg_(cfg),
      pitch_(store, "variance.pitch", cfg, rng),
      energy_(store, "variance.energy", cfg, rng),
      pitch_embedding_(store, "variance.pitch_embedding", cfg.variance_bins, cfg.d, rng),
      energy_embedding_(store, "variance.energy_embedding", cfg.variance_bins, cfg.d, rng) {}

VarianceOutputs VarianceAdaptor::operator()(const Context& ctx, Var h, const Mask& mask,
                                            const VarianceTargets* targets) const {
  const Eigen::Index t = h.rows();
  if (static_cast<Eigen::Index>(mask.size()) != t) throw ShapeError("variance adaptor: mask length mismatch");
  if (ctx.training && !targets) throw DataError("variance adaptor: training requires pitch and energy targets");
  if (targets && (targets->pitch_hz.size() != t || targets->energy.size() != t)) {
    throw ShapeError("variance adaptor: target length differs from hidden length " + std::to_string(t));
  }
  VarianceOutputs out;
  out.pitch_pred = pitch_(ctx, h, mask);
  out.energy_pred = energy_(ctx, h, mask);

  Vec log_pitch, energy;
  if (targets) {
    log_pitch = interpolated_log_pitch(targets->pitch_hz, cfg_.log_pitch_min);
    energy = targets->energy;
  } else {
    log_pitch = Eigen::Map<const Vec>(out.pitch_pred.value().data(), t);
    energy = Eigen::Map<const Vec>(out.energy_pred.value().data(), t);
  }
  out.pitch_bins.resize(static_cast<std::size_t>(t));
  out.energy_bins.resize(static_cast<std::size_t>(t));
  for (Eigen::Index i = 0; i < t; ++i) {
    const auto k = static_cast<std::size_t>(i);
    out.pitch_bins[k] = quantize(log_pitch(i), cfg_.log_pitch_min, cfg_.log_pitch_max, cfg_.variance_bins);
    out.energy_bins[k] = quantize(energy(i), cfg_.energy_min, cfg_.energy_max, cfg_.variance_bins);
  }
  Var cond = ag::add(pitch_embedding_(ctx, out.pitch_bins), energy_embedding_(ctx, out.energy_bins));
  out.adapted = ag::mask_rows(ag::add(h, cond), mask);
  return out;
}

MelDecoder::MelDecoder(ParamStore& store, const ModelConfig& cfg, std::mt19937_64& rng) : d_(cfg.d) {
  for (int i = 0; i < cfg.decoder_blocks; ++i) {
    blocks_.emplace_back(store, "decoder.block." + std::to_string(i), cfg.decoder_block(), rng);
  }
  projection_ = Linear(store, "decoder.projection", cfg.d, cfg.n_mels, rng);
}

Var MelDecoder::operator()(const Context& ctx, Var adapted, const Mask& mask) const {
  if (adapted.cols() != d_) throw ShapeError("mel decoder: expected hidden size " + std::to_string(d_));
  Var h = add_positions(ctx, adapted, mask);
  for (const auto& b : blocks_) h = b(ctx, h, mask);
  return ag::mask_rows(projection_(ctx, h), mask);
}

}  // namespace vdub
