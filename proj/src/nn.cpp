// Copyright 2026 The vdub Authors
// SPDX-License-Identifier: Apache-2.0

#include "vdub/nn.hpp"

#include <cmath>

#include "vdub/error.hpp"

namespace vdub {

Mat sinusoid_positions(Eigen::Index rows, Eigen::Index dim) {
  Mat pe(rows, dim);
  for (Eigen::Index t = 0; t < rows; ++t) {
    for (Eigen::Index i = 0; i < dim; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
      pe(t, i) = (i % 2 == 0) ? std::sin(t * rate) : std::cos(t * rate);
    }
  }
  return pe;
}

Mat xavier_uniform(Eigen::Index in, Eigen::Index out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> u(-limit, limit);
  Mat w(in, out);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
  return w;
}

Linear::Linear(ParamStore& store, const std::string& name, int in, int out, std::mt19937_64& rng)
    : weight_(store.add(name + ".weight", xavier_uniform(in, out, rng))),
      bias_(store.add(name + ".bias", Mat::Zero(1, out))) {}

Var Linear::operator()(const Context& ctx, Var x) const {
  return ag::add_row(ag::matmul(x, ctx.p(weight_)), ctx.p(bias_));
}

LayerNorm::LayerNorm(ParamStore& store, const std::string& name, int dim)
    : gain_(store.add(name + ".gain", Mat::Ones(1, dim))),
      bias_(store.add(name + ".bias", Mat::Zero(1, dim))) {}

Var LayerNorm::operator()(const Context& ctx, Var x) const {
  return ag::layer_norm(x, ctx.p(gain_), ctx.p(bias_));
}

Conv1d::Conv1d(ParamStore& store, const std::string& name, int in, int out, int kernel, std::mt19937_64& rng)
    : in_(in), kernel_(kernel) {
  if (kernel < 1 || kernel % 2 == 0) throw ConfigError(name + ": kernel size must be odd and >= 1");
  weight_ = store.add(name + ".weight", xavier_uniform(static_cast<Eigen::Index>(kernel) * in, out, rng));
  bias_ = store.add(name + ".bias", Mat::Zero(1, out));
}

Var Conv1d::operator()(const Context& ctx, Var x) const {
  if (x.cols() != in_) throw ShapeError("conv1d: expected " + std::to_string(in_) + " input channels");
  Var cols = kernel_ == 1 ? x
                          : ag::gather(x, conv1d_index(x.rows(), in_, kernel_), x.rows(),
                                       static_cast<Eigen::Index>(kernel_) * in_);
  return ag::add_row(ag::matmul(cols, ctx.p(weight_)), ctx.p(bias_));
}

Embedding::Embedding(ParamStore& store, const std::string& name, int count, int dim, std::mt19937_64& rng)
    : count_(count) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Mat t(count, dim);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = nd(rng);
  table_ = store.add(name + ".table", std::move(t));
}

Var Embedding::operator()(const Context& ctx, const std::vector<int>& ids) const {
  for (int id : ids) {
    if (id < 0 || id >= count_) {
      throw DataError("embedding index " + std::to_string(id) + " out of range [0, " + std::to_string(count_) + ")");
    }
  }
  return ag::take_rows(ctx.p(table_), ids);
}

MultiHeadAttention::MultiHeadAttention(ParamStore& store, const std::string& name, int dim, int heads,
                                       std::mt19937_64& rng)
    : heads_(heads),
      query_(store, name + ".query", dim, dim, rng),
      key_(store, name + ".key", dim, dim, rng),
      value_(store, name + ".value", dim, dim, rng),
      out_(store, name + ".out", dim, dim, rng) {
  if (heads < 1 || dim % heads != 0) throw ConfigError(name + ": dim must be divisible by heads");
}

Var MultiHeadAttention::operator()(const Context& ctx, Var x, const Mask& key_mask) const {
  Var q = query_(ctx, x);
  Var k = key_(ctx, x);
  Var v = value_(ctx, x);
  const Eigen::Index head_dim = x.cols() / heads_;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  std::vector<Var> heads;
  heads.reserve(static_cast<std::size_t>(heads_));
  for (int h = 0; h < heads_; ++h) {
    Var qh = ag::slice_cols(q, h * head_dim, head_dim);
    Var kh = ag::slice_cols(k, h * head_dim, head_dim);
    Var vh = ag::slice_cols(v, h * head_dim, head_dim);
    Var weights = ag::softmax_rows(ag::scale(ag::matmul_nt(qh, kh), scale), &key_mask);
    heads.push_back(ag::matmul(weights, vh));
  }
  Var merged = heads_ == 1 ? heads[0] : ag::concat_cols(heads);
  return out_(ctx, merged);
}

FftBlock::FftBlock(ParamStore& store, const std::string& name, const FftBlockConfig& cfg, std::mt19937_64& rng)
    : dropout_(cfg.dropout),
      attention_(store, name + ".attention", cfg.dim, cfg.heads, rng),
      attention_norm_(store, name + ".attention_norm", cfg.dim),
      conv_in_(store, name + ".conv_in", cfg.dim, cfg.conv_filter, cfg.conv_kernel, rng),
      conv_out_(store, name + ".conv_out", cfg.conv_filter, cfg.dim, 1, rng),
      conv_norm_(store, name + ".conv_norm", cfg.dim) {}

Var FftBlock::operator()(const Context& ctx, Var x, const Mask& mask) const {
  if (static_cast<Eigen::Index>(mask.size()) != x.rows()) throw ShapeError("fft block: mask length mismatch");
  Var a = ag::dropout(ctx, attention_(ctx, x, mask), dropout_);
  Var h = ag::mask_rows(attention_norm_(ctx, ag::add(a, x)), mask);
  Var c = conv_out_(ctx, ag::relu(conv_in_(ctx, h)));
  c = ag::dropout(ctx, c, dropout_);
  return ag::mask_rows(conv_norm_(ctx, ag::add(c, h)), mask);
}

}  // namespace vdub
