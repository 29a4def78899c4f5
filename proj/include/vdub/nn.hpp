// Copyright 2026 The vdub Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <random>
#include <string>
#include <vector>

#include "vdub/autograd.hpp"

namespace vdub {

// Sinusoidal position table, rows x dim.
Mat sinusoid_positions(Eigen::Index rows, Eigen::Index dim);

Mat xavier_uniform(Eigen::Index in, Eigen::Index out, std::mt19937_64& rng);

class Linear {
 public:
  Linear() = default;
  Linear(ParamStore& store, const std::string& name, int in, int out, std::mt19937_64& rng);

  Var operator()(const Context& ctx, Var x) const;
  std::size_t weight() const { return weight_; }
  std::size_t bias() const { return bias_; }

 private:
  std::size_t weight_ = 0;
  std::size_t bias_ = 0;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParamStore& store, const std::string& name, int dim);

  Var operator()(const Context& ctx, Var x) const;

 private:
  std::size_t gain_ = 0;
  std::size_t bias_ = 0;
};

// Same-padded convolution over time; input rows are frames, columns channels.
class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(ParamStore& store, const std::string& name, int in, int out, int kernel, std::mt19937_64& rng);

  Var operator()(const Context& ctx, Var x) const;
  std::size_t weight() const { return weight_; }
  std::size_t bias() const { return bias_; }

 private:
  int in_ = 0;
  int kernel_ = 1;
  std::size_t weight_ = 0;
  std::size_t bias_ = 0;
};

class Embedding {
 public:
  Embedding() = default;
  Embedding(ParamStore& store, const std::string& name, int count, int dim, std::mt19937_64& rng);

  Var operator()(const Context& ctx, const std::vector<int>& ids) const;
  int count() const { return count_; }

 private:
  int count_ = 0;
  std::size_t table_ = 0;
};

class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(ParamStore& store, const std::string& name, int dim, int heads, std::mt19937_64& rng);

  // Self-attention; key_mask hides padded positions.
  Var operator()(const Context& ctx, Var x, const Mask& key_mask) const;

 private:
  int heads_ = 1;
  Linear query_, key_, value_, out_;
};

struct FftBlockConfig {
  int dim = 256;
  int heads = 2;
  int conv_kernel = 9;
  int conv_filter = 1024;
  double dropout = 0.2;
};

// Feed-forward transformer block: self-attention then a two-layer 1-D
// convolution (kernel k then 1), each followed by residual + layer norm.
// Padded rows are zeroed after every sub-layer.
class FftBlock {
 public:
  FftBlock() = default;
  FftBlock(ParamStore& store, const std::string& name, const FftBlockConfig& cfg, std::mt19937_64& rng);

  Var operator()(const Context& ctx, Var x, const Mask& mask) const;

 private:
  double dropout_ = 0.0;
  MultiHeadAttention attention_;
  LayerNorm attention_norm_;
  Conv1d conv_in_;
  Conv1d conv_out_;
  LayerNorm conv_norm_;
};

}  // namespace vdub
