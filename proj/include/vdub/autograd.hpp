// Copyright 2026 The vdub Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "vdub/tensor.hpp"

namespace vdub {

// Named, ordered collection of trainable arrays. Order is creation order and
// is what checkpoints and optimizer state are keyed on.
class ParamStore {
 public:
  std::size_t add(const std::string& name, Mat init);

  std::size_t size() const { return values_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  const Mat& value(std::size_t i) const { return values_[i]; }
  Mat& mutable_value(std::size_t i) { return values_[i]; }
  std::optional<std::size_t> find(const std::string& name) const;
  std::size_t scalar_count() const;

 private:
  std::vector<std::string> names_;
  std::vector<Mat> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

// One gradient array per ParamStore entry; an empty array means "no gradient".
using Gradients = std::vector<Mat>;

Gradients zero_gradients(const ParamStore& store);
void add_into(Gradients& acc, const Gradients& g, double scale = 1.0);

class Tape;

struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Mat& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
};

// Reverse-mode recording of one forward pass. Nodes are appended in
// evaluation order, so a reverse sweep is a valid topological order.
class Tape {
 public:
  // Receives the node's gradient and its forward value.
  using Backward = std::function<void(Tape&, const Mat& grad_out, const Mat& out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Mat v);
  Var variable(Mat v);
  // Leaf that reads the store in place; gradients are harvested by collect().
  Var param(const ParamStore& store, std::size_t index);
  Var record(Mat value, std::initializer_list<Var> parents, Backward fn);
  Var record(Mat value, std::span<const Var> parents, Backward fn);

  const Mat& value(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.external ? *n.external : n.value;
  }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  bool requires_grad(Var v) const { return requires_grad(v.id); }
  // Zero-sized when the node never received a gradient.
  const Mat& grad(Var v) const { return nodes_[v.id].grad; }

  template <typename Expr>
  void accumulate(std::size_t id, const Expr& e) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = e;
    } else {
      n.grad += e;
    }
  }

  void backward(Var root);
  // Adds scale * (param gradients) into acc.
  void collect(Gradients& acc, double scale = 1.0) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    const Mat* external = nullptr;
    Mat grad;
    bool requires_grad = false;
    std::ptrdiff_t param_index = -1;
    Backward backward;
  };

  std::deque<Node> nodes_;
};

inline const Mat& Var::value() const { return tape->value(id); }

// Forward-pass context shared by every layer.
struct Context {
  Tape& tape;
  const ParamStore& params;
  bool training = false;
  std::mt19937_64* rng = nullptr;

  Var p(std::size_t index) const { return tape.param(params, index); }
};

namespace ag {

Var matmul(Var a, Var b);
// a * b^T
Var matmul_nt(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
// Adds a 1xC row to every row of a.
Var add_row(Var a, Var row);
Var relu(Var a);
// Row softmax; columns whose key_mask entry is 0 get zero weight.
Var softmax_rows(Var a, const Mask* key_mask = nullptr);
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);
// Inverted dropout. Identity when p == 0 or ctx is not training.
Var dropout(const Context& ctx, Var a, double p);
// Zeroes rows whose mask entry is 0.
Var mask_rows(Var a, const Mask& mask);
// out.data[i] = index[i] < 0 ? 0 : a.data[index[i]] (row-major flat indices).
Var gather(Var a, std::vector<std::int64_t> index, Eigen::Index rows, Eigen::Index cols);
// out row i = a row rows[i], or zeros when rows[i] < 0.
Var take_rows(Var a, const std::vector<int>& rows);
// Nearest-neighbour upsampling along time: out row j = a row floor(j / n).
Var repeat_rows(Var a, int n);
Var concat_cols(std::span<const Var> parts);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
// Averages consecutive groups of `group` rows.
Var group_mean_rows(Var a, Eigen::Index group);
Var sum(Var a);
// Mean |pred - target| over valid rows and all columns.
Var masked_l1(Var pred, const Mat& target, const Mask& rows);
// Mean squared error of a column vector over valid rows; 0 when none valid.
Var masked_mse(Var pred, const Vec& target, const Mask& rows);
// Weighted sum of 1x1 scalars.
Var weighted_sum(std::span<const Var> terms, std::span<const double> weights);

}  // namespace ag

// Row-major im2col index for a same-padded 1-D convolution over time.
std::vector<std::int64_t> conv1d_index(Eigen::Index time, Eigen::Index channels, int kernel);

}  // namespace vdub
