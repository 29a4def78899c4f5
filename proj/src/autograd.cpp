// Copyright 2026 The vdub Authors
// SPDX-License-Identifier: Apache-2.0

#include "vdub/autograd.hpp"

#include <cmath>
#include <limits>

#include "vdub/error.hpp"

namespace vdub {

std::size_t ParamStore::add(const std::string& name, Mat init) {
  if (index_.count(name)) throw ConfigError("duplicate parameter name: " + name);
  index_.emplace(name, values_.size());
  names_.push_back(name);
  values_.push_back(std::move(init));
  return values_.size() - 1;
}

std::optional<std::size_t> ParamStore::find(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += static_cast<std::size_t>(v.size());
  return n;
}

Gradients zero_gradients(const ParamStore& store) {
  Gradients g(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    g[i] = Mat::Zero(store.value(i).rows(), store.value(i).cols());
  }
  return g;
}

void add_into(Gradients& acc, const Gradients& g, double scale) {
  if (acc.size() != g.size()) throw ShapeError("gradient set size mismatch");
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i].size() == 0) continue;
    if (acc[i].size() == 0) {
      acc[i] = scale * g[i];
    } else {
      acc[i] += scale * g[i];
    }
  }
}

Var Tape::constant(Mat v) {
  Node n;
  n.value = std::move(v);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::variable(Mat v) {
  Node n;
  n.value = std::move(v);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::param(const ParamStore& store, std::size_t index) {
  Node n;
  n.external = &store.value(index);
  n.requires_grad = true;
  n.param_index = static_cast<std::ptrdiff_t>(index);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::record(Mat value, std::initializer_list<Var> parents, Backward fn) {
  return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()),
                std::move(fn));
}

Var Tape::record(Mat value, std::span<const Var> parents, Backward fn) {
  Node n;
  n.value = std::move(value);
  for (const Var& p : parents) {
    if (nodes_[p.id].requires_grad) {
      n.requires_grad = true;
      break;
    }
  }
  if (n.requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

void Tape::backward(Var root) {
  Node& r = nodes_[root.id];
  if (!r.requires_grad) return;
  const Mat& rv = value(root.id);
  accumulate(root.id, Mat::Ones(rv.rows(), rv.cols()));
  for (std::size_t i = root.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.size() == 0) continue;
    n.backward(*this, n.grad, value(i));
  }
}

void Tape::collect(Gradients& acc, double scale) const {
  for (const Node& n : nodes_) {
    if (n.param_index < 0 || n.grad.size() == 0) continue;
    Mat& dst = acc[static_cast<std::size_t>(n.param_index)];
    if (dst.size() == 0) {
      dst = scale * n.grad;
    } else {
      dst += scale * n.grad;
    }
  }
}

namespace ag {
namespace {

void require_same_shape(const Mat& a, const Mat& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
}

void require_mask(const Mask& m, Eigen::Index n, const char* op) {
  if (static_cast<Eigen::Index>(m.size()) != n) {
    throw ShapeError(std::string(op) + ": mask length " + std::to_string(m.size()) +
                     " does not match " + std::to_string(n) + " rows");
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  const Mat& av = a.value();
  const Mat& bv = b.value();
  if (av.cols() != bv.rows()) throw ShapeError("matmul: inner dimension mismatch");
  Mat out = av * bv;
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, const Mat& g, const Mat&) {
    if (t.requires_grad(a)) t.accumulate(a.id, g * t.value(b.id).transpose());
    if (t.requires_grad(b)) t.accumulate(b.id, t.value(a.id).transpose() * g);
  });
}

Var matmul_nt(Var a, Var b) {
  const Mat& av = a.value();
  const Mat& bv = b.value();
  if (av.cols() != bv.cols()) throw ShapeError("matmul_nt: inner dimension mismatch");
  Mat out = av * bv.transpose();
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, const Mat& g, const Mat&) {
    if (t.requires_grad(a)) t.accumulate(a.id, g * t.value(b.id));
    if (t.requires_grad(b)) t.accumulate(b.id, g.transpose() * t.value(a.id));
  });
}

Var add(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "add");
  Mat out = a.value() + b.value();
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, const Mat& g, const Mat&) {
    t.accumulate(a.id, g);
    t.accumulate(b.id, g);
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "sub");
  Mat out = a.value() - b.value();
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, const Mat& g, const Mat&) {
    t.accumulate(a.id, g);
    t.accumulate(b.id, -g);
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "mul");
  Mat out = a.value().cwiseProduct(b.value());
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, const Mat& g, const Mat&) {
    if (t.requires_grad(a)) t.accumulate(a.id, g.cwiseProduct(t.value(b.id)));
    if (t.requires_grad(b)) t.accumulate(b.id, g.cwiseProduct(t.value(a.id)));
  });
}

Var scale(Var a, double s) {
  Mat out = a.value() * s;
  return a.tape->record(std::move(out), {a},
                        [a, s](Tape& t, const Mat& g, const Mat&) { t.accumulate(a.id, g * s); });
}

Var add_row(Var a, Var row) {
  const Mat& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != a.cols()) throw ShapeError("add_row: expected 1xC row");
  Mat out = a.value().rowwise() + rv.row(0);
  return a.tape->record(std::move(out), {a, row}, [a, row](Tape& t, const Mat& g, const Mat&) {
    t.accumulate(a.id, g);
    if (t.requires_grad(row)) t.accumulate(row.id, g.colwise().sum());
  });
}

Var relu(Var a) {
  Mat out = a.value().cwiseMax(0.0);
  return a.tape->record(std::move(out), {a}, [a](Tape& t, const Mat& g, const Mat& y) {
    t.accumulate(a.id, (y.array() > 0.0).select(g, 0.0));
  });
}

Var softmax_rows(Var a, const Mask* key_mask) {
  const Mat& x = a.value();
  if (key_mask && static_cast<Eigen::Index>(key_mask->size()) != x.cols()) {
    throw ShapeError("softmax_rows: key mask length mismatch");
  }
  Mat y(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (key_mask && !(*key_mask)[j]) continue;
      any = true;
      if (!std::isfinite(x(i, j))) throw NumericError("softmax_rows: non-finite logit");
      mx = std::max(mx, x(i, j));
    }
    if (!any) throw ShapeError("softmax_rows: fully masked row");
    double z = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      double e = (key_mask && !(*key_mask)[j]) ? 0.0 : std::exp(x(i, j) - mx);
      y(i, j) = e;
      z += e;
    }
    y.row(i) /= z;
  }
  return a.tape->record(std::move(y), {a}, [a](Tape& t, const Mat& g, const Mat& y) {
    Mat gy = g.cwiseProduct(y);
    Eigen::VectorXd dots = gy.rowwise().sum();
    t.accumulate(a.id, gy - y.cwiseProduct(dots.replicate(1, y.cols())));
  });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  const Mat& xv = x.value();
  const Eigen::Index n = xv.cols();
  if (gamma.rows() != 1 || gamma.cols() != n || beta.rows() != 1 || beta.cols() != n) {
    throw ShapeError("layer_norm: gain/bias must be 1xC");
  }
  Mat xhat(xv.rows(), n);
  Eigen::VectorXd rstd(xv.rows());
  for (Eigen::Index i = 0; i < xv.rows(); ++i) {
    double mu = xv.row(i).mean();
    double var = (xv.row(i).array() - mu).square().mean();
    rstd(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (xv.row(i).array() - mu) * rstd(i);
  }
  Mat out = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() +
            beta.value().row(0).array();
  return x.tape->record(
      std::move(out), {x, gamma, beta},
      [x, gamma, beta, xhat = std::move(xhat), rstd = std::move(rstd)](Tape& t, const Mat& g,
                                                                        const Mat&) {
        if (t.requires_grad(gamma)) t.accumulate(gamma.id, g.cwiseProduct(xhat).colwise().sum());
        if (t.requires_grad(beta)) t.accumulate(beta.id, g.colwise().sum());
        if (t.requires_grad(x)) {
          const double inv_n = 1.0 / static_cast<double>(g.cols());
          Mat dy = g.array().rowwise() * t.value(gamma.id).row(0).array();
          Mat dx(g.rows(), g.cols());
          for (Eigen::Index i = 0; i < g.rows(); ++i) {
            double m1 = dy.row(i).sum() * inv_n;
            double m2 = dy.row(i).dot(xhat.row(i)) * inv_n;
            dx.row(i) = rstd(i) * (dy.row(i).array() - m1 - xhat.row(i).array() * m2);
          }
          t.accumulate(x.id, dx);
        }
      });
}

Var dropout(const Context& ctx, Var a, double p) {
  if (!ctx.training || p <= 0.0) return a;
  if (p >= 1.0) throw ConfigError("dropout rate must be < 1");
  if (!ctx.rng) throw ConfigError("dropout in training mode needs an RNG");
  std::bernoulli_distribution keep(1.0 - p);
  const double s = 1.0 / (1.0 - p);
  Mat m(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = keep(*ctx.rng) ? s : 0.0;
  Mat out = a.value().cwiseProduct(m);
  return a.tape->record(std::move(out), {a}, [a, m = std::move(m)](Tape& t, const Mat& g,
                                                                    const Mat&) {
    t.accumulate(a.id, g.cwiseProduct(m));
  });
}

Var mask_rows(Var a, const Mask& mask) {
  require_mask(mask, a.rows(), "mask_rows");
  Mat out = a.value();
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    if (!mask[i]) out.row(i).setZero();
  }
  return a.tape->record(std::move(out), {a}, [a, mask](Tape& t, const Mat& g, const Mat&) {
    Mat gm = g;
    for (Eigen::Index i = 0; i < gm.rows(); ++i) {
      if (!mask[i]) gm.row(i).setZero();
    }
    t.accumulate(a.id, gm);
  });
}

Var gather(Var a, std::vector<std::int64_t> index, Eigen::Index rows, Eigen::Index cols) {
  if (static_cast<Eigen::Index>(index.size()) != rows * cols) {
    throw ShapeError("gather: index size does not match output shape");
  }
  const Mat& av = a.value();
  const std::int64_t limit = av.size();
  Mat out(rows, cols);
  for (std::size_t i = 0; i < index.size(); ++i) {
    const std::int64_t k = index[i];
    if (k >= limit) throw ShapeError("gather: index out of range");
    out.data()[i] = k < 0 ? 0.0 : av.data()[k];
  }
  return a.tape->record(std::move(out), {a},
                        [a, index = std::move(index)](Tape& t, const Mat& g, const Mat&) {
                          const Mat& av = t.value(a.id);
                          Mat ga = Mat::Zero(av.rows(), av.cols());
                          for (std::size_t i = 0; i < index.size(); ++i) {
                            if (index[i] >= 0) ga.data()[index[i]] += g.data()[i];
                          }
                          t.accumulate(a.id, ga);
                        });
}

Var take_rows(Var a, const std::vector<int>& rows) {
  const Mat& av = a.value();
  Mat out(static_cast<Eigen::Index>(rows.size()), av.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= av.rows()) throw ShapeError("take_rows: row index out of range");
    if (rows[i] < 0) {
      out.row(static_cast<Eigen::Index>(i)).setZero();
    } else {
      out.row(static_cast<Eigen::Index>(i)) = av.row(rows[i]);
    }
  }
  return a.tape->record(std::move(out), {a}, [a, rows](Tape& t, const Mat& g, const Mat&) {
    const Mat& av = t.value(a.id);
    Mat ga = Mat::Zero(av.rows(), av.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i] >= 0) ga.row(rows[i]) += g.row(static_cast<Eigen::Index>(i));
    }
    t.accumulate(a.id, ga);
  });
}

Var repeat_rows(Var a, int n) {
  if (n < 1) throw ShapeError("repeat_rows: factor must be >= 1");
  const Mat& av = a.value();
  Mat out(av.rows() * n, av.cols());
  for (Eigen::Index j = 0; j < out.rows(); ++j) out.row(j) = av.row(j / n);
  return a.tape->record(std::move(out), {a}, [a, n](Tape& t, const Mat& g, const Mat&) {
    Mat ga = Mat::Zero(g.rows() / n, g.cols());
    for (Eigen::Index j = 0; j < g.rows(); ++j) ga.row(j / n) += g.row(j);
    t.accumulate(a.id, ga);
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const Var& v : parts) {
    if (v.rows() != rows) throw ShapeError("concat_cols: row count mismatch");
    cols += v.cols();
  }
  Mat out(rows, cols);
  std::vector<Var> keep(parts.begin(), parts.end());
  Eigen::Index c = 0;
  for (const Var& v : parts) {
    out.middleCols(c, v.cols()) = v.value();
    c += v.cols();
  }
  return parts[0].tape->record(std::move(out), parts, [keep](Tape& t, const Mat& g, const Mat&) {
    Eigen::Index c = 0;
    for (const Var& v : keep) {
      const Eigen::Index w = t.value(v.id).cols();
      if (t.requires_grad(v)) t.accumulate(v.id, g.middleCols(c, w));
      c += w;
    }
  });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw ShapeError("slice_cols: out of range");
  Mat out = a.value().middleCols(start, count);
  return a.tape->record(std::move(out), {a}, [a, start, count](Tape& t, const Mat& g, const Mat&) {
    const Mat& av = t.value(a.id);
    Mat ga = Mat::Zero(av.rows(), av.cols());
    ga.middleCols(start, count) = g;
    t.accumulate(a.id, ga);
  });
}

Var group_mean_rows(Var a, Eigen::Index group) {
  const Mat& av = a.value();
  if (group < 1 || av.rows() % group != 0) throw ShapeError("group_mean_rows: bad group size");
  const Eigen::Index n = av.rows() / group;
  Mat out(n, av.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    out.row(i) = av.middleRows(i * group, group).colwise().mean();
  }
  return a.tape->record(std::move(out), {a}, [a, group](Tape& t, const Mat& g, const Mat&) {
    Mat ga(g.rows() * group, g.cols());
    const double inv = 1.0 / static_cast<double>(group);
    for (Eigen::Index i = 0; i < ga.rows(); ++i) ga.row(i) = g.row(i / group) * inv;
    t.accumulate(a.id, ga);
  });
}

Var sum(Var a) {
  Mat out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape->record(std::move(out), {a}, [a](Tape& t, const Mat& g, const Mat&) {
    const Mat& av = t.value(a.id);
    t.accumulate(a.id, Mat::Constant(av.rows(), av.cols(), g(0, 0)));
  });
}

Var masked_l1(Var pred, const Mat& target, const Mask& rows) {
  require_same_shape(pred.value(), target, "masked_l1");
  require_mask(rows, target.rows(), "masked_l1");
  const std::size_t valid = count_valid(rows);
  if (valid == 0) throw ShapeError("masked_l1: empty mask");
  const double norm = 1.0 / static_cast<double>(valid * static_cast<std::size_t>(target.cols()));
  Mat sign = Mat::Zero(target.rows(), target.cols());
  double acc = 0.0;
  const Mat& p = pred.value();
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    if (!rows[i]) continue;
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      const double d = p(i, j) - target(i, j);
      acc += std::abs(d);
      sign(i, j) = d > 0.0 ? norm : (d < 0.0 ? -norm : 0.0);
    }
  }
  Mat out(1, 1);
  out(0, 0) = acc * norm;
  return pred.tape->record(std::move(out), {pred},
                           [pred, sign = std::move(sign)](Tape& t, const Mat& g, const Mat&) {
                             t.accumulate(pred.id, sign * g(0, 0));
                           });
}

Var masked_mse(Var pred, const Vec& target, const Mask& rows) {
  const Mat& p = pred.value();
  if (p.cols() != 1 || p.rows() != target.size()) throw ShapeError("masked_mse: expected Tx1 prediction");
  require_mask(rows, p.rows(), "masked_mse");
  const std::size_t valid = count_valid(rows);
  Mat diff = Mat::Zero(p.rows(), 1);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    if (!rows[i]) continue;
    diff(i, 0) = p(i, 0) - target(i);
    acc += diff(i, 0) * diff(i, 0);
  }
  Mat out = Mat::Zero(1, 1);
  if (valid > 0) {
    out(0, 0) = acc / static_cast<double>(valid);
    diff *= 2.0 / static_cast<double>(valid);
  }
  return pred.tape->record(std::move(out), {pred},
                           [pred, diff = std::move(diff)](Tape& t, const Mat& g, const Mat&) {
                             t.accumulate(pred.id, diff * g(0, 0));
                           });
}

Var weighted_sum(std::span<const Var> terms, std::span<const double> weights) {
  if (terms.empty() || terms.size() != weights.size()) throw ShapeError("weighted_sum: size mismatch");
  Mat out = Mat::Zero(1, 1);
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (terms[i].rows() != 1 || terms[i].cols() != 1) throw ShapeError("weighted_sum: expected scalars");
    out(0, 0) += weights[i] * terms[i].scalar();
  }
  std::vector<Var> keep(terms.begin(), terms.end());
  std::vector<double> w(weights.begin(), weights.end());
  return terms[0].tape->record(std::move(out), terms, [keep, w](Tape& t, const Mat& g, const Mat&) {
    for (std::size_t i = 0; i < keep.size(); ++i) t.accumulate(keep[i].id, g * w[i]);
  });
}

}  // namespace ag

std::vector<std::int64_t> conv1d_index(Eigen::Index time, Eigen::Index channels, int kernel) {
  const int half = kernel / 2;
  std::vector<std::int64_t> idx(static_cast<std::size_t>(time * kernel * channels));
  std::size_t o = 0;
  for (Eigen::Index t = 0; t < time; ++t) {
    for (int k = 0; k < kernel; ++k) {
      const Eigen::Index src = t + k - half;
      for (Eigen::Index c = 0; c < channels; ++c) {
        idx[o++] = (src < 0 || src >= time) ? -1 : src * channels + c;
      }
    }
  }
  return idx;
}

}  // namespace vdub
