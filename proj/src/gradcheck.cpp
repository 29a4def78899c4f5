// Copyright 2026 The vdub Authors
// SPDX-License-Identifier: Apache-2.0

#include "vdub/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "vdub/acoustic.hpp"
#include "vdub/aligner.hpp"
#include "vdub/dataset.hpp"
#include "vdub/error.hpp"
#include "vdub/speaker.hpp"

namespace vdub {

double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

namespace {

struct Probe {
  GradCheckResult result;
  double eps;

  // f0 is the unperturbed value; fp/fm at +eps/-eps.
  void add(double analytic, double fp, double f0, double fm) {
    const double fwd = (fp - f0) / eps, bwd = (f0 - fm) / eps;
    if (std::abs(fwd - bwd) > 1e-3 * std::max({std::abs(fwd), std::abs(bwd), 1e-3})) {
      ++result.skipped;
      return;
    }
    result.max_rel_error = std::max(result.max_rel_error, relative_error(analytic, (fp - fm) / (2.0 * eps)));
    ++result.checked;
  }
};

Mat random_mat(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
  return m;
}

}  // namespace

GradCheckResult gradient_check(const LeafGraph& f, std::vector<Mat> inputs, double eps) {
  auto evaluate = [&](bool backward, std::vector<Mat>* grads) {
    Tape tape;
    std::vector<Var> leaves;
    for (const Mat& m : inputs) leaves.push_back(tape.variable(m));
    Var out = f(tape, leaves);
    if (out.rows() != 1 || out.cols() != 1) throw ShapeError("gradient_check: graph must produce a scalar");
    if (backward) {
      tape.backward(out);
      for (const Var& l : leaves) {
        const Mat& g = tape.grad(l);
        grads->push_back(g.size() ? g : Mat::Zero(l.rows(), l.cols()));
      }
    }
    return out.scalar();
  };
  std::vector<Mat> grads;
  const double f0 = evaluate(true, &grads);
  Probe probe{{}, eps};
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (Eigen::Index i = 0; i < inputs[k].size(); ++i) {
      double& x = inputs[k].data()[i];
      const double keep = x;
      x = keep + eps;
      const double fp = evaluate(false, nullptr);
      x = keep - eps;
      const double fm = evaluate(false, nullptr);
      x = keep;
      probe.add(grads[k].data()[i], fp, f0, fm);
    }
  }
  return probe.result;
}

GradCheckResult gradient_check_params(const ParamGraph& f, ParamStore& store, std::span<const std::size_t> params,
                                      double eps, std::size_t max_entries) {
  auto evaluate = [&](Gradients* grads) {
    Tape tape;
    Context ctx{tape, store, false, nullptr};
    Var out = f(ctx);
    if (out.rows() != 1 || out.cols() != 1) throw ShapeError("gradient_check: graph must produce a scalar");
    if (grads) {
      tape.backward(out);
      *grads = zero_gradients(store);
      tape.collect(*grads);
    }
    return out.scalar();
  };
  Gradients grads;
  const double f0 = evaluate(&grads);
  Probe probe{{}, eps};
  for (std::size_t p : params) {
    Mat& value = store.mutable_value(p);
    const auto n = static_cast<std::size_t>(value.size());
    const std::size_t stride = std::max<std::size_t>(1, n / std::max<std::size_t>(1, max_entries));
    for (std::size_t i = 0; i < n; i += stride) {
      double& x = value.data()[i];
      const double keep = x;
      x = keep + eps;
      const double fp = evaluate(nullptr);
      x = keep - eps;
      const double fm = evaluate(nullptr);
      x = keep;
      const double analytic = grads[p].size() ? grads[p].data()[i] : 0.0;
      probe.add(analytic, fp, f0, fm);
    }
  }
  return probe.result;
}

std::vector<std::string> gradient_check_subgraphs() {
  return {"aligner-dc", "ise", "variance-adaptor", "mel-l1", "fft-block"};
}

GradCheckResult gradient_check(const std::string& subgraph, std::uint64_t seed, double eps) {
  std::mt19937_64 rng(seed);
  if (subgraph == "aligner-dc") {
    const ParamStore none;
    // Attention over 3 video rows and 5 phonemes; the probe is the DC loss
    // plus a random projection of H_con so both outputs are exercised.
    const Mat probe = random_mat(3, 4, rng);
    const Mask vm = full_mask(3), pm = full_mask(5);
    auto f = [&](Tape& tape, std::span<const Var> in) {
      Context c{tape, none, false, nullptr};
      AlignerOutput al = text_video_attention(c, in[0], in[1], vm, pm, 0.5);
      Var dc = diagonal_constraint_loss(al.attention, 1.0, &vm, &pm);
      Var proj = ag::sum(ag::mul(al.context, tape.constant(probe)));
      return ag::add(dc, ag::scale(proj, 0.1));
    };
    return gradient_check(f, {random_mat(3, 4, rng, 2.0), random_mat(5, 4, rng, 2.0)}, eps);
  }
  if (subgraph == "ise") {
    ParamStore store;
    IseMlp mlp(store, kFaceFeatureDim, 4, 3, rng);
    const Vec face = random_mat(kFaceFeatureDim, 1, rng);
    const Mat probe = random_mat(1, 3, rng);
    std::vector<std::size_t> all(store.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    auto f = [&](const Context& ctx) { return ag::sum(ag::mul(mlp(ctx, face), ctx.tape.constant(probe))); };
    return gradient_check_params(f, store, all, eps, 256);
  }
  if (subgraph == "variance-adaptor") {
    ModelConfig cfg;
    cfg.d = 4;
    cfg.predictor_filter = 4;
    cfg.predictor_kernel = 3;
    cfg.variance_bins = 8;
    cfg.log_pitch_min = std::log(80.0);
    cfg.log_pitch_max = std::log(300.0);
    cfg.energy_min = 0.0;
    cfg.energy_max = 4.0;
    ParamStore store;
    VarianceAdaptor adaptor(store, cfg, rng);
    const Eigen::Index t = 6;
    const Mat h = random_mat(t, cfg.d, rng);
    VarianceTargets targets{Vec::Zero(t), Vec::Zero(t)};
    std::uniform_real_distribution<double> hz(90.0, 280.0), en(0.2, 3.8);
    for (Eigen::Index i = 0; i < t; ++i) {
      targets.pitch_hz(i) = i == 2 ? 0.0 : hz(rng);
      targets.energy(i) = en(rng);
    }
    Mask voiced = full_mask(t);
    voiced[2] = 0;
    Vec log_pitch = targets.pitch_hz.unaryExpr([](double v) { return v > 0.0 ? std::log(v) : 0.0; });
    const Mat probe = random_mat(t, cfg.d, rng);
    const Mask mask = full_mask(t);
    std::vector<std::size_t> all(store.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    auto f = [&](const Context& ctx) {
      VarianceOutputs o = adaptor(ctx, ctx.tape.constant(h), mask, &targets);
      Var lp = ag::masked_mse(o.pitch_pred, log_pitch, voiced);
      Var le = ag::masked_mse(o.energy_pred, targets.energy, mask);
      Var la = ag::sum(ag::mul(o.adapted, ctx.tape.constant(probe)));
      return ag::add(ag::add(lp, le), ag::scale(la, 0.1));
    };
    return gradient_check_params(f, store, all, eps, 64);
  }
  if (subgraph == "mel-l1") {
    Mat target = random_mat(4, 3, rng);
    Mat pred = random_mat(4, 3, rng);
    pred(0, 0) = target(0, 0);  // exact kink of |x|; excluded by the probe
    Mask mask = full_mask(4);
    mask[3] = 0;
    auto f = [&](Tape&, std::span<const Var> in) { return ag::masked_l1(in[0], target, mask); };
    return gradient_check(f, {pred}, eps);
  }
  if (subgraph == "fft-block") {
    ParamStore store;
    FftBlockConfig cfg{4, 2, 3, 6, 0.0};
    FftBlock block(store, "block", cfg, rng);
    Mask mask = full_mask(5);
    mask[4] = 0;
    Mat x = random_mat(5, 4, rng);
    x.row(4).setZero();
    const Mat probe = random_mat(5, 4, rng);
    auto f = [&](Tape& tape, std::span<const Var> in) {
      Context ctx{tape, store, false, nullptr};
      return ag::sum(ag::mul(block(ctx, ag::mask_rows(in[0], mask), mask), tape.constant(probe)));
    };
    return gradient_check(f, {x}, eps);
  }
  throw UsageError("unknown gradient-check subgraph '" + subgraph + "'");
}

}  // namespace vdub
