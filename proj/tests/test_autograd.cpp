// Copyright 2026 The vdub Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "vdub/autograd.hpp"
#include "vdub/error.hpp"
#include "vdub/gradcheck.hpp"

namespace vdub {
namespace {

using testing::random_mat;

// Projects an op's output onto a fixed random matrix so every output entry
// contributes to the checked scalar.
template <class Op>
GradCheckResult check_op(Op op, std::vector<Mat> inputs, Eigen::Index out_rows, Eigen::Index out_cols,
                         std::uint64_t seed = 5) {
  std::mt19937_64 rng(seed);
  const Mat probe = random_mat(out_rows, out_cols, rng);
  return gradient_check(
      [&](Tape& t, std::span<const Var> in) { return ag::sum(ag::mul(op(t, in), t.constant(probe))); },
      std::move(inputs));
}

class AutogradOps : public ::testing::Test {
 protected:
  std::mt19937_64 rng{17};
};

TEST_F(AutogradOps, Matmul) {
  auto r = check_op([](Tape&, std::span<const Var> v) { return ag::matmul(v[0], v[1]); },
                    {random_mat(3, 4, rng), random_mat(4, 2, rng)}, 3, 2);
  EXPECT_LT(r.max_rel_error, 1e-6);
  EXPECT_EQ(r.checked, 20u);
}

TEST_F(AutogradOps, MatmulTransposed) {
  auto r = check_op([](Tape&, std::span<const Var> v) { return ag::matmul_nt(v[0], v[1]); },
                    {random_mat(3, 4, rng), random_mat(5, 4, rng)}, 3, 5);
  EXPECT_LT(r.max_rel_error, 1e-6);
}

TEST_F(AutogradOps, ElementwiseAndRowOps) {
  auto r = check_op(
      [](Tape&, std::span<const Var> v) {
        return ag::scale(ag::add_row(ag::mul(ag::sub(v[0], v[1]), ag::add(v[0], v[1])), v[2]), 0.7);
      },
      {random_mat(3, 4, rng), random_mat(3, 4, rng), random_mat(1, 4, rng)}, 3, 4);
  EXPECT_LT(r.max_rel_error, 1e-6);
}

TEST_F(AutogradOps, SoftmaxWithKeyMask) {
  const Mask keys{1, 0, 1, 1};
  auto r = check_op([&](Tape&, std::span<const Var> v) { return ag::softmax_rows(v[0], &keys); },
                    {random_mat(3, 4, rng)}, 3, 4);
  EXPECT_LT(r.max_rel_error, 1e-6);
}

TEST_F(AutogradOps, SoftmaxMaskedColumnsGetZeroWeight) {
  Tape t;
  const Mask keys{1, 0, 1};
  Var a = ag::softmax_rows(t.constant(random_mat(2, 3, rng)), &keys);
  EXPECT_EQ(a.value()(0, 1), 0.0);
  EXPECT_NEAR(a.value().row(1).sum(), 1.0, 1e-12);
  const Mask none{0, 0, 0};
  EXPECT_THROW(ag::softmax_rows(t.constant(random_mat(2, 3, rng)), &none), Error);
}

TEST_F(AutogradOps, LayerNorm) {
  auto r = check_op([](Tape&, std::span<const Var> v) { return ag::layer_norm(v[0], v[1], v[2]); },
                    {random_mat(3, 5, rng), random_mat(1, 5, rng), random_mat(1, 5, rng)}, 3, 5);
  EXPECT_LT(r.max_rel_error, 1e-5);
}

TEST_F(AutogradOps, ReluSkipsKinks) {
  Mat x = random_mat(3, 3, rng);
  x(1, 1) = 0.0;
  auto r = check_op([](Tape&, std::span<const Var> v) { return ag::relu(v[0]); }, {x}, 3, 3);
  EXPECT_LT(r.max_rel_error, 1e-6);
  EXPECT_EQ(r.skipped, 1u);
}

TEST_F(AutogradOps, GatherTakeRepeatConcatSlice) {
  auto r = check_op(
      [](Tape&, std::span<const Var> v) {
        Var g = ag::gather(v[0], {0, 5, -1, 3, 3, 11}, 2, 3);
        Var t = ag::take_rows(v[1], {2, -1, 0});
        Var rep = ag::repeat_rows(ag::slice_cols(t, 1, 3), 2);
        const std::vector<Var> parts{rep, ag::repeat_rows(g, 3)};
        return ag::concat_cols(parts);
      },
      {random_mat(3, 4, rng), random_mat(3, 4, rng)}, 6, 6);
  EXPECT_LT(r.max_rel_error, 1e-6);
}

TEST_F(AutogradOps, GroupMeanAndMaskRows) {
  const Mask m{1, 1, 0, 1};
  auto r = check_op(
      [&](Tape&, std::span<const Var> v) { return ag::group_mean_rows(ag::mask_rows(v[0], m), 2); },
      {random_mat(4, 3, rng)}, 2, 3);
  EXPECT_LT(r.max_rel_error, 1e-6);
}

TEST_F(AutogradOps, Conv1dIndexIsSamePadded) {
  const auto idx = conv1d_index(3, 2, 3);
  ASSERT_EQ(idx.size(), 3u * 6u);
  // Row 0 sees [pad, x0, x1]; row 2 sees [x1, x2, pad].
  EXPECT_EQ(idx[0], -1);
  EXPECT_EQ(idx[2], 0);
  EXPECT_EQ(idx[4], 2);
  EXPECT_EQ(idx[2 * 6 + 4], -1);
  EXPECT_EQ(idx[2 * 6 + 2], 4);
}

TEST_F(AutogradOps, DropoutEvalIsIdentityTrainIsInverted) {
  Tape t;
  ParamStore none;
  const Mat x = Mat::Ones(200, 50);
  Context eval{t, none, false, nullptr};
  EXPECT_EQ(ag::dropout(eval, t.constant(x), 0.9).value(), x);
  std::mt19937_64 r(1);
  Context train{t, none, true, &r};
  const Mat y = ag::dropout(train, t.constant(x), 0.5).value();
  EXPECT_NEAR(y.mean(), 1.0, 0.05);
  EXPECT_TRUE(((y.array() == 0.0) || (y.array() == 2.0)).all());
}

TEST_F(AutogradOps, ParamGradientsAreCollected) {
  ParamStore store;
  const auto w = store.add("w", random_mat(2, 2, rng));
  Tape t;
  Context ctx{t, store, false, nullptr};
  Var y = ag::sum(ag::matmul(t.constant(Mat::Ones(1, 2)), ctx.p(w)));
  t.backward(y);
  Gradients g = zero_gradients(store);
  t.collect(g, 2.0);
  EXPECT_TRUE(g[0].isApprox(Mat::Constant(2, 2, 2.0)));
}

TEST_F(AutogradOps, ReusedParameterAccumulates) {
  ParamStore store;
  const auto w = store.add("w", Mat::Constant(1, 1, 3.0));
  Tape t;
  Context ctx{t, store, false, nullptr};
  Var y = ag::mul(ctx.p(w), ctx.p(w));  // w^2
  t.backward(y);
  Gradients g = zero_gradients(store);
  t.collect(g);
  EXPECT_DOUBLE_EQ(g[0](0, 0), 6.0);
}

}  // namespace
}  // namespace vdub
