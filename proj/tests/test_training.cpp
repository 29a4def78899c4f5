// Copyright 2026 The vdub Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>

#include "test_util.hpp"
#include "test_world.hpp"
#include "vdub/config.hpp"
#include "vdub/error.hpp"
#include "vdub/gradcheck.hpp"
#include "vdub/synthetic.hpp"
#include "vdub/text.hpp"
#include "vdub/training.hpp"

namespace vdub {
namespace {

using testing::random_mat;
using testing::TempDir;
using testing::World;

TEST(TotalLoss, PerfectPredictionsLeaveOnlyTheConstraint) {
  std::mt19937_64 rng(1);
  Tape t;
  const Mat mel = random_mat(16, 6, rng);
  Vec hz = Vec::Constant(16, 150.0);
  hz(3) = 0.0;
  Vec log_hz = hz.array().max(1.0).log();
  const Vec energy = Vec::LinSpaced(16, 1.0, 3.0);
  const auto terms = total_loss(t.constant(mel), mel, t.constant(log_hz), hz, t.constant(energy), energy,
                                t.constant(Mat::Identity(4, 4)), Mask(16, 1), Mask(4, 1), Mask(4, 1), LossWeights{},
                                DiagonalConfig{});
  EXPECT_NEAR(terms.breakdown.total, -0.1, 1e-12);
  EXPECT_NEAR(terms.total.scalar(), -0.1, 1e-12);
  EXPECT_DOUBLE_EQ(terms.breakdown.rate, 1.0);
}

TEST(TotalLoss, AllUnvoicedPitchIsZero) {
  std::mt19937_64 rng(2);
  Tape t;
  const auto terms = total_loss(t.constant(Mat::Zero(4, 2)), Mat::Zero(4, 2), t.constant(random_mat(4, 1, rng)),
                                Vec::Zero(4), t.constant(Mat::Zero(4, 1)), Vec::Zero(4),
                                t.constant(Mat::Identity(1, 1)), Mask(4, 1), Mask(1, 1), Mask(1, 1), LossWeights{},
                                DiagonalConfig{});
  EXPECT_EQ(terms.breakdown.pitch_loss, 0.0);
}

TEST(TotalLoss, HandComputedCase) {
  Tape t;
  Mat pred(2, 2), target(2, 2);
  pred << 1, 2, 3, 4;
  target << 0, 2, 5, 4;
  Vec hz(2), log_pred(2), e_pred(2), e_target(2);
  hz << 100, 200;
  log_pred << std::log(100.0) + 0.5, std::log(200.0);
  e_pred << 1, 2;
  e_target << 2, 4;
  // T_v = 2, T_p = 3 -> b = 1, k = 1.5, bands [1,3] and [2,3].
  Mat a(2, 3);
  a << 0.2, 0.3, 0.5, 0.6, 0.3, 0.1;
  const auto terms = total_loss(t.constant(pred), target, t.constant(log_pred), hz, t.constant(e_pred), e_target,
                                t.constant(a), Mask(2, 1), Mask(2, 1), Mask(3, 1), LossWeights{}, DiagonalConfig{});
  const auto& b = terms.breakdown;
  EXPECT_NEAR(b.mel_loss, 0.75, 1e-12);
  EXPECT_NEAR(b.pitch_loss, 0.125, 1e-12);
  EXPECT_NEAR(b.energy_loss, 2.5, 1e-12);
  EXPECT_NEAR(b.dc_loss, -0.7, 1e-12);
  EXPECT_NEAR(b.total, 0.75 + 0.0125 + 0.25 - 0.07, 1e-6);
}

TEST(TotalLoss, TotalIsWeightedSum) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Tape t;
    std::uniform_real_distribution<double> w(0.0, 2.0);
    const LossWeights weights{w(rng), w(rng), w(rng)};
    DiagonalConfig dc;
    dc.weight = w(rng);
    Vec hz = (random_mat(8, 1, rng).array().abs() * 100.0 + 80.0).matrix();
    const auto terms =
        total_loss(t.constant(random_mat(8, 3, rng)), random_mat(8, 3, rng), t.constant(random_mat(8, 1, rng)), hz,
                   t.constant(random_mat(8, 1, rng)), random_mat(8, 1, rng), t.constant(testing::random_stochastic(2, 3, rng)),
                   Mask(8, 1), Mask(2, 1), Mask(3, 1), weights, dc);
    const auto& b = terms.breakdown;
    const double expected = b.weights[0] * b.mel_loss + b.weights[1] * b.pitch_loss + b.weights[2] * b.energy_loss +
                            b.weights[3] * b.dc_loss;
    EXPECT_NEAR(b.total, expected, 1e-6);
    EXPECT_EQ(b.weights[3], dc.weight);
  }
}

TEST(LrSchedule, ClosedForm) {
  EXPECT_NEAR(lr_schedule(4000, 256, 4000), 9.8821e-4, 1e-7);
  EXPECT_DOUBLE_EQ(lr_schedule(1, 256, 4000), std::pow(256.0, -0.5) * std::pow(4000.0, -1.5));
  EXPECT_LT(lr_schedule(8000, 64, 4000), lr_schedule(4000, 64, 4000));
  for (long step : {1L, 7L, 399L, 400L, 401L, 1000L, 123456L}) {
    const double d = 64.0, w = 400.0, s = static_cast<double>(step);
    const double ref = std::pow(d, -0.5) * std::min(std::pow(s, -0.5), s * std::pow(w, -1.5));
    EXPECT_NEAR(lr_schedule(step, 64, 400) / ref, 1.0, 1e-9);
  }
  EXPECT_THROW(lr_schedule(0, 256, 4000), Error);
}

Sample tiny_sample(const std::string& id, int tv, int tp, std::mt19937_64& rng) {
  Sample s;
  s.id = id;
  for (int i = 0; i < tp; ++i) s.phoneme_ids.push_back(3 + i);
  s.mouth = random_mat(tv, 8, rng);
  s.face_feature = random_mat(4096, 1, rng);
  const int tm = tv * s.geometry.upsample_factor();
  s.mel = random_mat(tm, 10, rng);
  s.pitch = Vec::Constant(tm, 120.0);
  s.energy = Vec::Constant(tm, 2.0);
  return s;
}

TEST(Collate, SingleSampleIsUnpadded) {
  std::mt19937_64 rng(4);
  const Sample s = tiny_sample("a", 3, 2, rng);
  const Sample* ptrs[] = {&s};
  const Batch b = collate_batch(ptrs, false);
  EXPECT_EQ(b.video_masks[0], Mask(3, 1));
  EXPECT_EQ(b.mel_masks[0], Mask(12, 1));
  EXPECT_EQ(b.phoneme_masks[0], Mask(2, 1));
}

TEST(Collate, PadsToLongest) {
  std::mt19937_64 rng(5);
  const Sample a = tiny_sample("a", 3, 2, rng), b = tiny_sample("b", 5, 4, rng);
  const Sample* ptrs[] = {&a, &b};
  const Batch batch = collate_batch(ptrs, true);
  EXPECT_EQ(batch.video_masks[0], (Mask{1, 1, 1, 0, 0}));
  EXPECT_EQ(batch.video_masks[1], Mask(5, 1));
  EXPECT_EQ(batch.mouth[0].rows(), 5);
  EXPECT_EQ(batch.mel[0].rows(), 20);
  EXPECT_EQ(std::count(batch.mel_masks[0].begin(), batch.mel_masks[0].end(), 1), 12);
  EXPECT_EQ(batch.phonemes[0], (std::vector<int>{3, 4, PhonemeVocabulary::kPad, PhonemeVocabulary::kPad}));
  ASSERT_TRUE(batch.faces[1].has_value());
}

TEST(Collate, RejectsMixedGeometry) {
  std::mt19937_64 rng(6);
  Sample a = tiny_sample("a", 3, 2, rng), b = tiny_sample("b", 3, 2, rng);
  b.geometry.hop_size = 320;
  const Sample* ptrs[] = {&a, &b};
  EXPECT_THROW(collate_batch(ptrs, false), GeometryError);
  EXPECT_THROW(collate_batch({}, false), DataError);
}

TEST(Batching, PaddedLossEqualsPerSampleMean) {
  World w;
  DubbingModel model(w.model, 1);
  std::vector<const Sample*> ptrs;
  for (int i = 0; i < 6; ++i) ptrs.push_back(&w.data[i]);
  const LossBreakdown joint = batch_loss(model, collate_batch(ptrs, false), {}, {});
  double mean = 0.0, rate = 0.0;
  for (const Sample* s : ptrs) {
    const Sample* one[] = {s};
    const auto b = batch_loss(model, collate_batch(one, false), {}, {});
    mean += b.total / 6.0;
    rate += b.rate / 6.0;
  }
  EXPECT_NEAR(joint.total, mean, 1e-5);
  EXPECT_NEAR(joint.rate, rate, 1e-5);
}

TEST(VarianceRanges, CoverTheData) {
  World w;
  for (const Sample& s : w.data) {
    for (Eigen::Index i = 0; i < s.pitch.size(); ++i) {
      if (s.pitch(i) > 0) {
        EXPECT_GE(std::log(s.pitch(i)), w.model.log_pitch_min - 1e-9);
        EXPECT_LE(std::log(s.pitch(i)), w.model.log_pitch_max + 1e-9);
      }
      EXPECT_GE(s.energy(i), w.model.energy_min - 1e-9);
      EXPECT_LE(s.energy(i), w.model.energy_max + 1e-9);
    }
  }
}

TEST(Trainer, EpochVisitsEverySampleOnce) {
  World w;
  DubbingModel model(w.model, 1);
  Trainer trainer(model, w.train, w.data);
  std::vector<int> seen(w.data.size(), 0);
  for (long step = 1; step <= 6; ++step)
    for (std::size_t i : trainer.batch_indices(step)) ++seen[i];
  EXPECT_EQ(std::count(seen.begin(), seen.end(), 1), 24);
  EXPECT_NE(trainer.batch_indices(1), trainer.batch_indices(7));
}

TEST(Trainer, DeterministicAndLossFalls) {
  World w;
  std::vector<double> a, b;
  for (auto* out : {&a, &b}) {
    DubbingModel model(w.model, 3);
    Trainer trainer(model, w.train, w.data);
    for (int i = 0; i < 30; ++i) out->push_back(trainer.step().loss.mel_loss);
  }
  EXPECT_EQ(a, b);
  double head = 0.0, tail = 0.0;
  for (int i = 0; i < 5; ++i) {
    head += a[i];
    tail += a[25 + i];
  }
  EXPECT_LT(tail, head);
}

TEST(Trainer, CheckpointRoundTrip) {
  World w;
  TempDir dir("ckpt");
  DubbingModel model(w.model, 3);
  Trainer trainer(model, w.train, w.data);
  for (int i = 0; i < 3; ++i) trainer.step();
  trainer.save_checkpoint(dir / "c");
  DubbingModel other(w.model, 99);
  Trainer restored(other, w.train, w.data);
  restored.load_checkpoint(dir / "c");
  EXPECT_EQ(restored.completed_steps(), 3);
  for (std::size_t i = 0; i < model.params().size(); ++i) EXPECT_EQ(other.params().value(i), model.params().value(i));
  EXPECT_EQ(trainer.step().loss.total, restored.step().loss.total);
  const DubbingModel loaded = load_model(dir / "c");
  EXPECT_EQ(loaded.config().log_pitch_max, w.model.log_pitch_max);
  EXPECT_THROW(restored.load_checkpoint(dir / "missing"), Error);
}

TEST(Train, ResumeMatchesUninterrupted) {
  World w;
  TempDir dir("resume");
  TrainConfig cfg = w.train;
  cfg.max_steps = 8;
  cfg.checkpoint_every = 4;
  DubbingModel full(w.model, 5);
  const auto straight = train(full, cfg, w.data, dir / "full");
  DubbingModel first(w.model, 5);
  TrainConfig half = cfg;
  half.max_steps = 4;
  train(first, half, w.data, dir / "part");
  DubbingModel second(w.model, 123);
  const auto resumed = train(second, cfg, w.data, dir / "part", latest_checkpoint(dir / "part"));
  ASSERT_EQ(resumed.records.size(), 4u);
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(resumed.records[i].step, 5 + i);
    EXPECT_NEAR(resumed.records[i].loss.total, straight.records[4 + i].loss.total, 1e-6);
  }
  std::ifstream log(dir / "part" / "metrics.jsonl");
  int lines = 0;
  for (std::string line; std::getline(log, line);) ++lines;
  EXPECT_EQ(lines, 8);
  EXPECT_EQ(latest_checkpoint(dir / "part").filename(), checkpoint_name(8));
}

TEST(Train, NonFiniteAbortsAndNamesLastCheckpoint) {
  World w;
  TempDir dir("nan");
  TrainConfig cfg = w.train;
  cfg.max_steps = 10;
  cfg.checkpoint_every = 2;
  DubbingModel model(w.model, 5);
  try {
    train(model, cfg, w.data, dir.path(), std::nullopt, [&](const StepRecord& r) {
      if (r.step == 3) model.params().mutable_value(0).setConstant(std::numeric_limits<double>::quiet_NaN());
    });
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find(checkpoint_name(2)), std::string::npos) << e.what();
  }
  EXPECT_TRUE(std::filesystem::exists(dir / "checkpoints" / checkpoint_name(2)));
}

TEST(GradientCheck, NamedSubgraphs) {
  for (const auto& name : gradient_check_subgraphs()) {
    const auto r = gradient_check(name, 1);
    EXPECT_LT(r.max_rel_error, 1e-3) << name;
    EXPECT_GT(r.checked, 0u) << name;
  }
  EXPECT_GE(gradient_check("mel-l1", 1).skipped, 1u);
  EXPECT_THROW(gradient_check("nope", 1), Error);
}

TEST(Config, RoundTripAndStrictKeys) {
  RunConfig c;
  c.train.max_steps = 77;
  c.train.diagonal.bandwidth = 3.0;
  c.model.d = 32;
  const Json j = to_json(c);
  RunConfig back;
  from_json(j, back);
  EXPECT_EQ(to_json(back), j);
  Json bad = j;
  bad["synth"]["bogus"] = 1;
  try {
    from_json(bad, back);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("synth.bogus"), std::string::npos);
  }
  Json wrong = j;
  wrong["train"]["max_steps"] = "many";
  EXPECT_THROW(from_json(wrong, back), ConfigError);
}

TEST(Config, Overrides) {
  Json j = to_json(RunConfig{});
  apply_override(j, "train.diagonal.weight=0");
  apply_override(j, "model.d=32");
  RunConfig c;
  from_json(j, c);
  EXPECT_EQ(c.train.diagonal.weight, 0.0);
  EXPECT_EQ(c.model.d, 32);
  EXPECT_THROW(apply_override(j, "no-equals"), UsageError);
}

}  // namespace
}  // namespace vdub
