// Copyright 2026 The vdub Authors
// SPDX-License-Identifier: Apache-2.0

#include "vdub/speaker.hpp"

#include "vdub/dataset.hpp"
#include "vdub/error.hpp"

namespace vdub {

Mat select_face_frame(std::span<const Mat> frames, const FaceSelection& selection) {
  if (frames.empty()) throw DataError("select_face_frame: empty face sequence");
  switch (selection.strategy) {
    case FaceSelect::kIndex:
      if (selection.index >= frames.size()) {
        throw DataError("select_face_frame: index " + std::to_string(selection.index) + " out of range");
      }
      return frames[selection.index];
    case FaceSelect::kRandom: {
      std::mt19937_64 rng(selection.seed);
      std::uniform_int_distribution<std::size_t> pick(0, frames.size() - 1);
      return frames[pick(rng)];
    }
    case FaceSelect::kMean: {
      Mat mean = Mat::Zero(frames[0].rows(), frames[0].cols());
      for (const Mat& f : frames) {
        if (f.rows() != mean.rows() || f.cols() != mean.cols()) {
          throw ShapeError("select_face_frame: frames differ in shape");
        }
        mean += f;
      }
      return mean / static_cast<double>(frames.size());
    }
  }
  throw UsageError("select_face_frame: unknown strategy");
}

namespace {

Vec as_feature(const Mat& input) {
  if (input.size() != kFaceFeatureDim || (input.rows() != 1 && input.cols() != 1)) {
    throw ShapeError("face feature must be a " + std::to_string(kFaceFeatureDim) + "-D vector");
  }
  return Eigen::Map<const Vec>(input.data(), kFaceFeatureDim);
}

constexpr int kPool = 8;
constexpr int kPooled = kFaceImageSize / kPool;

}  // namespace

Vec PrecomputedFaceBackend::extract(const Mat& input) const { return as_feature(input); }

HashProjectionFaceBackend::HashProjectionFaceBackend(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0 / kPooled);
  projection_.resize(kFaceFeatureDim, kPooled * kPooled);
  for (Eigen::Index i = 0; i < projection_.size(); ++i) projection_.data()[i] = nd(rng);
}

Vec HashProjectionFaceBackend::extract(const Mat& input) const {
  if (input.rows() != kFaceImageSize || input.cols() != kFaceImageSize) {
    throw ShapeError("face image must be " + std::to_string(kFaceImageSize) + "x" + std::to_string(kFaceImageSize) +
                     ", got " + std::to_string(input.rows()) + "x" + std::to_string(input.cols()));
  }
  Vec pooled(kPooled * kPooled);
  for (int y = 0; y < kPooled; ++y) {
    for (int x = 0; x < kPooled; ++x) {
      pooled(y * kPooled + x) = input.block(y * kPool, x * kPool, kPool, kPool).mean();
    }
  }
  // Centre so that cluster structure, not mean brightness, drives the feature.
  pooled.array() -= pooled.mean();
  return projection_ * pooled;
}

std::unique_ptr<FaceBackend> make_face_backend(const std::string& name, std::uint64_t seed) {
  if (name == "precomputed") return std::make_unique<PrecomputedFaceBackend>();
  if (name == "hash-projection") return std::make_unique<HashProjectionFaceBackend>(seed);
  throw ConfigError("unknown face backend '" + name + "'");
}

std::vector<std::string> face_backend_names() { return {"precomputed", "hash-projection"}; }

Vec face_feature(const Mat& input, const FaceBackend& backend) {
  Vec f = backend.extract(input);
  if (!f.allFinite()) throw NumericError("face feature is not finite");
  return f;
}

IseMlp::IseMlp(ParamStore& store, int input_dim, int hidden, int d, std::mt19937_64& rng)
    : input_dim_(input_dim),
      first_(store, "ise.first", input_dim, hidden, rng),
      second_(store, "ise.second", hidden, d, rng),
      norm_(store, "ise.norm", d) {}

Var IseMlp::operator()(const Context& ctx, Var feature) const {
  if (feature.rows() != 1 || feature.cols() != input_dim_) {
    throw ShapeError("ise: expected a 1x" + std::to_string(input_dim_) + " face feature");
  }
  return norm_(ctx, second_(ctx, ag::relu(first_(ctx, feature))));
}

Var IseMlp::operator()(const Context& ctx, const Vec& feature) const {
  if (feature.size() != input_dim_) {
    throw ShapeError("ise: expected a " + std::to_string(input_dim_) + "-D face feature, got " +
                     std::to_string(feature.size()));
  }
  return (*this)(ctx, ctx.tape.constant(feature.transpose()));
}

Var broadcast_add(Var h, Var embedding) {
  if (embedding.rows() != 1 || embedding.cols() != h.cols()) {
    throw ShapeError("broadcast_add: embedding must be 1x" + std::to_string(h.cols()));
  }
  return ag::add_row(h, embedding);
}

}  // namespace vdub
