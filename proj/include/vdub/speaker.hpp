// Copyright 2026 The vdub Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "vdub/nn.hpp"

namespace vdub {

enum class FaceSelect { kRandom, kIndex, kMean };

struct FaceSelection {
  FaceSelect strategy = FaceSelect::kRandom;
  std::size_t index = 0;
  std::uint64_t seed = 0;
};

// Picks one frame (or the mean frame) out of a sequence of face inputs.
Mat select_face_frame(std::span<const Mat> frames, const FaceSelection& selection);

// Frozen face-feature extractor. Holds no trainable parameters.
class FaceBackend {
 public:
  virtual ~FaceBackend() = default;
  virtual std::string name() const = 0;
  // Input is a 224x224 image or a 4096-D feature (as 1x4096 or 4096x1).
  virtual Vec extract(const Mat& input) const = 0;
};

// Passes precomputed 4096-D features through unchanged.
class PrecomputedFaceBackend : public FaceBackend {
 public:
  std::string name() const override { return "precomputed"; }
  Vec extract(const Mat& input) const override;
};

// Average-pools a 224x224 image to 28x28 and applies a seeded random projection.
class HashProjectionFaceBackend : public FaceBackend {
 public:
  explicit HashProjectionFaceBackend(std::uint64_t seed = 0x5eed);
  std::string name() const override { return "hash-projection"; }
  Vec extract(const Mat& input) const override;
  const Mat& projection() const { return projection_; }

 private:
  Mat projection_;  // 4096 x 784
};

std::unique_ptr<FaceBackend> make_face_backend(const std::string& name, std::uint64_t seed = 0x5eed);
std::vector<std::string> face_backend_names();

Vec face_feature(const Mat& input, const FaceBackend& backend);

// MLP 4096 -> hidden -> d with ReLU and a layer-normalized output.
class IseMlp {
 public:
  IseMlp() = default;
  IseMlp(ParamStore& store, int input_dim, int hidden, int d, std::mt19937_64& rng);

  Var operator()(const Context& ctx, Var feature) const;
  Var operator()(const Context& ctx, const Vec& feature) const;

  std::size_t first_weight() const { return first_.weight(); }

 private:
  int input_dim_ = 0;
  Linear first_;
  Linear second_;
  LayerNorm norm_;
};

// Adds the 1 x d embedding to every row of h.
Var broadcast_add(Var h, Var embedding);

}  // namespace vdub
