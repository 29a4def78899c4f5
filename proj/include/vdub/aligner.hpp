// Copyright 2026 The vdub Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>

#include "vdub/autograd.hpp"

namespace vdub {

struct DiagonalConfig {
  // Fixed bandwidth in phoneme-index units; when unset, max(1, round(ratio * T_p)).
  std::optional<double> bandwidth;
  double bandwidth_ratio = 0.2;
  double weight = 0.1;  // lambda_DC

  double bandwidth_for(std::size_t phonemes) const;
  void validate() const;
};

struct AlignerOutput {
  Var context;    // H_con, T_v x d
  Var attention;  // A, T_v x T_p
};

// Single-head attention with video frames as queries over phonemes, plus a
// dropout-regularized residual of the video sequence.
AlignerOutput text_video_attention(const Context& ctx, Var video, Var phonemes, const Mask& video_mask,
                                   const Mask& phoneme_mask, double residual_dropout);

// Row j of the output is row floor(j / n) of h.
Var upsample_nearest(Var h, int n);

// Fraction of attention mass inside the band around the linear alignment.
// Only valid rows count; T_p is the number of valid phoneme columns.
double diagonal_rate(const Mat& attention, double bandwidth, const Mask* video_mask = nullptr,
                     const Mask* phoneme_mask = nullptr);
Var diagonal_rate(Var attention, double bandwidth, const Mask* video_mask = nullptr,
                  const Mask* phoneme_mask = nullptr);

// -diagonal_rate.
Var diagonal_constraint_loss(Var attention, double bandwidth, const Mask* video_mask = nullptr,
                             const Mask* phoneme_mask = nullptr);

// Rate of a uniform attention matrix over the valid region; the no-alignment baseline.
double uniform_diagonal_rate(std::size_t video_frames, std::size_t phonemes, double bandwidth);

// row s (1-based, among valid rows) -> inclusive 1-based band [lo, hi] over T_p columns.
std::pair<long, long> diagonal_band(std::size_t s, std::size_t video_frames, std::size_t phonemes, double bandwidth);

}  // namespace vdub
