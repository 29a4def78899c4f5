// Copyright 2026 The vdub Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>

#include "vdub/tensor.hpp"

namespace vdub {

struct FrameGeometry {
  int sample_rate = 16000;  // Hz
  int hop_size = 160;       // samples
  int win_size = 640;       // samples
  double video_fps = 25.0;  // frames per second

  // Mel frames per video frame.
  int upsample_factor() const;

  bool operator==(const FrameGeometry&) const = default;
};

// (sample_rate / hop_size) / video_fps; throws GeometryError when it is not a
// positive integer.
int compute_upsample_factor(const FrameGeometry& geometry);

struct LengthPlan {
  std::size_t mel_frames = 0;  // n * T_v
  std::size_t trim = 0;        // frames dropped from the end
  std::size_t pad = 0;         // copies of the final frame appended
};

// Plans trimming/padding of a raw mel length onto n * video_frames. Refuses
// (DataError naming sample_id) when the gap exceeds n frames.
LengthPlan reconcile_lengths(std::size_t mel_frames_raw, std::size_t video_frames, int n,
                             const std::string& sample_id = {});

// Applies a LengthPlan to frame-major arrays.
Mat apply_length_plan(const Mat& frames, const LengthPlan& plan);
Vec apply_length_plan(const Vec& values, const LengthPlan& plan);

}  // namespace vdub
