// Copyright 2026 The vdub Authors
// SPDX-License-Identifier: Apache-2.0

#include "vdub/geometry.hpp"

#include <cmath>
#include <sstream>

#include "vdub/error.hpp"

namespace vdub {

int FrameGeometry::upsample_factor() const { return compute_upsample_factor(*this); }

int compute_upsample_factor(const FrameGeometry& g) {
  if (g.sample_rate <= 0 || g.hop_size <= 0 || g.video_fps <= 0.0) {
    throw GeometryError("sample_rate, hop_size and video_fps must be positive");
  }
  const double ratio = (static_cast<double>(g.sample_rate) / g.hop_size) / g.video_fps;
  const double n = std::round(ratio);
  if (n < 1.0 || std::abs(ratio - n) > 1e-9) {
    std::ostringstream msg;
    msg << "mel/video frame-rate ratio is not a positive integer: (sample_rate=" << g.sample_rate
        << " / hop_size=" << g.hop_size << ") / video_fps=" << g.video_fps << " = " << ratio;
    throw GeometryError(msg.str());
  }
  return static_cast<int>(n);
}

LengthPlan reconcile_lengths(std::size_t mel_frames_raw, std::size_t video_frames, int n,
                             const std::string& sample_id) {
  if (mel_frames_raw < 1 || video_frames < 1 || n < 1) {
    throw DataError("reconcile_lengths: lengths and factor must be >= 1" +
                    (sample_id.empty() ? std::string() : " (sample " + sample_id + ")"));
  }
  LengthPlan plan;
  plan.mel_frames = video_frames * static_cast<std::size_t>(n);
  const std::size_t gap = mel_frames_raw > plan.mel_frames ? mel_frames_raw - plan.mel_frames
                                                           : plan.mel_frames - mel_frames_raw;
  if (gap > static_cast<std::size_t>(n)) {
    std::ostringstream msg;
    msg << "mel/video length mismatch";
    if (!sample_id.empty()) msg << " in sample '" << sample_id << "'";
    msg << ": " << mel_frames_raw << " mel frames vs " << video_frames << " video frames x " << n
        << " (gap " << gap << " > " << n << ")";
    throw DataError(msg.str());
  }
  if (mel_frames_raw > plan.mel_frames) {
    plan.trim = gap;
  } else {
    plan.pad = gap;
  }
  return plan;
}

Mat apply_length_plan(const Mat& frames, const LengthPlan& plan) {
  const auto target = static_cast<Eigen::Index>(plan.mel_frames);
  if (frames.rows() + static_cast<Eigen::Index>(plan.pad) - static_cast<Eigen::Index>(plan.trim) != target) {
    throw ShapeError("length plan does not match array length");
  }
  Mat out(target, frames.cols());
  const Eigen::Index keep = std::min(frames.rows(), target);
  out.topRows(keep) = frames.topRows(keep);
  for (Eigen::Index i = keep; i < target; ++i) out.row(i) = frames.row(frames.rows() - 1);
  return out;
}

Vec apply_length_plan(const Vec& values, const LengthPlan& plan) {
  Mat r = apply_length_plan(Mat(Eigen::Map<const Mat>(values.data(), values.size(), 1)), plan);
  return Eigen::Map<const Vec>(r.data(), r.rows());
}

}  // namespace vdub
