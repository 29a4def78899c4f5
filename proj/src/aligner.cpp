// Copyright 2026 The vdub Authors
// SPDX-License-Identifier: Apache-2.0

#include "vdub/aligner.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vdub/error.hpp"

namespace vdub {

double DiagonalConfig::bandwidth_for(std::size_t phonemes) const {
  if (bandwidth) return *bandwidth;
  return std::max(1.0, std::round(bandwidth_ratio * static_cast<double>(phonemes)));
}

void DiagonalConfig::validate() const {
  if (bandwidth && !(*bandwidth >= 0.0)) throw ConfigError("diagonal: bandwidth must be >= 0");
  if (!(bandwidth_ratio >= 0.0)) throw ConfigError("diagonal: bandwidth_ratio must be >= 0");
  if (!(weight >= 0.0)) throw ConfigError("diagonal: weight must be >= 0");
}

AlignerOutput text_video_attention(const Context& ctx, Var video, Var phonemes, const Mask& video_mask,
                                   const Mask& phoneme_mask, double residual_dropout) {
  if (video.cols() != phonemes.cols()) {
    throw ShapeError("aligner: hidden sizes differ (" + std::to_string(video.cols()) + " vs " +
                     std::to_string(phonemes.cols()) + ")");
  }
  if (static_cast<Eigen::Index>(video_mask.size()) != video.rows() ||
      static_cast<Eigen::Index>(phoneme_mask.size()) != phonemes.rows()) {
    throw ShapeError("aligner: mask length mismatch");
  }
  if (count_valid(phoneme_mask) == 0) throw DataError("aligner: every phoneme position is masked");
  const double s = 1.0 / std::sqrt(static_cast<double>(video.cols()));
  Var a = ag::softmax_rows(ag::scale(ag::matmul_nt(video, phonemes), s), &phoneme_mask);
  Var h = ag::add(ag::matmul(a, phonemes), ag::dropout(ctx, video, residual_dropout));
  return {ag::mask_rows(h, video_mask), a};
}

Var upsample_nearest(Var h, int n) { return ag::repeat_rows(h, n); }

std::pair<long, long> diagonal_band(std::size_t s, std::size_t video_frames, std::size_t phonemes, double bandwidth) {
  const double k = static_cast<double>(phonemes) / static_cast<double>(video_frames);
  const double centre = k * static_cast<double>(s);
  long lo = std::lround(centre - bandwidth);
  long hi = std::lround(centre + bandwidth);
  lo = std::max(lo, 1L);
  hi = std::min(hi, static_cast<long>(phonemes));
  return {lo, hi};
}

namespace {

struct Band {
  std::vector<Eigen::Index> rows;             // tensor row per valid video frame
  std::vector<std::vector<Eigen::Index>> cols;  // tensor columns inside the band
};

Band make_band(const Mat& a, double bandwidth, const Mask* video_mask, const Mask* phoneme_mask) {
  if (video_mask && static_cast<Eigen::Index>(video_mask->size()) != a.rows()) {
    throw ShapeError("diagonal rate: video mask length mismatch");
  }
  if (phoneme_mask && static_cast<Eigen::Index>(phoneme_mask->size()) != a.cols()) {
    throw ShapeError("diagonal rate: phoneme mask length mismatch");
  }
  if (!(bandwidth >= 0.0)) throw ConfigError("diagonal rate: bandwidth must be >= 0");
  std::vector<Eigen::Index> valid_cols;
  for (Eigen::Index t = 0; t < a.cols(); ++t) {
    if (!phoneme_mask || (*phoneme_mask)[static_cast<std::size_t>(t)]) valid_cols.push_back(t);
  }
  Band band;
  for (Eigen::Index s = 0; s < a.rows(); ++s) {
    if (!video_mask || (*video_mask)[static_cast<std::size_t>(s)]) band.rows.push_back(s);
  }
  if (band.rows.empty()) throw DataError("diagonal rate: every video row is masked");
  if (valid_cols.empty()) throw DataError("diagonal rate: every phoneme column is masked");
  for (std::size_t i = 0; i < band.rows.size(); ++i) {
    auto [lo, hi] = diagonal_band(i + 1, band.rows.size(), valid_cols.size(), bandwidth);
    std::vector<Eigen::Index> cols;
    for (long t = lo; t <= hi; ++t) cols.push_back(valid_cols[static_cast<std::size_t>(t - 1)]);
    band.cols.push_back(std::move(cols));
  }
  return band;
}

double band_mass(const Mat& a, const Band& band) {
  double total = 0.0;
  for (std::size_t i = 0; i < band.rows.size(); ++i) {
    for (Eigen::Index t : band.cols[i]) total += a(band.rows[i], t);
  }
  return total / static_cast<double>(band.rows.size());
}

}  // namespace

double diagonal_rate(const Mat& attention, double bandwidth, const Mask* video_mask, const Mask* phoneme_mask) {
  return band_mass(attention, make_band(attention, bandwidth, video_mask, phoneme_mask));
}

Var diagonal_rate(Var attention, double bandwidth, const Mask* video_mask, const Mask* phoneme_mask) {
  Band band = make_band(attention.value(), bandwidth, video_mask, phoneme_mask);
  Mat out(1, 1);
  out(0, 0) = band_mass(attention.value(), band);
  const std::size_t id = attention.id;
  const Eigen::Index rows = attention.rows(), cols = attention.cols();
  return attention.tape->record(
      std::move(out), {attention},
      [id, rows, cols, band = std::move(band)](Tape& tape, const Mat& g, const Mat&) {
        Mat d = Mat::Zero(rows, cols);
        const double w = g(0, 0) / static_cast<double>(band.rows.size());
        for (std::size_t i = 0; i < band.rows.size(); ++i) {
          for (Eigen::Index t : band.cols[i]) d(band.rows[i], t) = w;
        }
        tape.accumulate(id, d);
      });
}

Var diagonal_constraint_loss(Var attention, double bandwidth, const Mask* video_mask, const Mask* phoneme_mask) {
  return ag::scale(diagonal_rate(attention, bandwidth, video_mask, phoneme_mask), -1.0);
}

double uniform_diagonal_rate(std::size_t video_frames, std::size_t phonemes, double bandwidth) {
  if (video_frames == 0 || phonemes == 0) throw DataError("uniform diagonal rate: empty shape");
  double total = 0.0;
  for (std::size_t s = 1; s <= video_frames; ++s) {
    auto [lo, hi] = diagonal_band(s, video_frames, phonemes, bandwidth);
    if (hi >= lo) total += static_cast<double>(hi - lo + 1);
  }
  return total / static_cast<double>(phonemes) / static_cast<double>(video_frames);
}

}  // namespace vdub
