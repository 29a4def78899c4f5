// Copyright 2026 The vdub Authors
// SPDX-License-Identifier: Apache-2.0

#include "vdub/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vdub/audio.hpp"
#include "vdub/config.hpp"
#include "vdub/error.hpp"
#include "vdub/ndf.hpp"

namespace vdub {

Mat OracleEmbedder::embed_audio(const Mat& mel, int n) const {
  if (n < 1) throw ConfigError("embed_audio: n must be >= 1");
  const Eigen::Index t = mel.rows() / n;
  Mat out(t, mel.cols());
  for (Eigen::Index i = 0; i < t; ++i) out.row(i) = mel.middleRows(i * n, n).colwise().mean();
  return out;
}

Mat OracleEmbedder::embed_video(const Mat& video) const {
  if (weights_.size() == 0) return video;
  if (video.cols() + 1 != weights_.rows()) throw ShapeError("oracle embedder: video width does not match its map");
  Mat out = video * weights_.topRows(video.cols());
  out.rowwise() += weights_.row(video.cols());
  return out;
}

OracleEmbedder fit_oracle_embedder(std::span<const Sample> samples, double ridge) {
  if (samples.empty()) throw DataError("fit_oracle_embedder: no samples");
  const Eigen::Index f = samples[0].mouth.cols();
  const Eigen::Index m = samples[0].mel.cols();
  Mat xtx = Mat::Zero(f + 1, f + 1);
  Mat xty = Mat::Zero(f + 1, m);
  OracleEmbedder audio_side;
  for (const Sample& s : samples) {
    if (s.mouth.cols() != f || s.mel.cols() != m) throw ShapeError("fit_oracle_embedder: inconsistent widths");
    Mat x(s.mouth.rows(), f + 1);
    x.leftCols(f) = s.mouth;
    x.col(f).setOnes();
    const Mat y = audio_side.embed_audio(s.mel, s.geometry.upsample_factor());
    xtx += x.transpose() * x;
    xty += x.transpose() * y.topRows(x.rows());
  }
  xtx.diagonal().array() += ridge;
  return OracleEmbedder(xtx.ldlt().solve(xty));
}

std::unique_ptr<SyncEmbedder> make_sync_embedder(const std::string& name, std::span<const Sample> fit_samples) {
  if (name == "oracle") {
    if (fit_samples.empty()) return std::make_unique<OracleEmbedder>();
    return std::make_unique<OracleEmbedder>(fit_oracle_embedder(fit_samples));
  }
  throw ConfigError("unknown sync embedder '" + name + "' (available: oracle)");
}

SyncPair sync_embed(const Mat& mel, const Mat& video, int n, const SyncEmbedder& embedder) {
  if (n < 1) throw ConfigError("sync_embed: n must be >= 1");
  const Eigen::Index audio_frames = (mel.rows() + n - 1) / n;
  if (std::abs(audio_frames - video.rows()) > 1) {
    throw DataError("sync_embed: audio covers " + std::to_string(audio_frames) + " video frames, video has " +
                    std::to_string(video.rows()));
  }
  SyncPair p{embedder.embed_audio(mel, n), embedder.embed_video(video)};
  const Eigen::Index t = std::min(p.audio.rows(), p.video.rows());
  if (p.audio.cols() != p.video.cols()) throw ShapeError("sync_embed: embedding widths differ");
  p.audio.conservativeResize(t, Eigen::NoChange);
  p.video.conservativeResize(t, Eigen::NoChange);
  return p;
}

LseResult lse_metrics(const Mat& audio, const Mat& video, int max_offset, int window) {
  if (max_offset < 0 || window < 1) throw ConfigError("lse_metrics: bad offset range or window");
  if (audio.rows() != video.rows() || audio.cols() != video.cols()) {
    throw ShapeError("lse_metrics: audio and video embeddings differ in shape");
  }
  const Eigen::Index t = audio.rows();
  if (t < 2 * max_offset + window) {
    throw DataError("lse_metrics: sequences of length " + std::to_string(t) + " are shorter than 2*" +
                    std::to_string(max_offset) + "+" + std::to_string(window));
  }
  LseResult r;
  const Eigen::Index first = max_offset, last = t - max_offset - window;
  for (int o = -max_offset; o <= max_offset; ++o) {
    double acc = 0.0;
    for (Eigen::Index s = first; s <= last; ++s) {
      acc += std::sqrt((audio.middleRows(s + o, window) - video.middleRows(s, window)).squaredNorm());
    }
    r.curve.offsets.push_back(o);
    r.curve.distances.push_back(acc / static_cast<double>(last - first + 1));
  }
  const auto& d = r.curve.distances;
  const auto best = std::min_element(d.begin(), d.end());
  r.lse_d = *best;
  r.best_offset = r.curve.offsets[static_cast<std::size_t>(best - d.begin())];
  std::vector<double> sorted = d;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t k = sorted.size();
  const double median = k % 2 ? sorted[k / 2] : 0.5 * (sorted[k / 2 - 1] + sorted[k / 2]);
  r.lse_c = median - r.lse_d;
  return r;
}

EvalReport evaluate(const DubbingModel& model, std::span<const Sample> samples, const SyncEmbedder& embedder,
                    const EvalOptions& options) {
  if (samples.empty()) throw DataError("evaluate: no samples");
  EvalReport report;
  report.max_offset = options.max_offset;
  std::size_t synced = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    ModelInput in;
    in.phonemes = s.phoneme_ids;
    in.mouth = s.mouth;
    if (model.config().multi_speaker) in.face = s.face_feature;
    const Inference inf = model.infer(in);
    SampleReport row;
    row.id = s.id;
    row.mel_l1 = (inf.mel - s.mel).cwiseAbs().mean();
    const double b = std::max(1.0, std::round(0.2 * static_cast<double>(s.phoneme_ids.size())));
    row.rate = diagonal_rate(inf.attention, b);
    try {
      Mat mel = inf.mel;
      const int n = s.geometry.upsample_factor();
      if (options.use_vocoder) {
        MelParams mp = MelParams::from_geometry(s.geometry);
        mp.n_mels = static_cast<int>(inf.mel.cols());
        const std::vector<double> wav = griffin_lim(MelSpectrogram{inf.mel, mp}, options.griffin_lim_iters,
                                    mix_seed(options.seed, i));
        mel = mel_spectrogram(wav, mp).frames;
      }
      const SyncPair pair = sync_embed(mel, s.mouth, n, embedder);
      // Short clips get a narrower offset range so that every offset has windows.
      const int fit = static_cast<int>((pair.audio.rows() - options.window) / 2);
      row.max_offset = std::min(options.max_offset, fit);
      if (row.max_offset < 0) throw DataError("clip shorter than one sync window");
      const LseResult lse = lse_metrics(pair.audio, pair.video, row.max_offset, options.window);
      row.lse_d = lse.lse_d;
      row.lse_c = lse.lse_c;
      row.best_offset = lse.best_offset;
      row.distances = lse.curve.distances;
      report.lse_d += lse.lse_d;
      report.lse_c += lse.lse_c;
      ++synced;
    } catch (const Error& e) {
      row.error = e.what();
      ++report.failed;
    }
    report.mel_l1 += row.mel_l1;
    report.mean_rate += row.rate;
    report.samples.push_back(std::move(row));
  }
  const double inv = 1.0 / static_cast<double>(samples.size());
  report.mel_l1 *= inv;
  report.mean_rate *= inv;
  if (synced > 0) {
    report.lse_d /= static_cast<double>(synced);
    report.lse_c /= static_cast<double>(synced);
  } else {
    report.lse_d = report.lse_c = std::numeric_limits<double>::quiet_NaN();
  }
  return report;
}

void write_report(const EvalReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  Json j;
  j["lse_d"] = report.lse_d;
  j["lse_c"] = report.lse_c;
  j["mean_rate"] = report.mean_rate;
  j["mel_l1"] = report.mel_l1;
  j["failed"] = report.failed;
  j["max_offset"] = report.max_offset;
  Json rows = Json::array();
  for (const auto& s : report.samples) {
    Json r;
    r["id"] = s.id;
    r["mel_l1"] = s.mel_l1;
    r["r"] = s.rate;
    if (s.error.empty()) {
      r["lse_d"] = s.lse_d;
      r["lse_c"] = s.lse_c;
      r["best_offset"] = s.best_offset;
      r["max_offset"] = s.max_offset;
    } else {
      r["error"] = s.error;
    }
    rows.push_back(r);
  }
  j["samples"] = rows;
  write_json_file(j, dir / "report.json");

  const int width = 2 * report.max_offset + 1;
  Mat table = Mat::Constant(static_cast<Eigen::Index>(report.samples.size()), width, -1.0);
  for (std::size_t i = 0; i < report.samples.size(); ++i) {
    const auto& s = report.samples[i];
    for (std::size_t k = 0; k < s.distances.size(); ++k) {
      const int offset = static_cast<int>(k) - s.max_offset;
      table(static_cast<Eigen::Index>(i), offset + report.max_offset) = s.distances[k];
    }
  }
  write_matrix(dir / "distances.ndf", table);
}

}  // namespace vdub
