// Copyright 2026 The vdub Authors
// SPDX-License-Identifier: Apache-2.0

#include "vdub/synthetic.hpp"

#include <cmath>
#include <cstdio>

#include "vdub/error.hpp"

namespace vdub {

void SyntheticConfig::validate() const {
  if (num_samples < 1) throw ConfigError("synthetic: num_samples must be >= 1");
  if (vocab_size < 2) throw ConfigError("synthetic: vocab_size must be >= 2");
  if (num_speakers < 1) throw ConfigError("synthetic: num_speakers must be >= 1");
  if (min_phonemes < 1 || max_phonemes < min_phonemes) {
    throw ConfigError("synthetic: phoneme count range is empty");
  }
  if (min_frames_per_phoneme < 1 || max_frames_per_phoneme < min_frames_per_phoneme) {
    throw ConfigError("synthetic: frames-per-phoneme range is empty");
  }
  if (feature_dim < 1 || n_mels < 1) throw ConfigError("synthetic: feature_dim and n_mels must be >= 1");
  if (held_out_fraction < 0.0 || held_out_fraction >= 1.0) {
    throw ConfigError("synthetic: held_out_fraction must be in [0, 1)");
  }
  if (feature_noise < 0.0 || face_noise < 0.0) throw ConfigError("synthetic: noise must be >= 0");
  (void)geometry.upsample_factor();
}

namespace {

Mat gaussian(Eigen::Index rows, Eigen::Index cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, stddev);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
  return m;
}

}  // namespace

SyntheticWorld make_synthetic_world(const SyntheticConfig& cfg, const PhonemeVocabulary& vocab) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  SyntheticWorld w;
  for (const auto& s : PhonemeVocabulary::frequent_phones(static_cast<std::size_t>(cfg.vocab_size))) {
    w.phone_ids.push_back(vocab.id(s));
  }
  w.video_embedding = gaussian(cfg.vocab_size, cfg.feature_dim, 1.0, rng);
  w.mel_embedding = gaussian(cfg.vocab_size, cfg.n_mels, 0.8, rng);
  w.position_direction = gaussian(1, cfg.n_mels, 0.8, rng);
  w.speaker_mel = gaussian(cfg.num_speakers, cfg.n_mels, 0.6, rng);
  if (cfg.num_speakers == 1) w.speaker_mel.setZero();
  std::uniform_real_distribution<double> hz(100.0, 220.0);
  std::bernoulli_distribution voiced(0.75);
  w.phone_pitch_hz.resize(cfg.vocab_size);
  for (int p = 0; p < cfg.vocab_size; ++p) w.phone_pitch_hz(p) = voiced(rng) ? hz(rng) : 0.0;
  w.speaker_pitch_scale.resize(cfg.num_speakers);
  for (int s = 0; s < cfg.num_speakers; ++s) w.speaker_pitch_scale(s) = 1.0 + 0.3 * s / std::max(1, cfg.num_speakers - 1);
  w.face_centers = gaussian(cfg.num_speakers, kFaceFeatureDim, 1.0, rng);
  w.speaker_faces = w.face_centers + gaussian(cfg.num_speakers, kFaceFeatureDim, cfg.face_noise, rng);
  return w;
}

Vec perturbed_face(const SyntheticWorld& world, int speaker, double noise, std::mt19937_64& rng) {
  Mat n = gaussian(1, kFaceFeatureDim, noise, rng);
  return (world.face_centers.row(speaker) + n.row(0)).transpose();
}

Mat render_mouth_crop(int phone_slot, int vocab_size, std::mt19937_64& rng) {
  // An ellipse whose opening and width depend on the phone, plus pixel noise.
  const double openness = 4.0 + 28.0 * phone_slot / std::max(1, vocab_size - 1);
  const double width = 18.0 + 20.0 * ((phone_slot * 7) % vocab_size) / std::max(1, vocab_size - 1);
  std::normal_distribution<double> noise(0.0, 0.05);
  Mat img(kCropSize, kCropSize);
  const double c = (kCropSize - 1) / 2.0;
  for (int y = 0; y < kCropSize; ++y) {
    for (int x = 0; x < kCropSize; ++x) {
      const double dy = (y - c) / openness;
      const double dx = (x - c) / width;
      img(y, x) = (dx * dx + dy * dy <= 1.0 ? 1.0 : 0.0) + noise(rng);
    }
  }
  return img;
}

std::vector<Sample> synthesize_samples(const SyntheticConfig& cfg, const PhonemeVocabulary& vocab) {
  const SyntheticWorld world = make_synthetic_world(cfg, vocab);
  const int n = cfg.geometry.upsample_factor();
  // A separate stream from the world so that sample draws do not shift when
  // world construction changes shape.
  std::mt19937_64 rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);
  std::uniform_int_distribution<int> len_dist(cfg.min_phonemes, cfg.max_phonemes);
  std::uniform_int_distribution<int> dur_dist(cfg.min_frames_per_phoneme, cfg.max_frames_per_phoneme);
  std::uniform_int_distribution<int> phone_dist(0, cfg.vocab_size - 1);
  std::uniform_int_distribution<int> speaker_dist(0, cfg.num_speakers - 1);
  std::normal_distribution<double> feat_noise(0.0, 1.0);

  const int held_out = static_cast<int>(std::lround(cfg.held_out_fraction * cfg.num_samples));
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(cfg.num_samples));
  for (int i = 0; i < cfg.num_samples; ++i) {
    Sample s;
    char id[32];
    std::snprintf(id, sizeof(id), "syn%05d", i);
    s.id = id;
    s.split = i >= cfg.num_samples - held_out ? "test" : "train";
    s.geometry = cfg.geometry;
    s.speaker = speaker_dist(rng);
    s.mouth_kind = cfg.mouth_kind;

    const int tp = len_dist(rng);
    std::vector<int> slots;
    std::vector<int> durations;
    for (int k = 0; k < tp; ++k) {
      int slot = phone_dist(rng);
      // No immediate repeats, so phone boundaries are visible in the video.
      while (!slots.empty() && slot == slots.back()) slot = phone_dist(rng);
      slots.push_back(slot);
      durations.push_back(dur_dist(rng));
      s.phoneme_ids.push_back(world.phone_ids[static_cast<std::size_t>(slot)]);
    }
    int tv = 0;
    for (int d : durations) tv += d;

    s.mouth = cfg.mouth_kind == MouthKind::kCrops ? Mat(tv, kCropSize * kCropSize)
                                                  : Mat(tv, cfg.feature_dim);
    s.mel.resize(tv * n, cfg.n_mels);
    s.pitch.resize(tv * n);
    s.energy.resize(tv * n);
    int frame = 0;
    for (int k = 0; k < tp; ++k) {
      const int slot = slots[static_cast<std::size_t>(k)];
      const int dur = durations[static_cast<std::size_t>(k)];
      for (int f = 0; f < dur; ++f, ++frame) {
        s.alignment.push_back(k);
        if (cfg.mouth_kind == MouthKind::kCrops) {
          Mat img = render_mouth_crop(slot, cfg.vocab_size, rng);
          s.mouth.row(frame) = Eigen::Map<const RowVec>(img.data(), img.size());
        } else {
          for (int c = 0; c < cfg.feature_dim; ++c) {
            s.mouth(frame, c) = world.video_embedding(slot, c) + cfg.feature_noise * feat_noise(rng);
          }
        }
      }
      const int span = dur * n;
      const int first = (frame - dur) * n;
      for (int j = 0; j < span; ++j) {
        const double pos = (j + 0.5) / span - 0.5;
        const int m = first + j;
        s.mel.row(m) = world.mel_embedding.row(slot) + pos * world.position_direction +
                       world.speaker_mel.row(s.speaker);
        const double base = world.phone_pitch_hz(slot);
        s.pitch(m) = base > 0.0 ? base * world.speaker_pitch_scale(s.speaker) * (1.0 + 0.1 * pos) : 0.0;
        s.energy(m) = s.mel.row(m).array().exp().matrix().norm() / std::sqrt(static_cast<double>(cfg.n_mels));
      }
    }
    s.face_feature = world.speaker_faces.row(s.speaker).transpose();
    validate_sample(s);
    out.push_back(std::move(s));
  }
  return out;
}

DatasetIndex generate_synthetic_dataset(const SyntheticConfig& cfg, const std::filesystem::path& dir,
                                        const PhonemeVocabulary& vocab) {
  DatasetIndex index = write_samples(synthesize_samples(cfg, vocab), dir, vocab);
  save_manifest(index, dir / "manifest.jsonl");
  return index;
}

}  // namespace vdub
