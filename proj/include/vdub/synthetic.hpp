// Copyright 2026 The vdub Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "vdub/dataset.hpp"

namespace vdub {

struct SyntheticConfig {
  int num_samples = 220;
  int vocab_size = 20;  // distinct phones drawn from the frequency-ordered inventory
  int num_speakers = 1;
  int min_phonemes = 4;
  int max_phonemes = 8;
  int min_frames_per_phoneme = 2;
  int max_frames_per_phoneme = 3;
  int feature_dim = 32;
  int n_mels = 80;
  double feature_noise = 0.1;
  double face_noise = 0.3;
  double held_out_fraction = 0.1;  // tail of the sample list is tagged "test"
  MouthKind mouth_kind = MouthKind::kFeatures;
  FrameGeometry geometry;
  std::uint64_t seed = 7;

  void validate() const;
};

// The fixed random maps every sample is rendered from.
struct SyntheticWorld {
  std::vector<int> phone_ids;  // vocabulary ids of the phones in use
  Mat video_embedding;         // vocab_size x F
  Mat mel_embedding;           // vocab_size x n_mels
  RowVec position_direction;   // n_mels, scaled by position inside the phoneme
  Mat speaker_mel;             // num_speakers x n_mels
  Vec phone_pitch_hz;          // vocab_size, 0 for unvoiced phones
  Vec speaker_pitch_scale;     // num_speakers
  Mat face_centers;            // num_speakers x 4096
  Mat speaker_faces;           // num_speakers x 4096, center + fixed noise draw
};

SyntheticWorld make_synthetic_world(const SyntheticConfig& cfg, const PhonemeVocabulary& vocab);

// Face feature for `speaker` with a fresh noise draw around its cluster center.
Vec perturbed_face(const SyntheticWorld& world, int speaker, double noise, std::mt19937_64& rng);

// 96x96 mouth image for the phone at `phone_slot` (index into world.phone_ids).
Mat render_mouth_crop(int phone_slot, int vocab_size, std::mt19937_64& rng);

// Deterministic given cfg.seed.
std::vector<Sample> synthesize_samples(const SyntheticConfig& cfg, const PhonemeVocabulary& vocab);

// Writes the samples plus manifest.jsonl under dir.
DatasetIndex generate_synthetic_dataset(const SyntheticConfig& cfg, const std::filesystem::path& dir,
                                        const PhonemeVocabulary& vocab);

}  // namespace vdub
