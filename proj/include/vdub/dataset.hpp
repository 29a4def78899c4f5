// Copyright 2026 The vdub Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vdub/geometry.hpp"
#include "vdub/tensor.hpp"
#include "vdub/text.hpp"

namespace vdub {

enum class MouthKind { kFeatures, kCrops };

inline constexpr int kCropSize = 96;
inline constexpr int kFaceImageSize = 224;
inline constexpr int kFaceFeatureDim = 4096;

struct Sample {
  std::string id;
  std::string split = "train";
  int speaker = 0;
  std::vector<int> phoneme_ids;
  // T_v x F features, or T_v x (96*96) flattened mouth crops.
  Mat mouth;
  MouthKind mouth_kind = MouthKind::kFeatures;
  Vec face_feature;  // 4096-D
  Mat mel;           // T_m x n_mels
  Vec pitch;         // Hz, 0 = unvoiced
  Vec energy;
  FrameGeometry geometry;
  // Phoneme index per video frame; only known for synthetic data.
  std::vector<int> alignment;

  std::size_t video_frames() const { return static_cast<std::size_t>(mouth.rows()); }
  std::size_t mel_frames() const { return static_cast<std::size_t>(mel.rows()); }
};

// Throws DataError when T_m != n * T_v, lengths are empty, or values are not finite.
void validate_sample(const Sample& s);

struct ManifestRecord {
  std::string id;
  std::vector<std::string> phonemes;
  std::string mouth_features_path;
  std::string face_feature_path;
  std::string mel_path;
  std::string pitch_path;
  std::string energy_path;
  double fps = 25.0;
  int sr = 16000;
  int hop = 160;
  int win = 640;
  std::string split = "train";
  int speaker = 0;
  std::vector<int> alignment;

  bool operator==(const ManifestRecord&) const = default;
};

struct DatasetIndex {
  std::vector<ManifestRecord> samples;
  // Directory that relative record paths are resolved against.
  std::filesystem::path root;

  DatasetIndex filter_split(const std::string& split) const;
  std::filesystem::path resolve(const std::string& rel) const;
};

// Line-delimited JSON, one record per line. Validates required fields and,
// when check_files is set, that every referenced file exists.
DatasetIndex load_manifest(const std::filesystem::path& path, bool check_files = true);
void save_manifest(const DatasetIndex& index, const std::filesystem::path& path);

// Reads one record's payloads and reconciles the mel-side arrays to n * T_v.
Sample load_sample(const DatasetIndex& index, std::size_t i, const PhonemeVocabulary& vocab);
std::vector<Sample> load_samples(const DatasetIndex& index, const PhonemeVocabulary& vocab);

// Writes samples' payloads under dir and returns the (unsaved) index.
DatasetIndex write_samples(const std::vector<Sample>& samples, const std::filesystem::path& dir,
                           const PhonemeVocabulary& vocab);

}  // namespace vdub
