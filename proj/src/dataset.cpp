// Copyright 2026 The vdub Authors
// SPDX-License-Identifier: Apache-2.0

#include "vdub/dataset.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "vdub/error.hpp"
#include "vdub/ndf.hpp"

namespace vdub {

using nlohmann::json;

void validate_sample(const Sample& s) {
  const std::string tag = "sample '" + s.id + "': ";
  if (s.phoneme_ids.empty()) throw DataError(tag + "no phonemes");
  if (s.mouth.rows() < 1) throw DataError(tag + "no video frames");
  const int n = s.geometry.upsample_factor();
  if (s.mel.rows() != s.mouth.rows() * n) {
    throw DataError(tag + "mel has " + std::to_string(s.mel.rows()) + " frames, expected " +
                    std::to_string(s.mouth.rows() * n));
  }
  if (s.pitch.size() != s.mel.rows() || s.energy.size() != s.mel.rows()) {
    throw DataError(tag + "pitch/energy length differs from mel length");
  }
  if (s.face_feature.size() != 0 && s.face_feature.size() != kFaceFeatureDim) {
    throw DataError(tag + "face feature must be " + std::to_string(kFaceFeatureDim) + "-D");
  }
  if (!s.mouth.allFinite() || !s.mel.allFinite() || !s.pitch.allFinite() || !s.energy.allFinite() ||
      !s.face_feature.allFinite()) {
    throw DataError(tag + "non-finite values");
  }
  if (!s.alignment.empty() && s.alignment.size() != s.video_frames()) {
    throw DataError(tag + "alignment length differs from video length");
  }
}

DatasetIndex DatasetIndex::filter_split(const std::string& split) const {
  DatasetIndex out;
  out.root = root;
  for (const auto& r : samples) {
    if (r.split == split) out.samples.push_back(r);
  }
  return out;
}

std::filesystem::path DatasetIndex::resolve(const std::string& rel) const {
  std::filesystem::path p(rel);
  return p.is_absolute() ? p : root / p;
}

namespace {

// Manifest key -> the Sample field it feeds, used in error messages.
struct PathField {
  const char* key;
  const char* role;
  std::string ManifestRecord::*member;
};

const PathField kPathFields[] = {
    {"mouth_features_path", "mouth_features", &ManifestRecord::mouth_features_path},
    {"face_feature_path", "face_feature", &ManifestRecord::face_feature_path},
    {"mel_path", "mel_target", &ManifestRecord::mel_path},
    {"pitch_path", "pitch_target", &ManifestRecord::pitch_path},
    {"energy_path", "energy_target", &ManifestRecord::energy_path},
};

ManifestRecord parse_record(const json& j, std::size_t index) {
  const std::string where = "manifest record " + std::to_string(index) + ": ";
  if (!j.is_object()) throw SchemaError(where + "not an object");
  auto need = [&](const char* key, const char* role) -> const json& {
    if (!j.contains(key)) {
      throw SchemaError(where + "missing field '" + key + "' (" + role + ")");
    }
    return j.at(key);
  };
  ManifestRecord r;
  try {
    r.id = need("id", "id").get<std::string>();
    r.phonemes = split_symbols(need("phonemes", "phoneme_ids").get<std::string>());
    for (const auto& f : kPathFields) r.*f.member = need(f.key, f.role).get<std::string>();
    r.fps = need("fps", "geometry").get<double>();
    r.sr = need("sr", "geometry").get<int>();
    r.hop = j.value("hop", 160);
    r.win = j.value("win", 640);
    r.split = j.value("split", std::string("train"));
    r.speaker = j.value("speaker", 0);
    if (j.contains("alignment")) r.alignment = j.at("alignment").get<std::vector<int>>();
  } catch (const json::exception& e) {
    throw SchemaError(where + e.what());
  }
  static const std::set<std::string> kKnown = {
      "id", "phonemes", "mouth_features_path", "face_feature_path", "mel_path", "pitch_path",
      "energy_path", "fps", "sr", "hop", "win", "split", "speaker", "alignment"};
  for (const auto& [k, v] : j.items()) {
    if (!kKnown.count(k)) throw SchemaError(where + "unknown field '" + k + "'");
  }
  if (r.phonemes.empty()) throw SchemaError(where + "empty phoneme sequence");
  return r;
}

json to_json(const ManifestRecord& r) {
  json j;
  j["id"] = r.id;
  j["phonemes"] = join_symbols(r.phonemes);
  for (const auto& f : kPathFields) j[f.key] = r.*f.member;
  j["fps"] = r.fps;
  j["sr"] = r.sr;
  j["hop"] = r.hop;
  j["win"] = r.win;
  j["split"] = r.split;
  j["speaker"] = r.speaker;
  if (!r.alignment.empty()) j["alignment"] = r.alignment;
  return j;
}

}  // namespace

DatasetIndex load_manifest(const std::filesystem::path& path, bool check_files) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest: " + path.string());
  DatasetIndex index;
  index.root = path.parent_path();
  std::set<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::size_t i = index.samples.size();
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw SchemaError("manifest record " + std::to_string(i) + ": " + e.what());
    }
    ManifestRecord r = parse_record(j, i);
    if (!ids.insert(r.id).second) {
      throw SchemaError("manifest record " + std::to_string(i) + ": duplicate id '" + r.id + "'");
    }
    if (check_files) {
      for (const auto& f : kPathFields) {
        const auto p = index.resolve(r.*f.member);
        if (!std::filesystem::exists(p)) {
          throw SchemaError("manifest record " + std::to_string(i) + ": " + f.key + " (" + f.role +
                            ") does not exist: " + p.string());
        }
      }
    }
    index.samples.push_back(std::move(r));
  }
  return index;
}

void save_manifest(const DatasetIndex& index, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest: " + path.string());
  for (const auto& r : index.samples) out << to_json(r).dump() << '\n';
  if (!out) throw DataError("manifest write failed: " + path.string());
}

Sample load_sample(const DatasetIndex& index, std::size_t i, const PhonemeVocabulary& vocab) {
  const ManifestRecord& r = index.samples.at(i);
  Sample s;
  s.id = r.id;
  s.split = r.split;
  s.speaker = r.speaker;
  s.alignment = r.alignment;
  s.geometry = FrameGeometry{r.sr, r.hop, r.win, r.fps};
  s.phoneme_ids = vocab.encode(r.phonemes, false);

  NdArray mouth = read_ndf(index.resolve(r.mouth_features_path));
  if (mouth.shape.size() == 3) {
    if (mouth.shape[1] != kCropSize || mouth.shape[2] != kCropSize) {
      throw DataError("sample '" + r.id + "': mouth crops must be T x 96 x 96");
    }
    s.mouth_kind = MouthKind::kCrops;
  } else if (mouth.shape.size() != 2) {
    throw DataError("sample '" + r.id + "': mouth features must be rank 2 or 3");
  }
  s.mouth = read_matrix(index.resolve(r.mouth_features_path));
  s.face_feature = read_vector(index.resolve(r.face_feature_path));

  Mat mel = read_matrix(index.resolve(r.mel_path));
  Vec pitch = read_vector(index.resolve(r.pitch_path));
  Vec energy = read_vector(index.resolve(r.energy_path));
  if (pitch.size() != mel.rows() || energy.size() != mel.rows()) {
    throw DataError("sample '" + r.id + "': pitch/energy length differs from mel length");
  }
  const LengthPlan plan = reconcile_lengths(static_cast<std::size_t>(mel.rows()), s.video_frames(),
                                            s.geometry.upsample_factor(), r.id);
  s.mel = apply_length_plan(mel, plan);
  s.pitch = apply_length_plan(pitch, plan);
  s.energy = apply_length_plan(energy, plan);
  validate_sample(s);
  return s;
}

std::vector<Sample> load_samples(const DatasetIndex& index, const PhonemeVocabulary& vocab) {
  std::vector<Sample> out;
  out.reserve(index.samples.size());
  for (std::size_t i = 0; i < index.samples.size(); ++i) out.push_back(load_sample(index, i, vocab));
  return out;
}

DatasetIndex write_samples(const std::vector<Sample>& samples, const std::filesystem::path& dir,
                           const PhonemeVocabulary& vocab) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "features");
  DatasetIndex index;
  index.root = dir;
  for (const Sample& s : samples) {
    validate_sample(s);
    ManifestRecord r;
    r.id = s.id;
    r.phonemes = vocab.decode(s.phoneme_ids);
    const std::string base = "features/" + s.id;
    r.mouth_features_path = base + ".mouth.ndf";
    r.face_feature_path = base + ".face.ndf";
    r.mel_path = base + ".mel.ndf";
    r.pitch_path = base + ".pitch.ndf";
    r.energy_path = base + ".energy.ndf";
    r.fps = s.geometry.video_fps;
    r.sr = s.geometry.sample_rate;
    r.hop = s.geometry.hop_size;
    r.win = s.geometry.win_size;
    r.split = s.split;
    r.speaker = s.speaker;
    r.alignment = s.alignment;
    if (s.mouth_kind == MouthKind::kCrops) {
      NdArray a;
      a.shape = {s.mouth.rows(), kCropSize, kCropSize};
      a.data.assign(s.mouth.data(), s.mouth.data() + s.mouth.size());
      write_ndf(dir / r.mouth_features_path, a);
    } else {
      write_matrix(dir / r.mouth_features_path, s.mouth);
    }
    write_vector(dir / r.face_feature_path, s.face_feature);
    write_matrix(dir / r.mel_path, s.mel);
    write_vector(dir / r.pitch_path, s.pitch);
    write_vector(dir / r.energy_path, s.energy);
    index.samples.push_back(std::move(r));
  }
  return index;
}

}  // namespace vdub
