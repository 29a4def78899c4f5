// Copyright 2026 The vdub Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "vdub/model_config.hpp"
#include "vdub/synthetic.hpp"
#include "vdub/training.hpp"

namespace vdub {

using Json = nlohmann::ordered_json;

// Strict conversions: from_json rejects unknown keys and wrong types with a
// ConfigError naming the dotted key path. Missing keys keep their defaults.
Json to_json(const FrameGeometry& g);
Json to_json(const ModelConfig& c);
Json to_json(const TrainConfig& c);
Json to_json(const SyntheticConfig& c);
void from_json(const Json& j, FrameGeometry& g, const std::string& path = "geometry");
void from_json(const Json& j, ModelConfig& c, const std::string& path = "model");
void from_json(const Json& j, TrainConfig& c, const std::string& path = "train");
void from_json(const Json& j, SyntheticConfig& c, const std::string& path = "synth");

// Everything a command needs, resolved from file + flags.
struct RunConfig {
  ModelConfig model = ModelConfig::desk();
  TrainConfig train;
  FrameGeometry geometry;
  SyntheticConfig synth;
  std::uint64_t seed = 1;
  std::string lexicon;
  std::string face_backend = "precomputed";
  int griffin_lim_iters = 60;

  void validate() const;
};

Json to_json(const RunConfig& c);
void from_json(const Json& j, RunConfig& c);

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const Json& j, const std::filesystem::path& path);

// Applies "a.b.c=value" to j, parsing value as JSON when possible and as a
// string otherwise.
void apply_override(Json& j, const std::string& assignment);

}  // namespace vdub
