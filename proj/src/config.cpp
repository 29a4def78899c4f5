// Copyright 2026 The vdub Authors
// SPDX-License-Identifier: Apache-2.0

#include "vdub/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "vdub/error.hpp"

namespace vdub {

namespace {

// Field lists shared by the reader and the writer. S may be const.
template <class F, class S>
void visit_geometry(F& f, S& g) {
  f("sample_rate", g.sample_rate);
  f("hop_size", g.hop_size);
  f("win_size", g.win_size);
  f("video_fps", g.video_fps);
}

template <class F, class S>
void visit_model(F& f, S& c) {
  f("d", c.d);
  f("phoneme_blocks", c.phoneme_blocks);
  f("video_blocks", c.video_blocks);
  f("decoder_blocks", c.decoder_blocks);
  f("heads", c.heads);
  f("conv_kernel", c.conv_kernel);
  f("conv_filter", c.conv_filter);
  f("encoder_dropout", c.encoder_dropout);
  f("decoder_dropout", c.decoder_dropout);
  f("aligner_dropout", c.aligner_dropout);
  f("vocab_size", c.vocab_size);
  f("n_mels", c.n_mels);
  f("upsample", c.upsample);
  f("video_input", c.video_input);
  f("video_feature_dim", c.video_feature_dim);
  f("frontend_channels", c.frontend_channels);
  f("multi_speaker", c.multi_speaker);
  f("ise_hidden", c.ise_hidden);
  f("predictor_filter", c.predictor_filter);
  f("predictor_kernel", c.predictor_kernel);
  f("predictor_dropout", c.predictor_dropout);
  f("variance_bins", c.variance_bins);
  f("log_pitch_min", c.log_pitch_min);
  f("log_pitch_max", c.log_pitch_max);
  f("energy_min", c.energy_min);
  f("energy_max", c.energy_max);
}

template <class F, class S>
void visit_weights(F& f, S& w) {
  f("mel", w.mel);
  f("pitch", w.pitch);
  f("energy", w.energy);
}

template <class F, class S>
void visit_diagonal(F& f, S& d) {
  f("bandwidth", d.bandwidth);
  f("bandwidth_ratio", d.bandwidth_ratio);
  f("weight", d.weight);
}

template <class F, class S>
void visit_train(F& f, S& c) {
  f("batch_size", c.batch_size);
  f("max_steps", c.max_steps);
  f("warmup_steps", c.warmup_steps);
  f("lr_scale", c.lr_scale);
  f("beta1", c.beta1);
  f("beta2", c.beta2);
  f("epsilon", c.epsilon);
  f("grad_clip", c.grad_clip);
  f("checkpoint_every", c.checkpoint_every);
  f("log_every", c.log_every);
  f("threads", c.threads);
  f("seed", c.seed);
  f("loss_weights", c.weights);
  f("diagonal", c.diagonal);
}

template <class F, class S>
void visit_synth(F& f, S& c) {
  f("num_samples", c.num_samples);
  f("vocab_size", c.vocab_size);
  f("num_speakers", c.num_speakers);
  f("min_phonemes", c.min_phonemes);
  f("max_phonemes", c.max_phonemes);
  f("min_frames_per_phoneme", c.min_frames_per_phoneme);
  f("max_frames_per_phoneme", c.max_frames_per_phoneme);
  f("feature_dim", c.feature_dim);
  f("n_mels", c.n_mels);
  f("feature_noise", c.feature_noise);
  f("face_noise", c.face_noise);
  f("held_out_fraction", c.held_out_fraction);
  f("mouth_kind", c.mouth_kind);
  f("seed", c.seed);
}

template <class F, class S>
void visit_run(F& f, S& c) {
  f("seed", c.seed);
  f("lexicon", c.lexicon);
  f("face_backend", c.face_backend);
  f("griffin_lim_iters", c.griffin_lim_iters);
  f("geometry", c.geometry);
  f("model", c.model);
  f("train", c.train);
  f("synth", c.synth);
}

const char* mouth_name(MouthKind k) { return k == MouthKind::kCrops ? "crops" : "features"; }

struct Writer {
  Json& j;

  template <class T>
  void operator()(const char* key, const T& v) { j[key] = v; }
  void operator()(const char* key, const MouthKind& v) { j[key] = mouth_name(v); }
  void operator()(const char* key, const std::optional<double>& v) {
    j[key] = v ? Json(*v) : Json(nullptr);
  }
  void operator()(const char* key, const FrameGeometry& v) { j[key] = to_json(v); }
  void operator()(const char* key, const ModelConfig& v) { j[key] = to_json(v); }
  void operator()(const char* key, const TrainConfig& v) { j[key] = to_json(v); }
  void operator()(const char* key, const SyntheticConfig& v) { j[key] = to_json(v); }
  void operator()(const char* key, const LossWeights& v) {
    Json sub = Json::object();
    Writer w{sub};
    visit_weights(w, v);
    j[key] = sub;
  }
  void operator()(const char* key, const DiagonalConfig& v) {
    Json sub = Json::object();
    Writer w{sub};
    visit_diagonal(w, v);
    j[key] = sub;
  }
};

struct Reader {
  const Json& j;
  std::string path;
  std::set<std::string> known;

  std::string where(const char* key) const { return path.empty() ? key : path + "." + key; }

  template <class T>
  void operator()(const char* key, T& v) {
    known.insert(key);
    if (!j.contains(key)) return;
    const Json& x = j.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!x.is_boolean()) throw ConfigError(where(key) + ": expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!x.is_number_integer()) throw ConfigError(where(key) + ": expected an integer");
      if (std::is_unsigned_v<T> && x.is_number_integer() && !x.is_number_unsigned() && x.get<long long>() < 0) {
        throw ConfigError(where(key) + ": expected a non-negative integer");
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!x.is_number()) throw ConfigError(where(key) + ": expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!x.is_string()) throw ConfigError(where(key) + ": expected a string");
    }
    v = x.get<T>();
  }
  void operator()(const char* key, MouthKind& v) {
    known.insert(key);
    if (!j.contains(key)) return;
    const Json& x = j.at(key);
    if (x == "features") {
      v = MouthKind::kFeatures;
    } else if (x == "crops") {
      v = MouthKind::kCrops;
    } else {
      throw ConfigError(where(key) + ": expected \"features\" or \"crops\"");
    }
  }
  void operator()(const char* key, std::optional<double>& v) {
    known.insert(key);
    if (!j.contains(key)) return;
    const Json& x = j.at(key);
    if (x.is_null()) {
      v.reset();
    } else if (x.is_number()) {
      v = x.get<double>();
    } else {
      throw ConfigError(where(key) + ": expected a number or null");
    }
  }
  template <class S, class Visit>
  void nested(const char* key, S& v, Visit visit) {
    known.insert(key);
    if (!j.contains(key)) return;
    read_object(j.at(key), v, where(key), visit);
  }
  void operator()(const char* key, FrameGeometry& v) { from_json(sub(key), v, where(key)); }
  void operator()(const char* key, ModelConfig& v) { from_json(sub(key), v, where(key)); }
  void operator()(const char* key, TrainConfig& v) { from_json(sub(key), v, where(key)); }
  void operator()(const char* key, SyntheticConfig& v) { from_json(sub(key), v, where(key)); }
  void operator()(const char* key, LossWeights& v) {
    nested(key, v, [](Reader& r, LossWeights& w) { visit_weights(r, w); });
  }
  void operator()(const char* key, DiagonalConfig& v) {
    nested(key, v, [](Reader& r, DiagonalConfig& d) { visit_diagonal(r, d); });
  }

  const Json& sub(const char* key) {
    known.insert(key);
    static const Json kEmpty = Json::object();
    return j.contains(key) ? j.at(key) : kEmpty;
  }

  void finish() const {
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!known.count(it.key())) throw ConfigError("unknown config key '" + where(it.key().c_str()) + "'");
    }
  }

  template <class S, class Visit>
  static void read_object(const Json& j, S& v, const std::string& path, Visit visit) {
    if (!j.is_object()) throw ConfigError(path + ": expected an object");
    Reader r{j, path, {}};
    visit(r, v);
    r.finish();
  }
};

template <class S, class Visit>
Json write_object(const S& v, Visit visit) {
  Json j = Json::object();
  Writer w{j};
  visit(w, v);
  return j;
}

}  // namespace

Json to_json(const FrameGeometry& g) {
  return write_object(g, [](Writer& w, const FrameGeometry& v) { visit_geometry(w, v); });
}
Json to_json(const ModelConfig& c) {
  return write_object(c, [](Writer& w, const ModelConfig& v) { visit_model(w, v); });
}
Json to_json(const TrainConfig& c) {
  return write_object(c, [](Writer& w, const TrainConfig& v) { visit_train(w, v); });
}
Json to_json(const SyntheticConfig& c) {
  Json j = write_object(c, [](Writer& w, const SyntheticConfig& v) { visit_synth(w, v); });
  return j;
}
Json to_json(const RunConfig& c) {
  return write_object(c, [](Writer& w, const RunConfig& v) { visit_run(w, v); });
}

void from_json(const Json& j, FrameGeometry& g, const std::string& path) {
  Reader::read_object(j, g, path, [](Reader& r, FrameGeometry& v) { visit_geometry(r, v); });
}
void from_json(const Json& j, ModelConfig& c, const std::string& path) {
  Reader::read_object(j, c, path, [](Reader& r, ModelConfig& v) { visit_model(r, v); });
}
void from_json(const Json& j, TrainConfig& c, const std::string& path) {
  Reader::read_object(j, c, path, [](Reader& r, TrainConfig& v) { visit_train(r, v); });
}
void from_json(const Json& j, SyntheticConfig& c, const std::string& path) {
  Reader::read_object(j, c, path, [](Reader& r, SyntheticConfig& v) { visit_synth(r, v); });
}
void from_json(const Json& j, RunConfig& c) {
  Reader::read_object(j, c, "", [](Reader& r, RunConfig& v) { visit_run(r, v); });
}

void RunConfig::validate() const {
  model.validate();
  train.validate();
  synth.validate();
  if (geometry.upsample_factor() != model.upsample) {
    throw ConfigError("model.upsample (" + std::to_string(model.upsample) +
                      ") does not match the frame geometry (" + std::to_string(geometry.upsample_factor()) + ")");
  }
  if (griffin_lim_iters < 1) throw ConfigError("griffin_lim_iters must be >= 1");
  (void)make_face_backend(face_backend);
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
}

void write_json_file(const Json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

void apply_override(Json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw UsageError("override must look like key=value: '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  Json value;
  try {
    value = Json::parse(raw);
  } catch (const nlohmann::json::parse_error&) {
    value = raw;
  }
  Json* node = &j;
  std::stringstream ks(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ks, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    Json& next = (*node)[parts[i]];
    if (next.is_null()) next = Json::object();
    if (!next.is_object()) throw ConfigError("override path '" + key + "' crosses a non-object value");
    node = &next;
  }
  (*node)[parts.back()] = value;
}

}  // namespace vdub
