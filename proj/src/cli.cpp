// Copyright 2026 The vdub Authors
// SPDX-License-Identifier: Apache-2.0

#include "vdub/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

#include "vdub/audio.hpp"
#include "vdub/config.hpp"
#include "vdub/evaluation.hpp"
#include "vdub/ndf.hpp"
#include "vdub/synthetic.hpp"
#include "vdub/text.hpp"
#include "vdub/training.hpp"

#ifndef VDUB_DEFAULT_LEXICON
#define VDUB_DEFAULT_LEXICON "data/lexicon.tsv"
#endif

namespace vdub {

namespace fs = std::filesystem;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUsage:
    case ErrorKind::kConfig:
      return kExitUsage;
    case ErrorKind::kNumeric:
      return kExitNumeric;
    default:
      return kExitData;
  }
}

namespace {

// Config file (flag or ND_CONFIG) overlaid by --set assignments and by the
// dedicated flags of each command, in that order.
struct ConfigFlags {
  std::string file;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;

  void add_to(CLI::App* app) {
    app->add_option("--config", file, "JSON config file (default: $ND_CONFIG)");
    app->add_option("--set", sets, "Override a config key, e.g. --set train.max_steps=500");
    app->add_option("--seed", seed, "Random seed");
  }

  RunConfig resolve(const std::vector<std::string>& extra = {}) const {
    Json j = Json::object();
    std::string path = file;
    if (path.empty()) {
      if (const char* env = std::getenv("ND_CONFIG")) path = env;
    }
    if (!path.empty()) j = read_json_file(path);
    if (seed) {
      apply_override(j, "seed=" + std::to_string(*seed));
      apply_override(j, "train.seed=" + std::to_string(*seed));
      apply_override(j, "synth.seed=" + std::to_string(*seed));
    }
    for (const auto& s : sets) apply_override(j, s);
    for (const auto& s : extra) apply_override(j, s);
    RunConfig c;
    from_json(j, c);
    if (c.lexicon.empty()) c.lexicon = VDUB_DEFAULT_LEXICON;
    return c;
  }
};

void echo_config(const RunConfig& c, const fs::path& dir) {
  fs::create_directories(dir);
  write_json_file(to_json(c), dir / "config.json");
}

std::vector<Sample> split_of(const std::vector<Sample>& all, const std::string& split) {
  std::vector<Sample> out;
  for (const auto& s : all) {
    if (split == "all" || s.split == split) out.push_back(s);
  }
  return out;
}

int cmd_g2p(const std::string& lexicon_path, const std::string& text, const std::string& oov, std::ostream& out) {
  const Lexicon lex = load_lexicon(lexicon_path);
  if (oov != "error" && oov != "letters") throw UsageError("--oov must be 'error' or 'letters'");
  const auto seq = text_to_phonemes(text, lex, oov == "letters" ? OovPolicy::kLetters : OovPolicy::kError);
  out << join_symbols(seq.symbols) << "\n";
  return kExitOk;
}

int cmd_synth(const ConfigFlags& flags, const std::string& out_dir, std::ostream& out) {
  RunConfig c = flags.resolve();
  c.synth.geometry = c.geometry;
  c.synth.validate();
  const auto vocab = PhonemeVocabulary::arpabet();
  const DatasetIndex index = generate_synthetic_dataset(c.synth, out_dir, vocab);
  echo_config(c, out_dir);
  out << "wrote " << index.samples.size() << " samples to " << out_dir << "\n";
  return kExitOk;
}

int cmd_features(const ConfigFlags& flags, const std::vector<std::string>& wavs, const std::string& out_dir,
                 std::ostream& out) {
  const RunConfig c = flags.resolve();
  fs::create_directories(out_dir);
  const MelParams mp = MelParams::from_geometry(c.geometry);
  for (const auto& w : wavs) {
    const WavData wav = read_wav(w);
    if (wav.sample_rate != c.geometry.sample_rate) {
      throw DataError(w + ": sample rate " + std::to_string(wav.sample_rate) + " Hz, expected " +
                      std::to_string(c.geometry.sample_rate) + " Hz");
    }
    const auto mel = mel_spectrogram(wav.samples, mp);
    const std::string stem = (fs::path(out_dir) / fs::path(w).stem()).string();
    write_matrix(stem + ".mel.ndf", mel.frames);
    write_vector(stem + ".pitch.ndf", extract_pitch(wav.samples, c.geometry));
    write_vector(stem + ".energy.ndf", extract_energy(wav.samples, c.geometry));
    out << w << ": " << mel.frames.rows() << " frames\n";
  }
  echo_config(c, out_dir);
  return kExitOk;
}

ModelConfig model_for_data(RunConfig& c, const std::vector<Sample>& train) {
  ModelConfig m = c.model;
  const Sample& s = train.front();
  m.vocab_size = static_cast<int>(PhonemeVocabulary::arpabet().size());
  m.n_mels = static_cast<int>(s.mel.cols());
  m.video_input = s.mouth_kind;
  if (s.mouth_kind == MouthKind::kFeatures) m.video_feature_dim = static_cast<int>(s.mouth.cols());
  m.upsample = s.geometry.upsample_factor();
  fit_variance_ranges(m, train);
  c.model = m;
  c.geometry = s.geometry;
  return m;
}

int cmd_train(const ConfigFlags& flags, const std::string& manifest, const std::string& out_dir,
              const std::string& resume, std::optional<int> steps, std::ostream& out) {
  std::vector<std::string> extra;
  if (steps) extra.push_back("train.max_steps=" + std::to_string(*steps));
  RunConfig c = flags.resolve(extra);
  const auto vocab = PhonemeVocabulary::arpabet();
  const auto all = load_samples(load_manifest(manifest), vocab);
  auto train_set = split_of(all, "train");
  if (train_set.empty()) throw DataError("manifest has no samples in the 'train' split");
  std::optional<fs::path> resume_from;
  if (resume == "latest") {
    const fs::path p = latest_checkpoint(out_dir);
    if (p.empty()) throw DataError("no checkpoint to resume under " + out_dir);
    resume_from = p;
  } else if (!resume.empty()) {
    resume_from = resume;
  }
  ModelConfig m = model_for_data(c, train_set);
  if (resume_from) {
    // The checkpoint's fitted ranges win so that the restored weights see the same bins.
    m = load_model(*resume_from).config();
    c.model = m;
  }
  c.validate();
  echo_config(c, out_dir);
  DubbingModel model(m, c.seed);
  const auto result = train(model, c.train, std::move(train_set), out_dir, resume_from, [&](const StepRecord& r) {
    if (r.step % 100 == 0) {
      out << "step " << r.step << " total " << r.loss.total << " mel " << r.loss.mel_loss << " r " << r.loss.rate
          << "\n";
    }
  });
  out << "final checkpoint " << result.last_checkpoint.string() << "\n";
  return kExitOk;
}

int cmd_dub(const ConfigFlags& flags, const std::string& text, const std::string& video_path,
            const std::string& face_path, const std::string& checkpoint, const std::string& out_dir,
            const std::string& oov, std::ostream& out) {
  const RunConfig c = flags.resolve();
  const DubbingModel model = load_model(checkpoint);
  const ModelConfig& m = model.config();
  if (c.geometry.upsample_factor() != m.upsample) {
    throw GeometryError("frame geometry gives n=" + std::to_string(c.geometry.upsample_factor()) +
                        " but the checkpoint was trained with n=" + std::to_string(m.upsample));
  }
  const auto vocab = PhonemeVocabulary::arpabet();
  const Lexicon lex = load_lexicon(c.lexicon);
  const auto policy = oov == "letters" ? OovPolicy::kLetters : OovPolicy::kError;
  const auto seq = text_to_phonemes(text, lex, policy);
  ModelInput in;
  in.phonemes = vocab.encode(seq.symbols, policy == OovPolicy::kLetters);
  in.mouth = read_matrix(video_path);
  if (m.multi_speaker) {
    if (face_path.empty()) throw DataError("this checkpoint is multi-speaker; --face-feature is required");
    const auto backend = make_face_backend(c.face_backend, c.seed);
    in.face = face_feature(read_matrix(face_path), *backend);
  }
  const Inference inf = model.infer(in);
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  write_matrix(dir / "mel.ndf", inf.mel);
  write_matrix(dir / "attention.ndf", inf.attention);
  MelParams mp = MelParams::from_geometry(c.geometry);
  mp.n_mels = m.n_mels;
  WavData wav{c.geometry.sample_rate, griffin_lim(MelSpectrogram{inf.mel, mp}, c.griffin_lim_iters, c.seed)};
  write_wav(dir / "dub.wav", wav);
  echo_config(c, out_dir);
  out << join_symbols(seq.symbols) << "\n" << inf.mel.rows() << " mel frames written to " << out_dir << "\n";
  return kExitOk;
}

int cmd_eval(const ConfigFlags& flags, const std::string& checkpoint, const std::string& manifest,
             const std::string& embedder_name, const std::string& split, const std::string& out_dir,
             bool no_vocoder, std::ostream& out) {
  const RunConfig c = flags.resolve();
  const DubbingModel model = load_model(checkpoint);
  const auto vocab = PhonemeVocabulary::arpabet();
  const auto all = load_samples(load_manifest(manifest), vocab);
  const auto eval_set = split_of(all, split);
  if (eval_set.empty()) throw DataError("manifest has no samples in split '" + split + "'");
  const auto fit = split_of(all, "train");
  const auto embedder = make_sync_embedder(embedder_name, fit.empty() ? all : fit);
  EvalOptions opt;
  opt.seed = c.seed;
  opt.griffin_lim_iters = c.griffin_lim_iters;
  opt.use_vocoder = !no_vocoder;
  const EvalReport report = evaluate(model, eval_set, *embedder, opt);
  write_report(report, out_dir);
  echo_config(c, out_dir);
  out << "mel_l1 " << report.mel_l1 << " r " << report.mean_rate << " lse_d " << report.lse_d << " lse_c "
      << report.lse_c << " failed " << report.failed << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"vdub: video-timed text-to-speech toolkit", "vdub"};
  app.require_subcommand(1);

  std::string lexicon = VDUB_DEFAULT_LEXICON, text, oov = "error";
  auto* g2p = app.add_subcommand("g2p", "Convert text to phonemes");
  g2p->add_option("--lexicon", lexicon, "Lexicon file (word TAB phonemes)");
  g2p->add_option("--text", text, "Input text")->required();
  g2p->add_option("--oov", oov, "Out-of-vocabulary policy: error | letters");

  ConfigFlags flags;
  std::string out_dir;
  auto* synth = app.add_subcommand("synth-data", "Generate a synthetic dataset");
  flags.add_to(synth);
  synth->add_option("--out", out_dir, "Output directory")->required();

  std::vector<std::string> wavs;
  auto* features = app.add_subcommand("features", "Extract mel/pitch/energy from WAV files");
  flags.add_to(features);
  features->add_option("--wav", wavs, "16-bit mono WAV file(s)")->required();
  features->add_option("--out", out_dir, "Output directory")->required();

  std::string manifest, resume;
  std::optional<int> steps;
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  flags.add_to(train_cmd);
  train_cmd->add_option("--manifest", manifest, "Dataset manifest (JSONL)")->required();
  train_cmd->add_option("--out", out_dir, "Run directory")->required();
  train_cmd->add_option("--resume", resume, "Checkpoint directory, or 'latest'");
  train_cmd->add_option("--steps", steps, "Override train.max_steps");

  std::string video, face, checkpoint;
  auto* dub = app.add_subcommand("dub", "Synthesize speech timed to video features");
  flags.add_to(dub);
  dub->add_option("--text", text, "Text to speak")->required();
  dub->add_option("--video-features", video, "T_v x F NDF1 matrix")->required();
  dub->add_option("--face-feature", face, "Face feature or image (multi-speaker models)");
  dub->add_option("--checkpoint", checkpoint, "Checkpoint directory")->required();
  dub->add_option("--out", out_dir, "Output directory")->required();
  dub->add_option("--oov", oov, "Out-of-vocabulary policy: error | letters");

  std::string embedder = "oracle", split = "test";
  bool no_vocoder = false;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  flags.add_to(eval);
  eval->add_option("--checkpoint", checkpoint, "Checkpoint directory")->required();
  eval->add_option("--manifest", manifest, "Dataset manifest (JSONL)")->required();
  eval->add_option("--embedder", embedder, "Sync embedder: oracle");
  eval->add_option("--split", split, "Split to evaluate (or 'all')");
  eval->add_option("--out", out_dir, "Report directory")->required();
  eval->add_flag("--no-vocoder", no_vocoder, "Score generated mel frames without Griffin-Lim");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*g2p) return cmd_g2p(lexicon, text, oov, out);
    if (*synth) return cmd_synth(flags, out_dir, out);
    if (*features) return cmd_features(flags, wavs, out_dir, out);
    if (*train_cmd) return cmd_train(flags, manifest, out_dir, resume, steps, out);
    if (*dub) return cmd_dub(flags, text, video, face, checkpoint, out_dir, oov, out);
    if (*eval) return cmd_eval(flags, checkpoint, manifest, embedder, split, out_dir, no_vocoder, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace vdub
