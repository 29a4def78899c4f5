// Copyright 2026 The vdub Authors
// SPDX-License-Identifier: Apache-2.0

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "vdub/aligner.hpp"
#include "vdub/audio.hpp"
#include "vdub/evaluation.hpp"
#include "vdub/gradcheck.hpp"
#include "vdub/model.hpp"
#include "vdub/synthetic.hpp"
#include "vdub/text.hpp"
#include "vdub/training.hpp"

namespace fs = std::filesystem;
using namespace vdub;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Options {
  int align_steps = 800;
  int ise_steps = 500;
  std::uint64_t seed = 1;
  bool verbose = false;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// --- 1 ---------------------------------------------------------------------

Outcome length_law(const Options& opt) {
  // 640 samples per video frame at 16 kHz / 25 fps; hop sizes dividing it.
  const std::vector<int> hops{640, 320, 160, 128, 80, 64};
  std::map<int, DubbingModel> models;
  std::mt19937_64 rng(opt.seed);
  std::uniform_int_distribution<int> pick_hop(0, static_cast<int>(hops.size()) - 1), tv(1, 80), tp(1, 30);
  int ok = 0, total = 0;
  for (int i = 0; i < 1000; ++i) {
    FrameGeometry g;
    g.hop_size = hops[pick_hop(rng)];
    g.win_size = 4 * g.hop_size;
    const int n = g.upsample_factor();
    auto it = models.find(n);
    if (it == models.end()) {
      ModelConfig cfg = ModelConfig::desk();
      cfg.d = 16;
      cfg.conv_filter = 32;
      cfg.predictor_filter = 16;
      cfg.n_mels = 20;
      cfg.upsample = n;
      it = models.emplace(n, DubbingModel(cfg, opt.seed + n)).first;
    }
    ModelInput in;
    const int frames = tv(rng);
    for (int p = 0, count = tp(rng); p < count; ++p) in.phonemes.push_back(3 + p % 39);
    in.mouth = Mat::Random(frames, it->second.config().video_feature_dim);
    const Inference out = it->second.infer(in);
    ++total;
    if (out.mel.rows() == static_cast<Eigen::Index>(n) * frames && out.pitch_hz.size() == out.mel.rows()) ++ok;
  }
  return {ok == total, fmt("%d/%d configurations emit exactly n*T_v mel frames (n in {1,2,4,5,8,10})", ok, total)};
}

// --- 2 ---------------------------------------------------------------------

double brute_force_rate(const Mat& a, double b) {
  const double k = static_cast<double>(a.cols()) / static_cast<double>(a.rows());
  double sum = 0.0;
  for (long s = 1; s <= a.rows(); ++s) {
    const double c = std::round(k * static_cast<double>(s));
    for (long t = 1; t <= a.cols(); ++t) {
      if (t >= std::max(c - b, 1.0) && t <= std::min(c + b, static_cast<double>(a.cols()))) sum += a(s - 1, t - 1);
    }
  }
  return sum / static_cast<double>(a.rows());
}

Outcome diagonal_oracle(const Options& opt) {
  std::mt19937_64 rng(opt.seed + 2);
  std::uniform_int_distribution<int> rows(1, 50), cols(1, 80), band(0, 8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    Mat a(rows(rng), cols(rng));
    for (Eigen::Index j = 0; j < a.size(); ++j) a.data()[j] = u(rng);
    for (Eigen::Index r = 0; r < a.rows(); ++r) a.row(r) /= a.row(r).sum();
    const double b = band(rng);
    worst = std::max(worst, std::abs(diagonal_rate(a, b) - brute_force_rate(a, b)));
  }
  Mat anti = Mat::Zero(4, 4);
  for (int i = 0; i < 4; ++i) anti(i, 3 - i) = 1.0;
  const double r_id = diagonal_rate(Mat::Identity(4, 4), 1.0);
  const double r_uni = diagonal_rate(Mat::Constant(4, 4, 0.25), 1.0);
  const double r_anti = diagonal_rate(anti, 0.0);
  const bool hand = std::abs(r_id - 1.0) < 1e-6 && std::abs(r_uni - 0.625) < 1e-6 && std::abs(r_anti) < 1e-6;
  return {worst < 1e-6 && hand,
          fmt("max |vectorized - brute force| = %.2e over 200 matrices; identity %.4f, uniform %.4f, anti-diagonal %.4f",
              worst, r_id, r_uni, r_anti)};
}

// --- 3 ---------------------------------------------------------------------

Outcome gradient_checks(const Options& opt) {
  std::string detail;
  bool pass = true;
  for (const std::string name : {"aligner-dc", "ise", "variance-adaptor"}) {
    double worst = 0.0;
    std::size_t checked = 0;
    for (std::uint64_t s = 0; s < 3; ++s) {
      const auto r = gradient_check(name, opt.seed + s);
      worst = std::max(worst, r.max_rel_error);
      checked += r.checked;
    }
    pass = pass && worst < 1e-3 && checked > 0;
    detail += fmt("%s%s %.2e (%zu coords)", detail.empty() ? "" : "; ", name.c_str(), worst, checked);
  }
  return {pass, "max relative error " + detail};
}

// --- 4 / 5 shared ------------------------------------------------------------

struct Split {
  std::vector<Sample> train, test;
};

Split split(std::vector<Sample> all) {
  Split s;
  for (auto& x : all) (x.split == "test" ? s.test : s.train).push_back(std::move(x));
  return s;
}

ModelConfig model_for(const std::vector<Sample>& train, bool multi_speaker) {
  ModelConfig cfg = ModelConfig::desk();
  cfg.vocab_size = static_cast<int>(PhonemeVocabulary::arpabet().size());
  cfg.video_feature_dim = static_cast<int>(train.front().mouth.cols());
  cfg.n_mels = static_cast<int>(train.front().mel.cols());
  cfg.upsample = train.front().geometry.upsample_factor();
  cfg.multi_speaker = multi_speaker;
  fit_variance_ranges(cfg, train);
  return cfg;
}

ModelInput input_of(const Sample& s, bool face) {
  ModelInput in;
  in.phonemes = s.phoneme_ids;
  in.mouth = s.mouth;
  if (face) in.face = s.face_feature;
  return in;
}

struct HeldOut {
  double mel_l1 = 0.0;
  double rate = 0.0;
  double uniform = 0.0;
};

HeldOut held_out(const DubbingModel& model, const std::vector<Sample>& test) {
  HeldOut h;
  for (const Sample& s : test) {
    const Inference inf = model.infer(input_of(s, model.config().multi_speaker));
    h.mel_l1 += (inf.mel - s.mel).cwiseAbs().mean();
    const double b = std::max(1.0, std::round(0.2 * static_cast<double>(s.phoneme_ids.size())));
    h.rate += diagonal_rate(inf.attention, b);
    h.uniform += uniform_diagonal_rate(s.video_frames(), s.phoneme_ids.size(), b);
  }
  const double n = static_cast<double>(test.size());
  return {h.mel_l1 / n, h.rate / n, h.uniform / n};
}

void run_steps(DubbingModel& model, const TrainConfig& cfg, const std::vector<Sample>& data, const Options& opt,
               const char* tag) {
  Trainer trainer(model, cfg, data);
  for (int i = 0; i < cfg.max_steps; ++i) {
    const StepRecord r = trainer.step();
    if (opt.verbose && r.step % 100 == 0) {
      std::cerr << "  [" << tag << "] step " << r.step << " mel " << r.loss.mel_loss << " r " << r.loss.rate << "\n";
    }
  }
}

// --- 4 ---------------------------------------------------------------------

Outcome alignment_learning(const Options& opt) {
  SyntheticConfig sc;  // vocab 20, 220 samples, 10% held out
  sc.seed = opt.seed + 7;
  const Split data = split(synthesize_samples(sc, PhonemeVocabulary::arpabet()));
  const ModelConfig cfg = model_for(data.train, false);

  TrainConfig tc;
  tc.max_steps = opt.align_steps;
  tc.seed = opt.seed;
  DubbingModel with_dc(cfg, opt.seed);
  const HeldOut untrained = held_out(with_dc, data.test);
  run_steps(with_dc, tc, data.train, opt, "lambda_DC=0.1");
  const HeldOut trained = held_out(with_dc, data.test);

  TrainConfig ablation = tc;
  ablation.diagonal.weight = 0.0;
  DubbingModel without_dc(cfg, opt.seed);
  run_steps(without_dc, ablation, data.train, opt, "lambda_DC=0");
  const HeldOut ablated = held_out(without_dc, data.test);

  const bool l1_ok = trained.mel_l1 < 0.5 * untrained.mel_l1;
  const bool rate_ok = trained.rate - trained.uniform >= 0.15;
  const bool ablation_ok = ablated.rate < trained.rate;
  return {l1_ok && rate_ok && ablation_ok,
          fmt("%d steps, %zu held-out samples: mel L1 %.4f vs untrained %.4f (ratio %.3f); r %.4f vs uniform %.4f "
              "(+%.3f); lambda_DC=0 r %.4f (mel L1 %.4f)",
              tc.max_steps, data.test.size(), trained.mel_l1, untrained.mel_l1, trained.mel_l1 / untrained.mel_l1,
              trained.rate, trained.uniform, trained.rate - trained.uniform, ablated.rate, ablated.mel_l1)};
}

// --- 5 ---------------------------------------------------------------------

Outcome ise_conditioning(const Options& opt) {
  SyntheticConfig sc;
  sc.num_speakers = 2;
  sc.seed = opt.seed + 11;
  const auto vocab = PhonemeVocabulary::arpabet();
  const Split data = split(synthesize_samples(sc, vocab));
  const SyntheticWorld world = make_synthetic_world(sc, vocab);

  TrainConfig tc;
  tc.max_steps = opt.ise_steps;
  tc.seed = opt.seed;
  DubbingModel with_ise(model_for(data.train, true), opt.seed);
  run_steps(with_ise, tc, data.train, opt, "ISE on");
  DubbingModel without_ise(model_for(data.train, false), opt.seed);
  run_steps(without_ise, tc, data.train, opt, "ISE off");
  const double l1_on = held_out(with_ise, data.test).mel_l1;
  const double l1_off = held_out(without_ise, data.test).mel_l1;

  // Output change when the face is swapped to the other speaker's cluster
  // versus redrawn inside its own cluster.
  std::mt19937_64 rng(opt.seed + 13);
  double swap = 0.0, within = 0.0;
  for (const Sample& s : data.test) {
    ModelInput in = input_of(s, true);
    const Mat base = with_ise.infer(in).mel;
    in.face = world.speaker_faces.row(1 - s.speaker).transpose();
    swap += (with_ise.infer(in).mel - base).cwiseAbs().mean();
    in.face = perturbed_face(world, s.speaker, sc.face_noise, rng);
    within += (with_ise.infer(in).mel - base).cwiseAbs().mean();
  }
  swap /= static_cast<double>(data.test.size());
  within /= static_cast<double>(data.test.size());
  return {l1_on < l1_off && swap > within,
          fmt("%d steps: held-out mel L1 ISE on %.4f vs off %.4f; face swap changes mel by %.4f vs within-cluster %.4f",
              tc.max_steps, l1_on, l1_off, swap, within)};
}

// --- 6 ---------------------------------------------------------------------

Outcome offset_recovery(const Options& opt) {
  std::mt19937_64 rng(opt.seed + 17);
  std::normal_distribution<double> nd;
  const int t = 100, m = 15, n = 4, dim = 16;
  Mat base(t + 2 * m, dim);
  for (Eigen::Index i = 0; i < base.size(); ++i) base.data()[i] = nd(rng);
  const Mat video = base.middleRows(m, t);
  const OracleEmbedder oracle;  // identity video map, mean-of-n audio map
  int hits = 0;
  for (int j = -m; j <= m; ++j) {
    // Audio running j frames behind the video: audio[s + j] == video[s].
    const Mat shifted = base.middleRows(m - j, t);
    Mat mel(t * n, dim);
    for (int r = 0; r < t * n; ++r) mel.row(r) = shifted.row(r / n);
    const SyncPair pair = sync_embed(mel, video, n, oracle);
    if (lse_metrics(pair.audio, pair.video, m, 5).best_offset == j) ++hits;
  }
  Mat a(t, dim), v(t, dim);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    a.data()[i] = nd(rng);
    v.data()[i] = nd(rng);
  }
  a.rowwise().normalize();
  v.rowwise().normalize();
  const LseResult flat = lse_metrics(a, v, m, 5);
  const double median = flat.lse_d + flat.lse_c;
  return {hits == 2 * m + 1 && flat.lse_c < 0.1 * median,
          fmt("argmin offset recovered %d/%d; random streams lse_c %.4f vs 0.1 x median %.4f", hits, 2 * m + 1,
              flat.lse_c, 0.1 * median)};
}

// --- 7 ---------------------------------------------------------------------

std::vector<double> chirp(double f0, double f1, int samples, int rate = 16000) {
  std::vector<double> x(samples);
  const double dur = static_cast<double>(samples) / rate;
  for (int i = 0; i < samples; ++i) {
    const double t = static_cast<double>(i) / rate;
    x[i] = 0.5 * std::sin(2.0 * M_PI * (f0 * t + 0.5 * (f1 - f0) * t * t / dur));
  }
  return x;
}

Outcome signal_consistency(const Options& opt) {
  const FrameGeometry g;
  const MelParams mp = MelParams::from_geometry(g);
  std::mt19937_64 rng(opt.seed + 19);
  std::uniform_int_distribution<int> len(200, 48000);
  std::uniform_real_distribution<double> hz(60.0, 1000.0);
  std::normal_distribution<double> noise(0.0, 0.05);
  int agree = 0;
  for (int i = 0; i < 100; ++i) {
    const int samples = len(rng);
    const double f = hz(rng);
    std::vector<double> x(samples);
    for (int k = 0; k < samples; ++k) x[k] = 0.4 * std::sin(2.0 * M_PI * f * k / g.sample_rate) + noise(rng);
    const auto mel = mel_spectrogram(x, mp);
    const auto rows = mel.frames.rows();
    if (extract_pitch(x, g).size() == rows && extract_energy(x, g).size() == rows) ++agree;
  }

  const auto x = chirp(150.0, 1500.0, 16000);
  const auto mel = mel_spectrogram(x, mp);
  const auto again = mel_spectrogram(griffin_lim(mel, 60, opt.seed), mp);
  const Eigen::Index rows = std::min(mel.frames.rows(), again.frames.rows());
  const double gap = (again.frames.topRows(rows) - mel.frames.topRows(rows)).cwiseAbs().sum() /
                     mel.frames.topRows(rows).cwiseAbs().sum();

  std::vector<double> sine(16000);
  for (int k = 0; k < 16000; ++k) sine[k] = 0.5 * std::sin(2.0 * M_PI * 220.0 * k / g.sample_rate);
  const Vec f0 = extract_pitch(sine, g);
  std::vector<double> voiced;
  for (Eigen::Index k = 0; k < f0.size(); ++k)
    if (f0(k) > 0.0) voiced.push_back(f0(k));
  double err = 1e9;
  if (!voiced.empty()) {
    std::nth_element(voiced.begin(), voiced.begin() + voiced.size() / 2, voiced.end());
    err = std::abs(voiced[voiced.size() / 2] - 220.0);
  }
  return {agree == 100 && gap < 0.2 && err <= 5.0,
          fmt("frame counts agree %d/100; chirp Griffin-Lim relative L1 gap %.4f; 220 Hz median pitch error %.3f Hz",
              agree, gap, err)};
}

// --- 8 ---------------------------------------------------------------------

Outcome determinism_and_resume(const Options& opt) {
  SyntheticConfig sc;
  sc.num_samples = 64;
  sc.held_out_fraction = 0.0;
  sc.seed = opt.seed + 23;
  const auto data = synthesize_samples(sc, PhonemeVocabulary::arpabet());
  const ModelConfig cfg = model_for(data, false);
  TrainConfig tc;
  tc.max_steps = 60;
  tc.checkpoint_every = 50;
  tc.seed = opt.seed;

  const fs::path root = fs::temp_directory_path() / ("vdub_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  DubbingModel a(cfg, opt.seed), b(cfg, opt.seed);
  const auto run_a = train(a, tc, data, root / "a");
  const auto run_b = train(b, tc, data, root / "b");
  double replay = 0.0;
  for (std::size_t i = 0; i < run_a.records.size(); ++i)
    replay = std::max(replay, std::abs(run_a.records[i].loss.total - run_b.records[i].loss.total));
  bool same_params = true;
  for (std::size_t i = 0; i < a.params().size(); ++i) same_params = same_params && a.params().value(i) == b.params().value(i);

  TrainConfig first = tc;
  first.max_steps = 50;
  DubbingModel c(cfg, opt.seed);
  train(c, first, data, root / "c");
  DubbingModel resumed(cfg, opt.seed + 1000);  // different init; the checkpoint must overwrite it
  const auto run_c = train(resumed, tc, data, root / "c", root / "c" / "checkpoints" / checkpoint_name(50));
  double gap = 0.0;
  bool steps_ok = run_c.records.size() == 10;
  for (std::size_t i = 0; steps_ok && i < 10; ++i) {
    steps_ok = run_c.records[i].step == static_cast<long>(51 + i);
    gap = std::max(gap, std::abs(run_c.records[i].loss.total - run_a.records[50 + i].loss.total));
  }
  fs::remove_all(root);
  return {replay == 0.0 && same_params && steps_ok && gap <= 1e-6,
          fmt("two fixed-seed runs: max loss difference %.1e, parameters %s; resume at 50: steps 51-60 %s, max loss "
              "difference %.1e",
              replay, same_params ? "identical" : "DIFFER", steps_ok ? "replayed" : "MISSING", gap)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vdub acceptance checks"};
  Options opt;
  std::vector<int> only;
  app.add_option("--only", only, "Run only these criteria (1-8)")->check(CLI::Range(1, 8));
  app.add_option("--align-steps", opt.align_steps, "Training steps for criterion 4")->check(CLI::Range(1, 2000));
  app.add_option("--ise-steps", opt.ise_steps, "Training steps for criterion 5")->check(CLI::Range(1, 2000));
  app.add_option("--seed", opt.seed, "Base seed");
  app.add_flag("-v,--verbose", opt.verbose, "Log training progress to stderr");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome(const Options&)>>> criteria{
      {"length law", length_law},
      {"diagonal-rate oracle", diagonal_oracle},
      {"gradient checks", gradient_checks},
      {"desk-scale alignment learning", alignment_learning},
      {"ISE conditioning", ise_conditioning},
      {"sync-metric offset recovery", offset_recovery},
      {"signal-processing self-consistency", signal_consistency},
      {"determinism and resume", determinism_and_resume},
  };
  const std::set<int> selected(only.begin(), only.end());
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second(opt);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << id << " (" << criteria[i].first << "): " << o.detail
              << " [" << fmt("%.1f", secs) << " s]" << std::endl;
  }
  std::cout << (failed == 0 ? "all selected criteria passed" : std::to_string(failed) + " criterion(s) failed")
            << std::endl;
  return failed == 0 ? 0 : 1;
}
