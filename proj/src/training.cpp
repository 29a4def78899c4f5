// Copyright 2026 The vdub Authors
// SPDX-License-Identifier: Apache-2.0

#include "vdub/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <thread>

#include "vdub/config.hpp"
#include "vdub/error.hpp"
#include "vdub/ndf.hpp"

namespace vdub {

namespace fs = std::filesystem;

LossTerms total_loss(Var mel_pred, const Mat& mel_target, Var pitch_pred, const Vec& pitch_target_hz,
                     Var energy_pred, const Vec& energy_target, Var attention, const Mask& mel_mask,
                     const Mask& video_mask, const Mask& phoneme_mask, const LossWeights& weights,
                     const DiagonalConfig& diagonal) {
  const Eigen::Index t = mel_target.rows();
  if (pitch_pred.rows() != t || energy_pred.rows() != t || pitch_target_hz.size() != t || energy_target.size() != t) {
    throw ShapeError("total_loss: contour lengths differ from the mel length " + std::to_string(t));
  }
  if (static_cast<Eigen::Index>(mel_mask.size()) != t) throw ShapeError("total_loss: mel mask length mismatch");
  if (count_valid(mel_mask) == 0) throw ShapeError("total_loss: empty mel mask");

  Mask voiced = mel_mask;
  Vec log_pitch = Vec::Zero(t);
  for (Eigen::Index i = 0; i < t; ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (pitch_target_hz(i) > 0.0) {
      log_pitch(i) = std::log(pitch_target_hz(i));
    } else {
      voiced[k] = 0;
    }
  }
  const double bandwidth = diagonal.bandwidth_for(count_valid(phoneme_mask));

  LossTerms lt;
  lt.mel = ag::masked_l1(mel_pred, mel_target, mel_mask);
  lt.pitch = ag::masked_mse(pitch_pred, log_pitch, voiced);
  lt.energy = ag::masked_mse(energy_pred, energy_target, mel_mask);
  lt.dc = diagonal_constraint_loss(attention, bandwidth, &video_mask, &phoneme_mask);
  const std::array<Var, 4> terms{lt.mel, lt.pitch, lt.energy, lt.dc};
  const std::array<double, 4> w{weights.mel, weights.pitch, weights.energy, diagonal.weight};
  lt.total = ag::weighted_sum(terms, w);

  LossBreakdown& b = lt.breakdown;
  b.mel_loss = lt.mel.scalar();
  b.pitch_loss = lt.pitch.scalar();
  b.energy_loss = lt.energy.scalar();
  b.dc_loss = lt.dc.scalar();
  b.total = lt.total.scalar();
  b.rate = -b.dc_loss;
  b.weights = w;
  return lt;
}

LossTerms model_loss(const ModelOutput& out, const Mat& mel_target, const VarianceTargets& targets,
                     const LossWeights& weights, const DiagonalConfig& diagonal) {
  return total_loss(out.mel, mel_target, out.variance.pitch_pred, targets.pitch_hz, out.variance.energy_pred,
                    targets.energy, out.attention, out.mel_mask, out.video_mask, out.phoneme_mask, weights,
                    diagonal);
}

double lr_schedule(long step, int d_model, int warmup) {
  if (step < 1) throw ConfigError("lr_schedule: step must be >= 1");
  if (d_model < 1 || warmup < 1) throw ConfigError("lr_schedule: d_model and warmup must be >= 1");
  const double s = static_cast<double>(step);
  return std::pow(d_model, -0.5) * std::min(std::pow(s, -0.5), s * std::pow(warmup, -1.5));
}

ModelInput Batch::input(std::size_t i, bool with_targets) const {
  ModelInput in;
  in.phonemes = phonemes[i];
  in.phoneme_mask = phoneme_masks[i];
  in.mouth = mouth[i];
  in.video_mask = video_masks[i];
  in.face = faces[i];
  if (with_targets) in.targets = targets(i);
  return in;
}

VarianceTargets Batch::targets(std::size_t i) const { return {pitch[i], energy[i]}; }

Batch collate_batch(std::span<const Sample* const> samples, bool with_faces) {
  if (samples.empty()) throw DataError("collate_batch: empty batch");
  const FrameGeometry geometry = samples[0]->geometry;
  std::size_t max_p = 0, max_v = 0;
  Eigen::Index feat = samples[0]->mouth.cols(), mels = samples[0]->mel.cols();
  for (const Sample* s : samples) {
    if (!(s->geometry == geometry)) throw GeometryError("collate_batch: sample '" + s->id + "' has a different frame geometry");
    if (s->mouth.cols() != feat || s->mel.cols() != mels) {
      throw ShapeError("collate_batch: sample '" + s->id + "' has different feature widths");
    }
    max_p = std::max(max_p, s->phoneme_ids.size());
    max_v = std::max(max_v, s->video_frames());
  }
  const int n = geometry.upsample_factor();
  const std::size_t max_m = max_v * static_cast<std::size_t>(n);
  Batch b;
  b.upsample = n;
  for (const Sample* s : samples) {
    if (s->mel_frames() != s->video_frames() * static_cast<std::size_t>(n)) {
      throw DataError("collate_batch: sample '" + s->id + "' breaks the mel/video frame ratio");
    }
    b.ids.push_back(s->id);
    std::vector<int> ids = s->phoneme_ids;
    Mask pm(max_p, 0);
    std::fill_n(pm.begin(), ids.size(), 1);
    ids.resize(max_p, PhonemeVocabulary::kPad);
    b.phonemes.push_back(std::move(ids));
    b.phoneme_masks.push_back(std::move(pm));

    const auto tv = static_cast<Eigen::Index>(s->video_frames());
    Mat mouth = Mat::Zero(static_cast<Eigen::Index>(max_v), feat);
    mouth.topRows(tv) = s->mouth;
    Mask vm(max_v, 0);
    std::fill_n(vm.begin(), tv, 1);
    b.mouth.push_back(std::move(mouth));
    b.video_masks.push_back(std::move(vm));

    const auto tm = static_cast<Eigen::Index>(s->mel_frames());
    Mat mel = Mat::Zero(static_cast<Eigen::Index>(max_m), mels);
    mel.topRows(tm) = s->mel;
    Vec pitch = Vec::Zero(static_cast<Eigen::Index>(max_m));
    pitch.head(tm) = s->pitch;
    Vec energy = Vec::Zero(static_cast<Eigen::Index>(max_m));
    energy.head(tm) = s->energy;
    Mask mm(max_m, 0);
    std::fill_n(mm.begin(), tm, 1);
    b.mel.push_back(std::move(mel));
    b.pitch.push_back(std::move(pitch));
    b.energy.push_back(std::move(energy));
    b.mel_masks.push_back(std::move(mm));
    if (with_faces) {
      b.faces.emplace_back(s->face_feature);
    } else {
      b.faces.emplace_back(std::nullopt);
    }
  }
  return b;
}

LossBreakdown batch_loss(const DubbingModel& model, const Batch& batch, const LossWeights& weights,
                         const DiagonalConfig& diagonal) {
  LossBreakdown mean;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Tape tape;
    Context ctx{tape, model.params(), false, nullptr};
    ModelOutput out = model.forward(ctx, batch.input(i, true));
    LossBreakdown b = model_loss(out, batch.mel[i], batch.targets(i), weights, diagonal).breakdown;
    mean.mel_loss += b.mel_loss;
    mean.pitch_loss += b.pitch_loss;
    mean.energy_loss += b.energy_loss;
    mean.dc_loss += b.dc_loss;
    mean.total += b.total;
    mean.rate += b.rate;
    mean.weights = b.weights;
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  mean.mel_loss *= inv;
  mean.pitch_loss *= inv;
  mean.energy_loss *= inv;
  mean.dc_loss *= inv;
  mean.total *= inv;
  mean.rate *= inv;
  return mean;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (max_steps < 1) throw ConfigError("train: max_steps must be >= 1");
  if (warmup_steps < 1) throw ConfigError("train: warmup_steps must be >= 1");
  if (checkpoint_every < 1) throw ConfigError("train: checkpoint_every must be >= 1");
  if (log_every < 1) throw ConfigError("train: log_every must be >= 1");
  if (threads < 1) throw ConfigError("train: threads must be >= 1");
  if (!(lr_scale > 0.0)) throw ConfigError("train: lr_scale must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("train: Adam betas must be in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("train: epsilon must be > 0");
  if (!(grad_clip >= 0.0)) throw ConfigError("train: grad_clip must be >= 0");
  if (!(weights.mel >= 0.0 && weights.pitch >= 0.0 && weights.energy >= 0.0)) {
    throw ConfigError("train: loss weights must be >= 0");
  }
  diagonal.validate();
}

Adam::Adam(const ParamStore& store, double beta1, double beta2, double epsilon)
    : beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
  for (std::size_t i = 0; i < store.size(); ++i) {
    m_.push_back(Mat::Zero(store.value(i).rows(), store.value(i).cols()));
    v_.push_back(Mat::Zero(store.value(i).rows(), store.value(i).cols()));
  }
}

void Adam::update(ParamStore& store, const Gradients& grads, double lr) {
  ++step_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
  for (std::size_t i = 0; i < store.size(); ++i) {
    if (grads[i].size() == 0) continue;
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i].cwiseProduct(grads[i]);
    store.mutable_value(i).array() -=
        lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + epsilon_);
  }
}

void fit_variance_ranges(ModelConfig& cfg, std::span<const Sample> data) {
  double pmin = INFINITY, pmax = -INFINITY, emin = INFINITY, emax = -INFINITY;
  for (const Sample& s : data) {
    for (Eigen::Index i = 0; i < s.pitch.size(); ++i) {
      if (s.pitch(i) > 0.0) {
        pmin = std::min(pmin, std::log(s.pitch(i)));
        pmax = std::max(pmax, std::log(s.pitch(i)));
      }
    }
    if (s.energy.size() > 0) {
      emin = std::min(emin, s.energy.minCoeff());
      emax = std::max(emax, s.energy.maxCoeff());
    }
  }
  if (pmax > pmin) {
    cfg.log_pitch_min = pmin;
    cfg.log_pitch_max = pmax;
  }
  if (emax > emin) {
    cfg.energy_min = emin;
    cfg.energy_max = emax;
  }
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over a combined word.
  std::uint64_t z = a * 0x9E3779B97F4A7C15ULL + b + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Trainer::Trainer(DubbingModel& model, const TrainConfig& cfg, std::vector<Sample> data)
    : model_(model), cfg_(cfg), data_(std::move(data)) {
  cfg_.validate();
  if (data_.empty()) throw DataError("train: dataset is empty");
  adam_ = Adam(model_.params(), cfg_.beta1, cfg_.beta2, cfg_.epsilon);
}

std::vector<std::size_t> Trainer::batch_indices(long step) const {
  const std::size_t n = data_.size();
  const std::size_t b = std::min<std::size_t>(static_cast<std::size_t>(cfg_.batch_size), n);
  const std::size_t per_epoch = n / b;
  const auto k = static_cast<std::size_t>(step - 1);
  const std::size_t epoch = k / per_epoch, pos = k % per_epoch;
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(mix_seed(cfg_.seed, 0xE90C + epoch));
  std::shuffle(perm.begin(), perm.end(), rng);
  return {perm.begin() + static_cast<std::ptrdiff_t>(pos * b), perm.begin() + static_cast<std::ptrdiff_t>((pos + 1) * b)};
}

StepRecord Trainer::step() {
  const long step = adam_.step() + 1;
  const auto idx = batch_indices(step);
  std::vector<const Sample*> ptrs;
  for (std::size_t i : idx) ptrs.push_back(&data_[i]);
  const Batch batch = collate_batch(ptrs, model_.config().multi_speaker);
  const std::size_t count = batch.size();

  std::vector<Gradients> grads(count);
  std::vector<LossBreakdown> losses(count);
  auto run_sample = [&](std::size_t i) {
    std::mt19937_64 rng(mix_seed(mix_seed(cfg_.seed, static_cast<std::uint64_t>(step)), i));
    Tape tape;
    Context ctx{tape, model_.params(), true, &rng};
    ModelOutput out = model_.forward(ctx, batch.input(i, true));
    LossTerms lt = model_loss(out, batch.mel[i], batch.targets(i), cfg_.weights, cfg_.diagonal);
    losses[i] = lt.breakdown;
    if (!std::isfinite(lt.breakdown.total)) return;
    tape.backward(lt.total);
    grads[i] = zero_gradients(model_.params());
    tape.collect(grads[i]);
  };
  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(cfg_.threads), count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) run_sample(i);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < count; i += threads) run_sample(i);
      });
    }
    for (auto& t : pool) t.join();
  }

  StepRecord rec;
  rec.step = step;
  Gradients total = zero_gradients(model_.params());
  const double inv = 1.0 / static_cast<double>(count);
  for (std::size_t i = 0; i < count; ++i) {
    const LossBreakdown& b = losses[i];
    if (!std::isfinite(b.total)) {
      throw NumericError("non-finite loss at step " + std::to_string(step) + " (sample '" + batch.ids[i] + "')");
    }
    add_into(total, grads[i], inv);
    rec.loss.mel_loss += b.mel_loss * inv;
    rec.loss.pitch_loss += b.pitch_loss * inv;
    rec.loss.energy_loss += b.energy_loss * inv;
    rec.loss.dc_loss += b.dc_loss * inv;
    rec.loss.total += b.total * inv;
    rec.loss.rate += b.rate * inv;
    rec.loss.weights = b.weights;
  }
  double sq = 0.0;
  for (const Mat& g : total) sq += g.squaredNorm();
  rec.grad_norm = std::sqrt(sq);
  if (!std::isfinite(rec.grad_norm)) throw NumericError("non-finite gradient at step " + std::to_string(step));
  if (cfg_.grad_clip > 0.0 && rec.grad_norm > cfg_.grad_clip) {
    const double s = cfg_.grad_clip / rec.grad_norm;
    for (Mat& g : total) g *= s;
  }
  rec.lr = cfg_.lr_scale * lr_schedule(step, model_.config().d, cfg_.warmup_steps);
  adam_.update(model_.params(), total, rec.lr);
  return rec;
}

namespace {

std::string param_file(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04zu.ndf", i);
  return buf;
}

void load_params_into(ParamStore& store, const Json& manifest, const fs::path& dir) {
  const Json& params = manifest.at("params");
  if (params.size() != store.size()) {
    throw SchemaError("checkpoint has " + std::to_string(params.size()) + " parameters, model expects " +
                      std::to_string(store.size()));
  }
  for (std::size_t i = 0; i < store.size(); ++i) {
    const std::string name = params[i].at("name").get<std::string>();
    if (name != store.name(i)) throw SchemaError("checkpoint parameter " + std::to_string(i) + " is '" + name + "', expected '" + store.name(i) + "'");
    Mat v = read_matrix(dir / "params" / param_file(i));
    if (v.rows() != store.value(i).rows() || v.cols() != store.value(i).cols()) {
      throw SchemaError("checkpoint parameter '" + name + "' has the wrong shape");
    }
    store.mutable_value(i) = std::move(v);
  }
}

Json read_checkpoint_manifest(const fs::path& dir) {
  const fs::path p = dir / "checkpoint.json";
  if (!fs::exists(p)) throw SchemaError("not a checkpoint directory: " + dir.string());
  Json j = read_json_file(p);
  if (j.value("format", "") != "vdub-checkpoint" || j.value("version", 0) != 1) {
    throw SchemaError("unsupported checkpoint format in " + p.string());
  }
  return j;
}

}  // namespace

void Trainer::save_checkpoint(const fs::path& dir) const {
  const fs::path tmp = dir.string() + ".tmp";
  fs::remove_all(tmp);
  fs::create_directories(tmp / "params");
  fs::create_directories(tmp / "adam_m");
  fs::create_directories(tmp / "adam_v");
  const ParamStore& store = model_.params();
  Json manifest;
  manifest["format"] = "vdub-checkpoint";
  manifest["version"] = 1;
  manifest["step"] = adam_.step();
  manifest["model"] = to_json(model_.config());
  manifest["train"] = to_json(cfg_);
  Json params = Json::array();
  for (std::size_t i = 0; i < store.size(); ++i) {
    write_matrix(tmp / "params" / param_file(i), store.value(i), NdfType::kF64);
    write_matrix(tmp / "adam_m" / param_file(i), adam_.first_moment()[i], NdfType::kF64);
    write_matrix(tmp / "adam_v" / param_file(i), adam_.second_moment()[i], NdfType::kF64);
    params.push_back({{"name", store.name(i)},
                      {"shape", {store.value(i).rows(), store.value(i).cols()}}});
  }
  manifest["params"] = params;
  write_json_file(manifest, tmp / "checkpoint.json");
  fs::remove_all(dir);
  fs::rename(tmp, dir);
}

void Trainer::load_checkpoint(const fs::path& dir) {
  const Json manifest = read_checkpoint_manifest(dir);
  load_params_into(model_.params(), manifest, dir);
  for (std::size_t i = 0; i < model_.params().size(); ++i) {
    adam_.first_moment()[i] = read_matrix(dir / "adam_m" / param_file(i));
    adam_.second_moment()[i] = read_matrix(dir / "adam_v" / param_file(i));
  }
  adam_.set_step(manifest.at("step").get<long>());
}

std::string checkpoint_name(long step) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "step_%06ld", step);
  return buf;
}

fs::path latest_checkpoint(const fs::path& out_dir) {
  const fs::path root = out_dir / "checkpoints";
  fs::path best;
  if (!fs::exists(root)) return best;
  for (const auto& e : fs::directory_iterator(root)) {
    const std::string name = e.path().filename().string();
    if (!e.is_directory() || name.rfind("step_", 0) != 0 || name.find(".tmp") != std::string::npos) continue;
    if (best.empty() || name > best.filename().string()) best = e.path();
  }
  return best;
}

DubbingModel load_model(const fs::path& dir) {
  const Json manifest = read_checkpoint_manifest(dir);
  ModelConfig cfg;
  from_json(manifest.at("model"), cfg);
  DubbingModel model(cfg, 0);
  load_params_into(model.params(), manifest, dir);
  return model;
}

namespace {

Json record_json(const StepRecord& r) {
  Json j;
  j["step"] = r.step;
  j["lr"] = r.lr;
  j["mel_loss"] = r.loss.mel_loss;
  j["pitch_loss"] = r.loss.pitch_loss;
  j["energy_loss"] = r.loss.energy_loss;
  j["dc_loss"] = r.loss.dc_loss;
  j["total"] = r.loss.total;
  j["r"] = r.loss.rate;
  j["grad_norm"] = r.grad_norm;
  j["weights"] = r.loss.weights;
  return j;
}

}  // namespace

TrainResult train(DubbingModel& model, const TrainConfig& cfg, std::vector<Sample> data, const fs::path& out_dir,
                  const std::optional<fs::path>& resume_from, const std::function<void(const StepRecord&)>& on_step) {
  Trainer trainer(model, cfg, std::move(data));
  TrainResult result;
  fs::create_directories(out_dir / "checkpoints");
  if (resume_from) {
    trainer.load_checkpoint(*resume_from);
    result.last_checkpoint = *resume_from;
  }
  const fs::path metrics_path = out_dir / "metrics.jsonl";
  if (resume_from) {
    // Drop log lines past the resumed step so the log stays a single history.
    std::vector<std::string> keep;
    std::ifstream in(metrics_path);
    for (std::string line; std::getline(in, line);) {
      if (line.empty()) continue;
      if (Json::parse(line).at("step").get<long>() <= trainer.completed_steps()) keep.push_back(line);
    }
    in.close();
    std::ofstream out(metrics_path, std::ios::trunc);
    for (const auto& l : keep) out << l << "\n";
  } else {
    std::ofstream(metrics_path, std::ios::trunc);
  }
  std::ofstream log(metrics_path, std::ios::app);
  while (trainer.completed_steps() < cfg.max_steps) {
    StepRecord rec;
    try {
      rec = trainer.step();
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + "; last good checkpoint: " +
                         (result.last_checkpoint.empty() ? std::string("none") : result.last_checkpoint.string()));
    }
    result.records.push_back(rec);
    if (rec.step % cfg.log_every == 0) log << record_json(rec).dump() << "\n" << std::flush;
    if (on_step) on_step(rec);
    if (rec.step % cfg.checkpoint_every == 0 || rec.step == cfg.max_steps) {
      result.last_checkpoint = out_dir / "checkpoints" / checkpoint_name(rec.step);
      trainer.save_checkpoint(result.last_checkpoint);
    }
  }
  return result;
}

}  // namespace vdub
