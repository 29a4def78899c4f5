// Copyright 2026 The vdub Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "test_util.hpp"
#include "vdub/audio.hpp"
#include "vdub/cli.hpp"
#include "vdub/dataset.hpp"
#include "vdub/ndf.hpp"

namespace vdub {
namespace {

namespace fs = std::filesystem;
using testing::random_mat;
using testing::TempDir;

struct CliRun {
  int code;
  std::string out, err;
};

CliRun cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    files[fs::relative(e.path(), root).string()] = {std::istreambuf_iterator<char>(in), {}};
  }
  return files;
}

const std::vector<std::string> kSmallSynth{"--set", "synth.num_samples=12"};

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

TEST(Cli, SynthDataIsDeterministicAndValid) {
  TempDir dir("cli_synth");
  const auto a = cli(concat({"synth-data", "--seed", "7", "--out", (dir / "a").string()}, kSmallSynth));
  const auto b = cli(concat({"synth-data", "--seed", "7", "--out", (dir / "b").string()}, kSmallSynth));
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(read_tree(dir / "a"), read_tree(dir / "b"));
  const DatasetIndex index = load_manifest(dir / "a" / "manifest.jsonl");
  EXPECT_EQ(index.samples.size(), 12u);
  EXPECT_TRUE(fs::exists(dir / "a" / "config.json"));
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(cli({"synth-data"}).code, kExitUsage);
  EXPECT_EQ(cli({"no-such-command"}).code, kExitUsage);
  EXPECT_EQ(cli({}).code, kExitUsage);
  TempDir dir("cli_usage");
  EXPECT_EQ(cli({"synth-data", "--out", dir.path().string(), "--set", "synth.bogus=1"}).code, kExitUsage);
  EXPECT_EQ(cli({"--help"}).code, kExitOk);
}

TEST(Cli, G2p) {
  const auto r = cli({"g2p", "--text", "the cat"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_FALSE(r.out.empty());
  EXPECT_EQ(cli({"g2p", "--text", "qzxv"}).code, kExitData);
  EXPECT_EQ(cli({"g2p", "--text", "qzxv", "--oov", "letters"}).code, kExitOk);
}

void write_tone(const fs::path& path, int rate, double seconds) {
  WavData w{rate, {}};
  const int n = static_cast<int>(rate * seconds);
  for (int i = 0; i < n; ++i) w.samples.push_back(0.3 * std::sin(2.0 * M_PI * 220.0 * i / rate));
  write_wav(path, w);
}

TEST(Cli, Features) {
  TempDir dir("cli_features");
  write_tone(dir / "tone.wav", 16000, 1.0);
  const auto r = cli({"features", "--wav", (dir / "tone.wav").string(), "--out", (dir / "f").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const Mat mel = read_matrix(dir / "f" / "tone.mel.ndf");
  EXPECT_EQ(mel.rows(), 100);
  EXPECT_EQ(mel.cols(), 80);
  EXPECT_EQ(read_vector(dir / "f" / "tone.pitch.ndf").size(), 100);
  // f32 on disk: re-reading and re-writing reproduces the file byte for byte.
  write_matrix(dir / "again.ndf", mel);
  std::ifstream x(dir / "f" / "tone.mel.ndf", std::ios::binary), y(dir / "again.ndf", std::ios::binary);
  EXPECT_EQ(std::string(std::istreambuf_iterator<char>(x), {}), std::string(std::istreambuf_iterator<char>(y), {}));

  write_tone(dir / "cd.wav", 44100, 0.2);
  const auto bad = cli({"features", "--wav", (dir / "cd.wav").string(), "--out", (dir / "g").string()});
  EXPECT_EQ(bad.code, kExitData);
  EXPECT_NE(bad.err.find("16000"), std::string::npos) << bad.err;
}

class CliModel : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = new TempDir("cli_model");
    const auto s = cli({"synth-data", "--out", path("data"), "--set", "synth.num_samples=12", "--set",
                        "synth.num_speakers=2"});
    ASSERT_EQ(s.code, 0) << s.err;
    for (const std::string multi : {"false", "true"}) {
      const auto t = cli({"train", "--manifest", path("data/manifest.jsonl"), "--out", path("run_" + multi),
                          "--steps", "3", "--set", "model.multi_speaker=" + multi});
      ASSERT_EQ(t.code, 0) << t.err;
    }
    std::mt19937_64 rng(1);
    write_matrix(path("video.ndf"), random_mat(50, 32, rng));
  }
  static void TearDownTestSuite() { delete root_; }
  static std::string path(const std::string& sub) { return (root_->path() / sub).string(); }
  static std::string checkpoint(const std::string& multi) { return path("run_" + multi + "/checkpoints/step_000003"); }

  CliRun dub(const std::string& multi, const std::string& out, const std::vector<std::string>& extra = {}) {
    return cli(concat({"dub", "--text", "the cat", "--video-features", path("video.ndf"), "--checkpoint",
                       checkpoint(multi), "--out", path(out)},
                      extra));
  }

  static TempDir* root_;
};
TempDir* CliModel::root_ = nullptr;

TEST_F(CliModel, DubLengthLawAndDeterminism) {
  const auto a = dub("false", "dub_a");
  ASSERT_EQ(a.code, 0) << a.err;
  const Mat mel = read_matrix(path("dub_a/mel.ndf"));
  EXPECT_EQ(mel.rows(), 200);
  EXPECT_EQ(read_matrix(path("dub_a/attention.ndf")).rows(), 50);
  EXPECT_TRUE(fs::exists(path("dub_a/dub.wav")));
  EXPECT_TRUE(fs::exists(path("dub_a/config.json")));
  ASSERT_EQ(dub("false", "dub_b").code, 0);
  EXPECT_EQ(read_tree(path("dub_a")), read_tree(path("dub_b")));
}

TEST_F(CliModel, DubErrors) {
  EXPECT_EQ(dub("true", "dub_noface").code, kExitData);
  EXPECT_EQ(cli({"dub", "--text", "qzxv", "--video-features", path("video.ndf"), "--checkpoint",
                 checkpoint("false"), "--out", path("dub_oov")})
                .code,
            kExitData);
  std::mt19937_64 rng(2);
  write_matrix(path("narrow.ndf"), random_mat(50, 7, rng));
  EXPECT_EQ(cli({"dub", "--text", "the cat", "--video-features", path("narrow.ndf"), "--checkpoint",
                 checkpoint("false"), "--out", path("dub_narrow")})
                .code,
            kExitData);
}

TEST_F(CliModel, FacesChangeMultiSpeakerOutput) {
  std::mt19937_64 rng(3);
  write_matrix(path("face_a.ndf"), random_mat(1, 4096, rng));
  write_matrix(path("face_b.ndf"), random_mat(1, 4096, rng));
  ASSERT_EQ(dub("true", "face_a", {"--face-feature", path("face_a.ndf")}).code, 0);
  ASSERT_EQ(dub("true", "face_b", {"--face-feature", path("face_b.ndf")}).code, 0);
  const Mat a = read_matrix(path("face_a/mel.ndf")), b = read_matrix(path("face_b/mel.ndf"));
  EXPECT_GT((a - b).cwiseAbs().mean(), 0.0);
}

TEST_F(CliModel, ResumeAndEval) {
  const auto r = cli({"train", "--manifest", path("data/manifest.jsonl"), "--out", path("run_false"), "--steps", "5",
                      "--resume", "latest"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream log(path("run_false/metrics.jsonl"));
  int lines = 0;
  for (std::string line; std::getline(log, line);) ++lines;
  EXPECT_EQ(lines, 5);
  const auto e = cli({"eval", "--checkpoint", path("run_false/checkpoints/step_000005"), "--manifest",
                      path("data/manifest.jsonl"), "--split", "all", "--out", path("eval"), "--no-vocoder"});
  ASSERT_EQ(e.code, 0) << e.err;
  EXPECT_TRUE(fs::exists(path("eval/report.json")));
  EXPECT_TRUE(fs::exists(path("eval/distances.ndf")));
  EXPECT_EQ(cli({"eval", "--checkpoint", path("nowhere"), "--manifest", path("data/manifest.jsonl"), "--out",
                 path("eval2")})
                .code,
            kExitData);
}

TEST(Cli, ConfigFileAndEnvironment) {
  TempDir dir("cli_config");
  {
    std::ofstream f(dir / "c.json");
    f << R"({"synth": {"num_samples": 5}})";
  }
  ASSERT_EQ(cli({"synth-data", "--config", (dir / "c.json").string(), "--out", (dir / "a").string()}).code, 0);
  EXPECT_EQ(load_manifest(dir / "a" / "manifest.jsonl").samples.size(), 5u);
  ::setenv("ND_CONFIG", (dir / "c.json").c_str(), 1);
  const auto r = cli({"synth-data", "--out", (dir / "b").string(), "--set", "synth.num_samples=6"});
  ::unsetenv("ND_CONFIG");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(load_manifest(dir / "b" / "manifest.jsonl").samples.size(), 6u);
}

}  // namespace
}  // namespace vdub
