// Copyright 2026 The APCodec Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Drives the command-line binary end to end through the shell.

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include <unistd.h>

#include "gtest/gtest.h"

namespace apcodec {
namespace {

std::string TempDir() {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("apcodec_cli_test_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

struct CommandResult {
  int exit_code = -1;
  std::string output;
};

CommandResult RunCli(const std::string& args) {
  const std::string cmd = std::string(APCODEC_BINARY) + " " + args + " 2>&1";
  CommandResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  char buf[4096];
  while (size_t n = fread(buf, 1, sizeof(buf), pipe)) r.output.append(buf, n);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string Slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new std::string(TempDir());
    config_ = new std::string(*dir_ + "/mini.cfg");
    std::ofstream(*config_)
        << "signal.sample_rate = 16000\nsignal.frame_length = 64\n"
           "signal.frame_shift = 16\nsignal.fft_size = 64\n"
           "codec.num_blocks = 1\ncodec.channel_size = 16\n"
           "codec.latent_dim = 8\ncodec.codebook_size = 64\n"
           "codec.num_quantizers = 2\ndiscriminator.periods = 2,3\n"
           "discriminator.mpd_channels = 4,8\n"
           "discriminator.resolutions = 64:16\n"
           "discriminator.mrd_channels = 4\ntrain.crop_length = 1280\n"
           "train.batch_size = 2\ntrain.mel_bins = 16\n"
           "train.steps_per_stage = 2\n";
    const CommandResult toy = RunCli("toy-corpus --out " + *dir_ +
                                  "/clips --count 3 --seconds 0.2 --rate 16000");
    ASSERT_EQ(toy.exit_code, 0) << toy.output;
    const CommandResult joint =
        RunCli("--config " + *config_ + " --set paths.output_dir=" + *dir_ +
            "/run train-joint --manifest " + *dir_ + "/clips/manifest.tsv");
    ASSERT_EQ(joint.exit_code, 0) << joint.output;
  }
  static void TearDownTestSuite() {
    std::filesystem::remove_all(*dir_);
    delete dir_;
    delete config_;
  }
  static std::string Ckpt() { return *dir_ + "/run/joint.apck"; }

  static inline std::string* dir_ = nullptr;
  static inline std::string* config_ = nullptr;
};

TEST_F(CliTest, UsageErrorsExitNonZero) {
  const CommandResult none = RunCli("");
  EXPECT_NE(none.exit_code, 0);
  EXPECT_NE(none.output.find("Usage"), std::string::npos) << none.output;
  EXPECT_NE(RunCli("frobnicate").exit_code, 0);
  const CommandResult flag = RunCli("encode --bogus x y");
  EXPECT_NE(flag.exit_code, 0);
  EXPECT_NE(flag.output.find("Usage"), std::string::npos) << flag.output;
}

TEST_F(CliTest, EncodeIsIdempotentAndDecodeRestoresLength) {
  const std::string wav = *dir_ + "/clips/clip000.wav";
  const std::string a = *dir_ + "/a.apc", b = *dir_ + "/b.apc";
  ASSERT_EQ(RunCli("encode --ckpt " + Ckpt() + " " + wav + " " + a).exit_code, 0);
  ASSERT_EQ(RunCli("encode --ckpt " + Ckpt() + " " + wav + " " + b).exit_code, 0);
  EXPECT_EQ(Slurp(a), Slurp(b));
  EXPECT_FALSE(Slurp(a).empty());
  const CommandResult info = RunCli("info " + a);
  ASSERT_EQ(info.exit_code, 0) << info.output;
  EXPECT_NE(info.output.find("bitrate_kbps"), std::string::npos);
  const std::string out = *dir_ + "/a.wav";
  const CommandResult dec =
      RunCli("decode --ckpt " + Ckpt() + " " + a + " " + out + " --pcm16");
  ASSERT_EQ(dec.exit_code, 0) << dec.output;
  // 0.2 s at 16 kHz as 16-bit PCM plus the 44-byte header.
  EXPECT_EQ(std::filesystem::file_size(out), 44u + 3200u * 2u);
}

TEST_F(CliTest, CorruptBitstreamFailsWithoutOutput) {
  const std::string bad = *dir_ + "/bad.apc";
  std::ofstream(bad) << "XXXXnot a stream at all";
  const std::string out = *dir_ + "/bad.wav";
  const CommandResult r = RunCli("decode --ckpt " + Ckpt() + " " + bad + " " + out);
  EXPECT_NE(r.exit_code, 0);
  EXPECT_FALSE(std::filesystem::exists(out));
}

TEST_F(CliTest, EvaluateEmptyManifestFailsWithoutReport) {
  const std::string empty = *dir_ + "/empty.tsv";
  std::ofstream(empty) << "# nothing here\n";
  const std::string report = *dir_ + "/empty_report";
  const CommandResult r = RunCli("evaluate --ckpt " + Ckpt() + " --manifest " +
                              empty + " --report-dir " + report);
  EXPECT_NE(r.exit_code, 0);
  EXPECT_FALSE(std::filesystem::exists(report));
}

TEST_F(CliTest, StagedPipelineAndReport) {
  const std::string cache = *dir_ + "/cache";
  const std::string manifest = *dir_ + "/clips/manifest.tsv";
  ASSERT_EQ(RunCli("export-latents --ckpt " + Ckpt() + " --manifest " + manifest +
                " --out " + cache)
                .exit_code,
            0);
  const std::string individual = *dir_ + "/individual.apck";
  const CommandResult ind = RunCli("train-individual --ckpt " + Ckpt() +
                                " --cache " + cache + " --out " + individual);
  ASSERT_EQ(ind.exit_code, 0) << ind.output;
  const CommandResult info = RunCli("info " + individual);
  EXPECT_NE(info.output.find("individual"), std::string::npos) << info.output;
  const CommandResult eval = RunCli("evaluate --ckpt " + individual +
                                 " --manifest " + manifest + " --report-dir " +
                                 *dir_ + "/report");
  ASSERT_EQ(eval.exit_code, 0) << eval.output;
  EXPECT_TRUE(std::filesystem::exists(*dir_ + "/report/summary.json"));
  const CommandResult rep = RunCli("report " + *dir_ + "/run/losses.jsonl");
  ASSERT_EQ(rep.exit_code, 0) << rep.output;
  EXPECT_NE(rep.output.find("joint"), std::string::npos);
}

}  // namespace
}  // namespace apcodec
