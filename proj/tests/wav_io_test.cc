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

#include "apcodec/wav_io.h"

#include <cstdint>
#include <fstream>
#include <vector>

#include "gtest/gtest.h"
#include "test_util.h"

namespace apcodec {
namespace {

void WriteBytes(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream(path, std::ios::binary)
      .write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

// Canonical 44-byte header followed by little-endian 16-bit samples.
std::vector<uint8_t> Pcm16File(int rate, int channels,
                               const std::vector<int16_t>& samples) {
  std::vector<uint8_t> b;
  auto u32 = [&](uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xff);
  };
  auto u16 = [&](uint16_t v) {
    b.push_back(v & 0xff);
    b.push_back(v >> 8);
  };
  auto tag = [&](const char* t) { b.insert(b.end(), t, t + 4); };
  const uint32_t data = samples.size() * 2;
  tag("RIFF"); u32(36 + data); tag("WAVE");
  tag("fmt "); u32(16); u16(1); u16(channels); u32(rate);
  u32(rate * 2 * channels); u16(2 * channels); u16(16);
  tag("data"); u32(data);
  for (int16_t s : samples) u16(static_cast<uint16_t>(s));
  return b;
}

TEST(WavIoTest, ReadsHandBuiltPcm16) {
  const std::string dir = testing::TempDir("wav_pcm");
  WriteBytes(dir + "/a.wav", Pcm16File(16000, 1, {0, 16384, -32768, 32767}));
  const auto wav = ReadWav(dir + "/a.wav");
  ASSERT_TRUE(wav.ok()) << wav.status();
  EXPECT_EQ(wav->sample_rate, 16000);
  EXPECT_EQ(wav->samples,
            (std::vector<double>{0.0, 0.5, -1.0, 32767.0 / 32768.0}));
}

TEST(WavIoTest, FloatRoundTripIsExactForFloatValues) {
  const std::string dir = testing::TempDir("wav_float");
  WavData in{48000, {0.0, 0.25, -0.125, 0.7f, -1.5}};
  ASSERT_TRUE(WriteWav(dir + "/f.wav", in, WavFormat::kFloat32).ok());
  const auto out = ReadWavAtRate(dir + "/f.wav", 48000);
  ASSERT_TRUE(out.ok());
  EXPECT_EQ(out->samples, in.samples);
}

TEST(WavIoTest, Pcm16RoundTripWithinQuantizationStep) {
  const std::string dir = testing::TempDir("wav_pcm_rt");
  WavData in{8000, {0.0, 0.3, -0.3, 0.999, -0.999, 2.0}};
  ASSERT_TRUE(WriteWav(dir + "/p.wav", in, WavFormat::kPcm16).ok());
  const auto out = ReadWav(dir + "/p.wav");
  ASSERT_TRUE(out.ok());
  ASSERT_EQ(out->samples.size(), in.samples.size());
  for (size_t i = 0; i + 1 < in.samples.size(); ++i) {
    EXPECT_NEAR(out->samples[i], in.samples[i], 1.0 / 32768.0);
  }
  EXPECT_NEAR(out->samples.back(), 1.0, 1.0 / 32768.0);
}

TEST(WavIoTest, RejectsRateMismatchStereoAndGarbage) {
  const std::string dir = testing::TempDir("wav_bad");
  WriteBytes(dir + "/a.wav", Pcm16File(16000, 1, {1, 2}));
  EXPECT_EQ(ReadWavAtRate(dir + "/a.wav", 48000).status().code(),
            absl::StatusCode::kInvalidArgument);
  WriteBytes(dir + "/s.wav", Pcm16File(16000, 2, {1, 2}));
  EXPECT_EQ(ReadWav(dir + "/s.wav").status().code(),
            absl::StatusCode::kInvalidArgument);
  WriteBytes(dir + "/g.wav", {'n', 'o', 'p', 'e'});
  EXPECT_EQ(ReadWav(dir + "/g.wav").status().code(),
            absl::StatusCode::kInvalidArgument);
  EXPECT_FALSE(ReadWav(dir + "/missing.wav").ok());
}

}  // namespace
}  // namespace apcodec
