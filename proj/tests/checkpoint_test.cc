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

#include "apcodec/checkpoint.h"

#include <cstring>
#include <string>
#include <vector>

#include "apcodec/codec_model.h"
#include "apcodec/discriminators.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace apcodec {
namespace {

using ::apcodec::testing::MiniatureConfig;
using ::apcodec::testing::RandomVector;

class CheckpointTest : public ::testing::Test {
 protected:
  CheckpointTest()
      : config_(MiniatureConfig()),
        model_(config_.signal, config_.codec, 3),
        discriminators_(config_.discriminator, 3, 0) {
    Rng rng(4);
    Matrix latents(100, config_.codec.latent_dim);
    latents.values = RandomVector(latents.values.size(), rng);
    model_.quantizer().InitializeFromData(latents, QuantizerTrainingOptions(),
                                          rng);
  }

  StageCheckpoint Capture() const {
    StageCheckpoint c = CaptureCheckpoint(config_, model_, &discriminators_);
    c.steps = 17;
    c.parent_hash = "abc";
    c.generator_optimizer.steps = 17;
    return c;
  }

  RunConfig config_;
  CodecModel model_;
  Discriminators discriminators_;
};

TEST(StageTagTest, NamesAndValidation) {
  EXPECT_EQ(StageTag(false, 0), "joint");
  EXPECT_EQ(StageTag(true, 0), "individual");
  EXPECT_EQ(StageTag(false, 2), "iteration-2-joint");
  EXPECT_EQ(StageTag(true, 3), "iteration-3-individual");
  EXPECT_TRUE(IsIndividualTag("iteration-3-individual"));
  EXPECT_FALSE(IsIndividualTag("joint"));
  EXPECT_TRUE(IsValidStageTag("iteration-12-joint"));
  EXPECT_FALSE(IsValidStageTag("iteration-x-joint"));
  EXPECT_FALSE(IsValidStageTag("final"));
}

TEST_F(CheckpointTest, SerializeRoundTripIsExact) {
  const StageCheckpoint c = Capture();
  const auto back = DeserializeCheckpoint(SerializeCheckpoint(c));
  ASSERT_TRUE(back.ok()) << back.status();
  EXPECT_EQ(back->stage_tag, c.stage_tag);
  EXPECT_EQ(back->config, c.config);
  EXPECT_EQ(back->encoder, c.encoder);
  EXPECT_EQ(back->decoder, c.decoder);
  EXPECT_EQ(back->mpd, c.mpd);
  EXPECT_EQ(back->mrd, c.mrd);
  EXPECT_EQ(back->quantizer.books.tables, c.quantizer.books.tables);
  EXPECT_EQ(back->quantizer.cluster_size, c.quantizer.cluster_size);
  EXPECT_EQ(back->quantizer.initialized, true);
  EXPECT_EQ(back->steps, 17);
  EXPECT_EQ(back->parent_hash, "abc");
  EXPECT_EQ(back->generator_optimizer.steps, 17);
  EXPECT_EQ(FrozenModuleHash(*back), FrozenModuleHash(model_));
}

TEST_F(CheckpointTest, RebuiltModelEncodesIdentically) {
  const auto rebuilt = BuildModel(Capture());
  ASSERT_TRUE(rebuilt.ok()) << rebuilt.status();
  Rng rng(5);
  const std::vector<double> wave = RandomVector(900, rng, 0.4);
  const auto a = model_.EncodeWaveform(wave);
  const auto b = (*rebuilt)->EncodeWaveform(wave);
  ASSERT_TRUE(a.ok() && b.ok());
  EXPECT_EQ(a->tokens, b->tokens);
  EXPECT_EQ(*model_.DecodeTokens(a->tokens, 900),
            *(*rebuilt)->DecodeTokens(b->tokens, 900));
  Discriminators fresh(config_.discriminator, 99, 0);
  ASSERT_TRUE(RestoreDiscriminators(Capture(), fresh).ok());
  EXPECT_EQ(CaptureParameters(fresh.mpd().params()), Capture().mpd);
}

TEST_F(CheckpointTest, RestoreRejectsConfigMismatch) {
  RunConfig other = config_;
  other.codec.latent_dim = 4;
  CodecModel small(other.signal, other.codec, 3);
  EXPECT_EQ(RestoreModel(Capture(), small).code(),
            absl::StatusCode::kFailedPrecondition);
}

TEST_F(CheckpointTest, FrozenHashCoversEncoderAndCodebooksOnly) {
  const std::string base = FrozenModuleHash(model_);
  EXPECT_EQ(base.size(), 64u);
  model_.decoder().params().mutable_entries()[0].tensor.mutable_data()[0] += 1.0;
  EXPECT_EQ(FrozenModuleHash(model_), base);
  model_.quantizer().mutable_codebooks().tables[1].values[0] += 1e-12;
  const std::string after_books = FrozenModuleHash(model_);
  EXPECT_NE(after_books, base);
  model_.encoder().params().mutable_entries()[0].tensor.mutable_data()[0] += 1e-12;
  EXPECT_NE(FrozenModuleHash(model_), after_books);
}

TEST_F(CheckpointTest, CorruptionGivesDistinctCodes) {
  const std::vector<uint8_t> good = SerializeCheckpoint(Capture());

  std::vector<uint8_t> magic = good;
  magic[1] = 'X';
  EXPECT_EQ(DeserializeCheckpoint(magic).status().code(),
            absl::StatusCode::kInvalidArgument);

  std::vector<uint8_t> version = good;
  version[4] = 7;
  EXPECT_EQ(DeserializeCheckpoint(version).status().code(),
            absl::StatusCode::kUnimplemented);

  std::vector<uint8_t> truncated(good.begin(), good.end() - 8);
  EXPECT_EQ(DeserializeCheckpoint(truncated).status().code(),
            absl::StatusCode::kDataLoss);

  std::vector<uint8_t> header_cut(good.begin(), good.begin() + 40);
  EXPECT_EQ(DeserializeCheckpoint(header_cut).status().code(),
            absl::StatusCode::kDataLoss);

  // Flip one bit in the first payload double (an encoder weight): the stored
  // frozen-module hash no longer matches.
  uint64_t header_len;
  std::memcpy(&header_len, good.data() + 8, 8);
  std::vector<uint8_t> flipped = good;
  flipped[16 + header_len] ^= 0x01;
  EXPECT_EQ(DeserializeCheckpoint(flipped).status().code(),
            absl::StatusCode::kDataLoss);
}

TEST_F(CheckpointTest, FileRoundTrip) {
  const std::string dir = testing::TempDir("checkpoint");
  ASSERT_TRUE(SaveCheckpoint(Capture(), dir + "/a.apck").ok());
  const auto back = LoadCheckpoint(dir + "/a.apck");
  ASSERT_TRUE(back.ok()) << back.status();
  EXPECT_EQ(back->encoder, Capture().encoder);
  const auto missing = LoadCheckpoint(dir + "/none.apck");
  EXPECT_FALSE(missing.ok());
  EXPECT_NE(missing.status().message().find("none.apck"), std::string::npos);
}

}  // namespace
}  // namespace apcodec
