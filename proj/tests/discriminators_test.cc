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

#include "apcodec/discriminators.h"

#include <cmath>
#include <vector>

#include "apcodec/autograd.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace apcodec {
namespace {

using ::apcodec::testing::MiniatureConfig;
using ::apcodec::testing::RandomVector;

Tensor Wave(std::vector<double> v) {
  const int64_t n = static_cast<int64_t>(v.size());
  return Tensor::FromData({n}, std::move(v));
}

void ExpectFinite(const DiscriminatorOutput& out) {
  ASSERT_EQ(out.scores.size(), out.features.size());
  for (const Tensor& s : out.scores) {
    for (double v : s.data()) ASSERT_TRUE(std::isfinite(v));
  }
  for (const auto& list : out.features) {
    for (const Tensor& f : list) {
      for (double v : f.data()) ASSERT_TRUE(std::isfinite(v));
    }
  }
}

TEST(FoldByPeriodTest, FoldsRowMajorWithZeroPadding) {
  std::vector<double> v(7960);
  for (size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
  const Tensor folded = FoldByPeriod(Wave(v), 2);
  EXPECT_EQ(folded.shape(), (Shape{3980, 2, 1}));
  EXPECT_EQ(folded.data()[2 * 100 + 1], 201.0);
  const Tensor odd = FoldByPeriod(Wave({1, 2, 3, 4, 5}), 3);
  EXPECT_EQ(odd.shape(), (Shape{2, 3, 1}));
  EXPECT_EQ(std::vector<double>(odd.data().begin(), odd.data().end()),
            (std::vector<double>{1, 2, 3, 4, 5, 0}));
}

TEST(DiscriminatorConfigTest, DefaultsAndValidation) {
  DiscriminatorConfig config;
  EXPECT_EQ(config.periods, (std::vector<int>{2, 3, 5, 7, 11}));
  EXPECT_EQ(config.resolutions.size(), 3u);
  EXPECT_TRUE(config.Validate().ok());
  config.periods.clear();
  EXPECT_FALSE(config.Validate().ok());
  config = DiscriminatorConfig();
  config.resolutions[0].hop = 0;
  EXPECT_FALSE(config.Validate().ok());
}

TEST(DiscriminatorsTest, OneScoreMapPerConfiguredSubDiscriminator) {
  const RunConfig config = MiniatureConfig();
  Discriminators d(config.discriminator, 1, 0);
  Rng rng(2);
  for (int64_t length : {int64_t{128}, int64_t{1000}, int64_t{1280}}) {
    const auto mpd = d.mpd().Forward(Wave(RandomVector(length, rng, 0.5)));
    const auto mrd = d.mrd().Forward(Wave(RandomVector(length, rng, 0.5)));
    ASSERT_TRUE(mpd.ok() && mrd.ok());
    EXPECT_EQ(mpd->scores.size(), config.discriminator.periods.size());
    EXPECT_EQ(mrd->scores.size(), config.discriminator.resolutions.size());
    const auto both = d.Forward(Wave(RandomVector(length, rng, 0.5)));
    ASSERT_TRUE(both.ok());
    EXPECT_EQ(both->scores.size(), mpd->scores.size() + mrd->scores.size());
  }
}

TEST(DiscriminatorsTest, DefaultSetsGiveFiveAndThreeMaps) {
  DiscriminatorConfig config;
  config.mpd_channels = {2, 2};
  config.mrd_channels = 2;
  Discriminators d(config, 3, 0);
  Rng rng(4);
  const auto out = d.Forward(Wave(RandomVector(2048, rng, 0.5)));
  ASSERT_TRUE(out.ok()) << out.status();
  EXPECT_EQ(out->scores.size(), 8u);
}

TEST(DiscriminatorsTest, RejectsTooShortInput) {
  const RunConfig config = MiniatureConfig();
  Discriminators d(config.discriminator, 1, 0);
  EXPECT_EQ(d.mpd().Forward(Wave({0.1, 0.2})).status().code(),
            absl::StatusCode::kInvalidArgument);
  EXPECT_EQ(d.mrd().Forward(Wave(std::vector<double>(100, 0.1))).status().code(),
            absl::StatusCode::kInvalidArgument);
}

TEST(DiscriminatorsTest, FiniteOnDegenerateInputs) {
  const RunConfig config = MiniatureConfig();
  Discriminators d(config.discriminator, 1, 0);
  Rng rng(5);
  std::vector<double> clipped = RandomVector(512, rng, 10.0);
  for (double& v : clipped) v = std::clamp(v, -1.0, 1.0);
  for (const auto& wave : {std::vector<double>(512, 0.0), clipped,
                           RandomVector(512, rng, 1.0)}) {
    const auto out = d.Forward(Wave(wave));
    ASSERT_TRUE(out.ok());
    ExpectFinite(*out);
  }
}

TEST(DiscriminatorsTest, DeterministicAndSensitiveToAmplitude) {
  const RunConfig config = MiniatureConfig();
  Discriminators d(config.discriminator, 1, 0);
  Rng rng(6);
  const std::vector<double> wave = RandomVector(640, rng, 0.3);
  std::vector<double> doubled = wave;
  for (double& v : doubled) v *= 2.0;
  const auto a = d.Forward(Wave(wave));
  const auto b = d.Forward(Wave(wave));
  const auto c = d.Forward(Wave(doubled));
  ASSERT_TRUE(a.ok() && b.ok() && c.ok());
  for (size_t i = 0; i < a->scores.size(); ++i) {
    const auto sa = a->scores[i].data();
    const auto sb = b->scores[i].data();
    const auto sc = c->scores[i].data();
    EXPECT_TRUE(std::equal(sa.begin(), sa.end(), sb.begin()));
    EXPECT_FALSE(std::equal(sa.begin(), sa.end(), sc.begin())) << i;
  }
}

TEST(DiscriminatorsTest, GenerationsGiveDistinctReproducibleWeights) {
  const RunConfig config = MiniatureConfig();
  Discriminators a(config.discriminator, 1, 0);
  Discriminators b(config.discriminator, 1, 0);
  Discriminators c(config.discriminator, 1, 1);
  const auto ta = a.Tensors(), tb = b.Tensors(), tc = c.Tensors();
  ASSERT_EQ(ta.size(), tc.size());
  const auto da = ta[0].data(), db = tb[0].data(), dc = tc[0].data();
  EXPECT_TRUE(std::equal(da.begin(), da.end(), db.begin()));
  EXPECT_FALSE(std::equal(da.begin(), da.end(), dc.begin()));
}

}  // namespace
}  // namespace apcodec
