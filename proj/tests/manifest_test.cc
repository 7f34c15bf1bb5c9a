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

#include "apcodec/manifest.h"

#include <fstream>

#include "gtest/gtest.h"
#include "test_util.h"

namespace apcodec {
namespace {

TEST(ManifestTest, ParsesResolvesAndSkipsComments) {
  const auto m = ParseManifest(
      "# header\n\na\tclips/a.wav\t1.5\nb\t/abs/b.wav\n", "/data");
  ASSERT_TRUE(m.ok()) << m.status();
  ASSERT_EQ(m->size(), 2u);
  EXPECT_EQ((*m)[0], (ManifestEntry{"a", "/data/clips/a.wav", 1.5}));
  EXPECT_EQ((*m)[1], (ManifestEntry{"b", "/abs/b.wav", 0.0}));
}

TEST(ManifestTest, RejectsMalformedLines) {
  EXPECT_FALSE(ParseManifest("only-id\n", "").ok());
  EXPECT_FALSE(ParseManifest("a\tx.wav\tnot-a-number\n", "").ok());
  EXPECT_FALSE(ParseManifest("a\tx.wav\na\ty.wav\n", "").ok());
}

TEST(ManifestTest, EmptyTextGivesEmptyList) {
  const auto m = ParseManifest("# nothing\n", "");
  ASSERT_TRUE(m.ok());
  EXPECT_TRUE(m->empty());
}

TEST(ManifestTest, FileRoundTripRelativeToManifestDirectory) {
  const std::string dir = testing::TempDir("manifest");
  const std::vector<ManifestEntry> entries = {{"x", dir + "/x.wav", 0.25},
                                              {"y", dir + "/y.wav", 0.0}};
  std::ofstream(dir + "/m.tsv") << FormatManifest(entries);
  const auto back = ReadManifest(dir + "/m.tsv");
  ASSERT_TRUE(back.ok()) << back.status();
  EXPECT_EQ(*back, entries);
  std::ofstream(dir + "/rel.tsv") << "z\tz.wav\n";
  const auto rel = ReadManifest(dir + "/rel.tsv");
  ASSERT_TRUE(rel.ok());
  EXPECT_EQ((*rel)[0].path, dir + "/z.wav");
  EXPECT_FALSE(ReadManifest(dir + "/missing.tsv").ok());
}

}  // namespace
}  // namespace apcodec
