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

#include "apcodec/quantizer.h"

#include <cmath>
#include <limits>
#include <vector>

#include "apcodec/autograd.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace apcodec {
namespace {

using ::apcodec::testing::RandomVector;

Matrix RandomMatrix(int64_t rows, int64_t cols, Rng& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  m.values = RandomVector(rows * cols, rng, scale);
  return m;
}

Codebooks RandomBooks(int stages, int size, int dim, Rng& rng) {
  Codebooks books;
  for (int q = 0; q < stages; ++q) books.tables.push_back(RandomMatrix(size, dim, rng));
  return books;
}

// Exhaustive scan over every codeword, lowest index on ties.
int32_t ScanOracle(const std::vector<double>& x, const Matrix& table) {
  int32_t best = -1;
  double best_dist = std::numeric_limits<double>::infinity();
  for (int64_t k = 0; k < table.rows; ++k) {
    double dist = 0.0;
    for (int64_t d = 0; d < table.cols; ++d) {
      dist += (x[d] - table(k, d)) * (x[d] - table(k, d));
    }
    if (dist < best_dist) {
      best_dist = dist;
      best = static_cast<int32_t>(k);
    }
  }
  return best;
}

TEST(QuantizeTest, ExactCodewordMatch) {
  Rng rng(1);
  Codebooks books = RandomBooks(1, 16, 4, rng);
  LatentSequence latent{Matrix(1, 4)};
  for (int d = 0; d < 4; ++d) latent.values(0, d) = books.tables[0](7, d);
  const auto r = Quantize(latent, books);
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r->tokens.at(0, 0), 7);
  EXPECT_EQ(r->residual_norms[0], 0.0);
}

TEST(QuantizeTest, TiesGoToLowestIndex) {
  Codebooks books;
  books.tables.push_back(Matrix(4, 2));
  books.tables[0](1, 0) = 1.0;
  books.tables[0](2, 0) = -1.0;
  books.tables[0](3, 0) = 1.0;
  LatentSequence latent{Matrix(2, 2)};
  latent.values(1, 0) = 5.0;
  const auto r = Quantize(latent, books);
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r->tokens.at(0, 0), 0);
  EXPECT_EQ(r->tokens.at(1, 0), 1);
}

TEST(QuantizeTest, MatchesExhaustiveOracleStageByStage) {
  Rng rng(2);
  const int stages = 3, size = 64, dim = 6;
  const Codebooks books = RandomBooks(stages, size, dim, rng);
  LatentSequence latent{RandomMatrix(200, dim, rng, 2.0)};
  const auto r = Quantize(latent, books);
  ASSERT_TRUE(r.ok());
  for (int64_t f = 0; f < latent.frames(); ++f) {
    std::vector<double> residual(latent.values.row(f).begin(),
                                 latent.values.row(f).end());
    for (int q = 0; q < stages; ++q) {
      const int32_t k = ScanOracle(residual, books.tables[q]);
      ASSERT_EQ(r->tokens.at(f, q), k) << "frame " << f << " stage " << q;
      for (int d = 0; d < dim; ++d) residual[d] -= books.tables[q](k, d);
    }
  }
}

TEST(QuantizeTest, ResidualNormsNonIncreasingWithFittedCodebooks) {
  Rng rng(3);
  const int dim = 8;
  const Matrix data = RandomMatrix(500, dim, rng);
  Rng init_rng(4);
  ResidualVectorQuantizer rvq(4, 32, dim, init_rng);
  rvq.InitializeFromData(data, QuantizerTrainingOptions(), init_rng);
  const auto r = Quantize(LatentSequence{data}, rvq.codebooks());
  ASSERT_TRUE(r.ok());
  double input_mse = 0.0;
  for (double v : data.values) input_mse += v * v;
  input_mse /= data.values.size();
  EXPECT_LE(r->residual_norms[0], input_mse);
  for (size_t q = 1; q < r->residual_norms.size(); ++q) {
    EXPECT_LE(r->residual_norms[q], r->residual_norms[q - 1]);
  }
}

TEST(QuantizeTest, DequantizeOfQuantizeIsBitExact) {
  Rng rng(5);
  const Codebooks books = RandomBooks(3, 32, 5, rng);
  const LatentSequence latent{RandomMatrix(50, 5, rng)};
  const auto r = Quantize(latent, books);
  ASSERT_TRUE(r.ok());
  const auto back = Dequantize(r->tokens, books);
  ASSERT_TRUE(back.ok());
  EXPECT_EQ(back->values, r->quantized.values);
}

TEST(QuantizeTest, RejectsBadInput) {
  Rng rng(6);
  const Codebooks books = RandomBooks(2, 8, 3, rng);
  EXPECT_EQ(Quantize(LatentSequence{Matrix(0, 3)}, books).status().code(),
            absl::StatusCode::kInvalidArgument);
  EXPECT_EQ(Quantize(LatentSequence{Matrix(2, 4)}, books).status().code(),
            absl::StatusCode::kInvalidArgument);
}

TEST(DequantizeTest, DefinitionalCases) {
  Rng rng(7);
  const Codebooks books = RandomBooks(2, 16, 4, rng);
  TokenSequence zeros(3, 2);
  const auto z = Dequantize(zeros, books);
  ASSERT_TRUE(z.ok());
  for (int64_t f = 0; f < 3; ++f) {
    for (int d = 0; d < 4; ++d) {
      EXPECT_EQ(z->values(f, d), books.tables[0](0, d) + books.tables[1](0, d));
    }
  }
  TokenSequence pair(1, 2);
  pair.at(0, 0) = 3;
  pair.at(0, 1) = 9;
  const auto p = Dequantize(pair, books);
  ASSERT_TRUE(p.ok());
  for (int d = 0; d < 4; ++d) {
    EXPECT_EQ(p->values(0, d), books.tables[0](3, d) + books.tables[1](9, d));
  }
}

TEST(DequantizeTest, RandomTokensMatchSummationOracle) {
  Rng rng(8);
  const Codebooks books = RandomBooks(4, 32, 6, rng);
  TokenSequence tokens(40, 4);
  std::uniform_int_distribution<int32_t> pick(0, 31);
  for (int32_t& t : tokens.indices) t = pick(rng);
  const auto out = Dequantize(tokens, books);
  ASSERT_TRUE(out.ok());
  for (int64_t f = 0; f < 40; ++f) {
    for (int d = 0; d < 6; ++d) {
      double acc = 0.0;
      for (int q = 0; q < 4; ++q) acc += books.tables[q](tokens.at(f, q), d);
      EXPECT_EQ(out->values(f, d), acc);
    }
  }
}

TEST(DequantizeTest, OutOfRangeIndexIsCorruption) {
  Rng rng(9);
  const Codebooks books = RandomBooks(2, 8, 3, rng);
  TokenSequence tokens(2, 2);
  tokens.at(1, 1) = 8;
  EXPECT_EQ(Dequantize(tokens, books).status().code(),
            absl::StatusCode::kDataLoss);
  tokens.at(1, 1) = -1;
  EXPECT_EQ(Dequantize(tokens, books).status().code(),
            absl::StatusCode::kDataLoss);
  EXPECT_EQ(Dequantize(TokenSequence(2, 3), books).status().code(),
            absl::StatusCode::kInvalidArgument);
}

TEST(ResidualVectorQuantizerTest, ForwardMatchesQuantizeAndPassesGradient) {
  Rng rng(10);
  ResidualVectorQuantizer rvq(3, 16, 4, rng);
  const Matrix data = RandomMatrix(12, 4, rng);
  Tensor latent = Tensor::Parameter({12, 4}, data.values);
  const QuantizerTrace trace = rvq.Forward(latent);
  const auto ref = Quantize(LatentSequence{data}, rvq.codebooks());
  ASSERT_TRUE(ref.ok());
  EXPECT_EQ(trace.tokens, ref->tokens);
  EXPECT_EQ(trace.residual_norms, ref->residual_norms);
  for (size_t i = 0; i < data.values.size(); ++i) {
    EXPECT_NEAR(trace.quantized.data()[i], ref->quantized.values.values[i],
                1e-12);
  }
  ASSERT_EQ(trace.stage_inputs.size(), 3u);
  EXPECT_EQ(std::vector<double>(trace.stage_inputs[0].data().begin(),
                                trace.stage_inputs[0].data().end()),
            data.values);
  Sum(trace.quantized).Backward();
  for (double g : latent.grad()) EXPECT_EQ(g, 1.0);
}

TEST(ResidualVectorQuantizerTest, EmaUpdateMatchesClosedForm) {
  Rng rng(11);
  ResidualVectorQuantizer rvq(1, 4, 2, rng);
  const Matrix before = rvq.codebooks().tables[0];
  Matrix rows(3, 2);
  rows.values = {1.0, 2.0, 3.0, 4.0, -1.0, 0.5};
  const std::vector<std::vector<int32_t>> tokens = {{0, 0, 2}};
  QuantizerTrainingOptions options;
  options.ema_decay = 0.9;
  options.dead_code_window = 1000;
  rvq.UpdateEma({rows}, tokens, options, rng);
  // Fresh state: cluster sizes 1 and embedding sums equal to the codewords.
  const double counts[4] = {2.0, 0.0, 1.0, 0.0};
  double n[4], total = 0.0;
  for (int k = 0; k < 4; ++k) total += n[k] = 0.9 + 0.1 * counts[k];
  for (int k = 0; k < 4; ++k) {
    const double smoothed = (n[k] + 1e-5) / (total + 4e-5) * total;
    for (int d = 0; d < 2; ++d) {
      double sum = 0.0;
      for (int r = 0; r < 3; ++r) {
        if (tokens[0][r] == k) sum += rows(r, d);
      }
      const double expected = (0.9 * before(k, d) + 0.1 * sum) / smoothed;
      EXPECT_NEAR(rvq.codebooks().tables[0](k, d), expected, 1e-12);
    }
  }
}

TEST(ResidualVectorQuantizerTest, DeadCodesAreReseededFromBatch) {
  Rng rng(12);
  ResidualVectorQuantizer rvq(1, 8, 3, rng);
  Matrix rows(4, 3);
  rows.values = RandomVector(12, rng, 100.0);
  for (double& v : rows.values) v += 1000.0;
  const std::vector<std::vector<int32_t>> tokens = {{0, 0, 1, 1}};
  QuantizerTrainingOptions options;
  options.dead_code_window = 2;
  rvq.UpdateEma({rows}, tokens, options, rng);
  rvq.UpdateEma({rows}, tokens, options, rng);
  // Codes 2..7 went unused for a full window and now sit near batch rows.
  const Matrix& table = rvq.codebooks().tables[0];
  for (int k = 2; k < 8; ++k) {
    double best = std::numeric_limits<double>::infinity();
    for (int r = 0; r < 4; ++r) {
      double dist = 0.0;
      for (int d = 0; d < 3; ++d) dist += std::pow(table(k, d) - rows(r, d), 2);
      best = std::min(best, std::sqrt(dist));
    }
    EXPECT_LT(best, 10.0) << "code " << k;
  }
  for (int a = 0; a < 8; ++a) {
    for (int b = a + 1; b < 8; ++b) {
      EXPECT_NE(std::vector<double>(table.row(a).begin(), table.row(a).end()),
                std::vector<double>(table.row(b).begin(), table.row(b).end()));
    }
  }
}

TEST(ResidualVectorQuantizerTest, StateRoundTripAndValidation) {
  Rng rng(13);
  ResidualVectorQuantizer a(2, 8, 3, rng);
  a.InitializeFromData(RandomMatrix(40, 3, rng), QuantizerTrainingOptions(),
                       rng);
  ResidualVectorQuantizer b(2, 8, 3, rng);
  ASSERT_TRUE(b.SetState(a.GetState()).ok());
  EXPECT_TRUE(b.initialized());
  EXPECT_EQ(b.codebooks().tables, a.codebooks().tables);
  ResidualVectorQuantizer c(3, 8, 3, rng);
  EXPECT_FALSE(c.SetState(a.GetState()).ok());
  auto broken = a.GetState();
  broken.usage.pop_back();
  EXPECT_FALSE(b.SetState(broken).ok());
}

}  // namespace
}  // namespace apcodec
