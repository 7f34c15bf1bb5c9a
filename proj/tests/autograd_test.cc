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

#include "apcodec/autograd.h"

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "apcodec/nn.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace apcodec {
namespace {

using ::apcodec::testing::CheckGradients;
using ::apcodec::testing::RandomVector;

Tensor RandomParameter(Shape shape, Rng& rng, double scale = 1.0) {
  const int64_t n = NumElements(shape);
  return Tensor::Parameter(std::move(shape), RandomVector(n, rng, scale));
}

// Reduces an op output to a scalar through fixed random weights so that every
// output element carries a distinct upstream gradient.
Tensor Project(const Tensor& y, uint64_t seed = 99) {
  Rng rng(seed);
  return Sum(Mul(y, Tensor::FromData(y.shape(), RandomVector(y.numel(), rng))));
}

void ExpectGradientsMatch(const std::function<Tensor()>& f,
                          const std::vector<Tensor>& wrt) {
  const auto r = CheckGradients(f, wrt);
  EXPECT_GT(r.checked, 0);
  EXPECT_LT(r.max_relative_error, 1e-5);
}

TEST(AutogradTest, ElementwiseOps) {
  Rng rng(1);
  Tensor a = RandomParameter({3, 4}, rng);
  Tensor b = RandomParameter({3, 4}, rng);
  Tensor pos = Tensor::Parameter({3, 4}, RandomVector(12, rng, 0.5));
  for (double& v : pos.mutable_data()) v = std::abs(v) + 0.5;
  Tensor row = RandomParameter({4}, rng);
  ExpectGradientsMatch([&] { return Project(Add(a, b)); }, {a, b});
  ExpectGradientsMatch([&] { return Project(Sub(a, row)); }, {a, row});
  ExpectGradientsMatch([&] { return Project(Mul(a, row)); }, {a, row});
  ExpectGradientsMatch([&] { return Project(Div(a, pos)); }, {a, pos});
  ExpectGradientsMatch([&] { return Project(Atan2(a, b)); }, {a, b});
  ExpectGradientsMatch([&] { return Project(Scale(a, -2.5)); }, {a});
  ExpectGradientsMatch([&] { return Project(AddScalar(a, 3.0)); }, {a});
  ExpectGradientsMatch([&] { return Project(Neg(a)); }, {a});
  ExpectGradientsMatch([&] { return Project(Exp(a)); }, {a});
  ExpectGradientsMatch([&] { return Project(Log(pos)); }, {pos});
  ExpectGradientsMatch([&] { return Project(Sin(a)); }, {a});
  ExpectGradientsMatch([&] { return Project(Cos(a)); }, {a});
  ExpectGradientsMatch([&] { return Project(Sqrt(pos)); }, {pos});
  ExpectGradientsMatch([&] { return Project(Square(a)); }, {a});
  ExpectGradientsMatch([&] { return Project(Abs(a)); }, {a});
  ExpectGradientsMatch([&] { return Project(Gelu(a)); }, {a});
  ExpectGradientsMatch([&] { return Project(LeakyRelu(a, 0.1)); }, {a});
  ExpectGradientsMatch([&] { return Project(AntiWrap(Scale(a, 5.0))); }, {a});
}

TEST(AutogradTest, ReductionsAndShapes) {
  Rng rng(2);
  Tensor a = RandomParameter({4, 3}, rng);
  Tensor b = RandomParameter({4, 2}, rng);
  ExpectGradientsMatch([&] { return Sum(Square(a)); }, {a});
  ExpectGradientsMatch([&] { return Mean(Exp(a)); }, {a});
  ExpectGradientsMatch([&] { return Project(SumRows(a)); }, {a});
  ExpectGradientsMatch([&] { return Project(Reshape(a, {2, 6})); }, {a});
  ExpectGradientsMatch([&] { return Project(ConcatColumns(a, b)); }, {a, b});
  ExpectGradientsMatch([&] { return Project(SliceRows(a, 1, 2)); }, {a});
  ExpectGradientsMatch([&] { return Project(PadRows(a, 2, 1)); }, {a});
  ExpectGradientsMatch([&] { return Project(Diff(a, 0)); }, {a});
  ExpectGradientsMatch([&] { return Project(Diff(a, 1)); }, {a});
}

TEST(AutogradTest, LinearAndNormalization) {
  Rng rng(3);
  Tensor x = RandomParameter({5, 3}, rng);
  Tensor w = RandomParameter({4, 3}, rng);
  Tensor b = RandomParameter({4}, rng);
  Tensor gamma = RandomParameter({3}, rng);
  Tensor beta = RandomParameter({3}, rng);
  ExpectGradientsMatch([&] { return Project(Linear(x, w, b)); }, {x, w, b});
  ExpectGradientsMatch([&] { return Project(Linear(x, w, Tensor())); }, {x, w});
  ExpectGradientsMatch(
      [&] { return Project(LayerNorm(x, gamma, beta, 1e-6)); },
      {x, gamma, beta});
}

TEST(AutogradTest, Convolutions) {
  Rng rng(4);
  Tensor x = RandomParameter({6, 3}, rng);
  Tensor dw = RandomParameter({5, 3}, rng);
  Tensor db = RandomParameter({3}, rng);
  ExpectGradientsMatch([&] { return Project(DepthwiseConv1d(x, dw, db)); },
                       {x, dw, db});
  Tensor w1 = RandomParameter({2, 3 * 3}, rng);
  Tensor b1 = RandomParameter({2}, rng);
  ExpectGradientsMatch([&] { return Project(Conv1d(x, w1, b1, 3, 1)); },
                       {x, w1, b1});
  Tensor img = RandomParameter({7, 5, 2}, rng);
  Conv2dGeometry geo{3, 2, 2, 1, 1, 0};
  Tensor w2 = RandomParameter({3, 3 * 2 * 2}, rng);
  Tensor b2 = RandomParameter({3}, rng);
  ExpectGradientsMatch([&] { return Project(Conv2d(img, w2, b2, geo)); },
                       {img, w2, b2});
}

TEST(AutogradTest, Conv1dMatchesDirectSum) {
  Rng rng(5);
  const std::vector<double> x = RandomVector(5 * 2, rng);
  const std::vector<double> w = RandomVector(3 * 3 * 2, rng);
  const std::vector<double> b = RandomVector(3, rng);
  Tensor y = Conv1d(Tensor::FromData({5, 2}, x), Tensor::FromData({3, 6}, w),
                    Tensor::FromData({3}, b), 3, 1);
  ASSERT_EQ(y.shape(), (Shape{5, 3}));
  for (int t = 0; t < 5; ++t) {
    for (int o = 0; o < 3; ++o) {
      double acc = b[o];
      for (int k = 0; k < 3; ++k) {
        const int src = t + k - 1;
        if (src < 0 || src >= 5) continue;
        for (int c = 0; c < 2; ++c) acc += w[o * 6 + k * 2 + c] * x[src * 2 + c];
      }
      EXPECT_NEAR(y.data()[t * 3 + o], acc, 1e-12);
    }
  }
}

TEST(AutogradTest, Conv2dMatchesDirectSum) {
  Rng rng(6);
  const int H = 7, W = 4, C = 2, O = 3, KH = 3, KW = 2;
  const Conv2dGeometry geo{KH, KW, 2, 1, 1, 0};
  const std::vector<double> x = RandomVector(H * W * C, rng);
  const std::vector<double> w = RandomVector(O * KH * KW * C, rng);
  Tensor y = Conv2d(Tensor::FromData({H, W, C}, x),
                    Tensor::FromData({O, KH * KW * C}, w), Tensor(), geo);
  const int OH = (H + 2 - KH) / 2 + 1, OW = W - KW + 1;
  ASSERT_EQ(y.shape(), (Shape{OH, OW, O}));
  for (int i = 0; i < OH; ++i) {
    for (int j = 0; j < OW; ++j) {
      for (int o = 0; o < O; ++o) {
        double acc = 0.0;
        for (int a = 0; a < KH; ++a) {
          for (int b = 0; b < KW; ++b) {
            const int r = i * 2 + a - 1, c = j + b;
            if (r < 0 || r >= H) continue;
            for (int ch = 0; ch < C; ++ch) {
              acc += w[o * KH * KW * C + (a * KW + b) * C + ch] *
                     x[(r * W + c) * C + ch];
            }
          }
        }
        EXPECT_NEAR(y.data()[(i * OW + j) * O + o], acc, 1e-12);
      }
    }
  }
}

TEST(AutogradTest, StraightThroughPassesGradientUnchanged) {
  Tensor x = Tensor::Parameter({3}, {1.0, 2.0, 3.0});
  Tensor y = StraightThrough(x, Tensor::FromData({3}, {7.0, 8.0, 9.0}));
  EXPECT_EQ(y.data()[1], 8.0);
  Sum(Scale(y, 2.0)).Backward();
  for (double g : x.grad()) EXPECT_EQ(g, 2.0);
}

TEST(AutogradTest, GradientsAccumulateOnLeavesAndDetachCuts) {
  Tensor x = Tensor::Parameter({2}, {1.0, -1.0});
  Sum(Square(x)).Backward();
  Sum(Square(x)).Backward();
  EXPECT_EQ(x.grad()[0], 4.0);
  EXPECT_EQ(x.grad()[1], -4.0);
  x.ZeroGrad();
  Tensor d = x.Detach();
  EXPECT_FALSE(d.requires_grad());
  {
    NoGradGuard guard;
    EXPECT_FALSE(Square(x).requires_grad());
  }
  EXPECT_TRUE(Square(x).requires_grad());
}

TEST(AutogradTest, AntiWrapValues) {
  const double pi = std::numbers::pi;
  Tensor y = AntiWrap(Tensor::FromData({4}, {0.5, 3 * pi, -2 * pi + 0.25, 7.0}));
  EXPECT_NEAR(y.data()[0], 0.5, 1e-15);
  EXPECT_NEAR(y.data()[1], pi, 1e-12);
  EXPECT_NEAR(y.data()[2], 0.25, 1e-12);
  EXPECT_NEAR(y.data()[3], 7.0 - 2 * pi, 1e-12);
}

TEST(AutogradTest, WrappedAtan2NeverReturnsMinusPi) {
  EXPECT_EQ(WrappedAtan2(-0.0, -1.0), std::numbers::pi);
  EXPECT_EQ(WrappedAtan2(-1e-300, -1.0), std::numbers::pi);
  EXPECT_LT(WrappedAtan2(-1e-3, -1.0), 0.0);
}

}  // namespace
}  // namespace apcodec
