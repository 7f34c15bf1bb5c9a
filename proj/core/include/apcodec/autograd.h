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

#ifndef APCODEC_AUTOGRAD_H_
#define APCODEC_AUTOGRAD_H_

// Minimal reverse-mode automatic differentiation over dense row-major
// double-precision tensors. Every op records a backward closure on the
// output node when gradient recording is enabled and at least one input
// requires a gradient; Tensor::Backward() replays them in reverse
// topological order.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace apcodec {

using Shape = std::vector<int64_t>;

int64_t NumElements(const Shape& shape);

// grad_inputs[i] is empty when input i does not require a gradient.
// `output` holds the forward value of the node being differentiated.
using BackwardFn = std::function<void(std::span<const double> grad_output,
                                      std::span<const double> output,
                                      std::span<std::span<double>> grad_inputs)>;

namespace internal {
struct Node;
}  // namespace internal

class Tensor {
 public:
  Tensor() = default;

  static Tensor Zeros(Shape shape);
  static Tensor Full(Shape shape, double value);
  static Tensor FromData(Shape shape, std::vector<double> data);
  static Tensor Scalar(double value);
  // A leaf that accumulates gradients across Backward() calls.
  static Tensor Parameter(Shape shape, std::vector<double> data);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int64_t rank() const;
  // Negative indices count from the back.
  int64_t dim(int64_t axis) const;
  int64_t numel() const;

  std::span<const double> data() const;
  // Writable access to the stored values. Only meaningful on leaves; writing
  // into an intermediate result does not update anything downstream.
  std::span<double> mutable_data();
  double item() const;

  bool requires_grad() const;
  // Leaves only. A leaf that does not require a gradient is treated as a
  // constant by ops recorded afterwards.
  void set_requires_grad(bool value);
  bool is_leaf() const;
  // Empty until a gradient has reached this tensor.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void ZeroGrad();

  // Seeds d(self)/d(self) = 1 and propagates. Requires numel() == 1.
  void Backward() const;

  // Same values, cut from the graph.
  Tensor Detach() const;
  Tensor Clone() const;
  bool SameNode(const Tensor& other) const { return node_ == other.node_; }

 private:
  friend Tensor MakeResult(Shape shape, std::vector<double> value,
                           std::vector<Tensor> inputs, BackwardFn backward);
  explicit Tensor(std::shared_ptr<internal::Node> node)
      : node_(std::move(node)) {}

  std::shared_ptr<internal::Node> node_;
};

// Builds an op output. The backward closure is retained only if recording is
// enabled and some input requires a gradient.
Tensor MakeResult(Shape shape, std::vector<double> value,
                  std::vector<Tensor> inputs, BackwardFn backward);

bool GradEnabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Elementwise binary ops. The smaller operand broadcasts when its shape is a
// trailing suffix of the larger one (scalars always broadcast).
Tensor Add(const Tensor& a, const Tensor& b);
Tensor Sub(const Tensor& a, const Tensor& b);
Tensor Mul(const Tensor& a, const Tensor& b);
Tensor Div(const Tensor& a, const Tensor& b);
// atan2 folded onto (-pi, pi]: a result of exactly -pi (from a -0 or a
// vanishingly small negative y) is returned as +pi.
double WrappedAtan2(double y, double x);

// Two-argument arctangent; -0 inputs are canonicalized so the result lies in
// (-pi, pi].
Tensor Atan2(const Tensor& y, const Tensor& x);

Tensor Scale(const Tensor& x, double factor);
Tensor AddScalar(const Tensor& x, double value);
Tensor Neg(const Tensor& x);
Tensor Exp(const Tensor& x);
Tensor Log(const Tensor& x);
Tensor Sin(const Tensor& x);
Tensor Cos(const Tensor& x);
Tensor Sqrt(const Tensor& x);
Tensor Square(const Tensor& x);
Tensor Abs(const Tensor& x);
// Exact (erf) GELU.
Tensor Gelu(const Tensor& x);
Tensor LeakyRelu(const Tensor& x, double slope);
// |x - 2*pi*round(x / 2*pi)|, gradient sign(x - 2*pi*round(...)).
Tensor AntiWrap(const Tensor& x);

Tensor Sum(const Tensor& x);
Tensor Mean(const Tensor& x);
// [rows x cols] -> [cols]
Tensor SumRows(const Tensor& x);

// x: [..., in], weight: [out, in], bias: [out] or undefined. -> [..., out]
Tensor Linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor Reshape(const Tensor& x, Shape shape);
// 2-D concatenation along the column axis.
Tensor ConcatColumns(const Tensor& a, const Tensor& b);
// Contiguous slice along axis 0.
Tensor SliceRows(const Tensor& x, int64_t start, int64_t count);
// Zero padding along axis 0.
Tensor PadRows(const Tensor& x, int64_t before, int64_t after);
// 2-D forward difference along axis 0 (rows) or 1 (columns).
Tensor Diff(const Tensor& x, int axis);

// Layer normalization over the last axis.
Tensor LayerNorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 double eps);

// x: [T, C], weight: [K, C], bias: [C]; zero "same" padding, odd K.
Tensor DepthwiseConv1d(const Tensor& x, const Tensor& weight,
                       const Tensor& bias);
// x: [T, Cin], weight: [Cout, K * Cin] (tap-major), bias: [Cout];
// stride 1, zero padding `padding` on both ends.
Tensor Conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              int64_t kernel, int64_t padding);

struct Conv2dGeometry {
  int64_t kernel_h = 1;
  int64_t kernel_w = 1;
  int64_t stride_h = 1;
  int64_t stride_w = 1;
  int64_t pad_h = 0;
  int64_t pad_w = 0;
};
// x: [H, W, Cin], weight: [Cout, KH * KW * Cin], bias: [Cout].
Tensor Conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              const Conv2dGeometry& geometry);

// Forward value `value`, gradient passed unchanged to `x`.
Tensor StraightThrough(const Tensor& x, const Tensor& value);

}  // namespace apcodec

#endif  // APCODEC_AUTOGRAD_H_
