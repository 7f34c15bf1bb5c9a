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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_set>
#include <utility>

#include "Eigen/Core"
#include "glog/logging.h"

namespace apcodec {
namespace internal {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  bool leaf = true;
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward;
};

}  // namespace internal

namespace {

using internal::Node;
using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using MatrixMap = Eigen::Map<RowMatrix>;

thread_local bool g_grad_enabled = true;

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool IsTrailingSuffix(const Shape& small, const Shape& big) {
  size_t first = 0;
  while (first < small.size() && small[first] == 1) ++first;
  const size_t n = small.size() - first;
  if (n > big.size()) return false;
  for (size_t i = 0; i < n; ++i) {
    if (small[first + i] != big[big.size() - n + i]) return false;
  }
  return true;
}

// Returns the output shape of a broadcasting binary op.
Shape BroadcastShape(const Tensor& a, const Tensor& b) {
  if (a.numel() >= b.numel()) {
    CHECK(b.numel() == 1 || IsTrailingSuffix(b.shape(), a.shape()))
        << "cannot broadcast operand of " << b.numel() << " elements";
    return a.shape();
  }
  CHECK(a.numel() == 1 || IsTrailingSuffix(a.shape(), b.shape()))
      << "cannot broadcast operand of " << a.numel() << " elements";
  return b.shape();
}

template <typename Forward, typename GradA, typename GradB>
Tensor Binary(const Tensor& a, const Tensor& b, Forward forward, GradA grad_a,
              GradB grad_b) {
  Shape shape = BroadcastShape(a, b);
  const int64_t n = NumElements(shape);
  const int64_t na = a.numel();
  const int64_t nb = b.numel();
  std::vector<double> out(n);
  auto av = a.data();
  auto bv = b.data();
  for (int64_t i = 0; i < n; ++i) out[i] = forward(av[i % na], bv[i % nb]);
  return MakeResult(
      std::move(shape), std::move(out), {a, b},
      [a, b, grad_a, grad_b](std::span<const double> g,
                             std::span<const double> y,
                             std::span<std::span<double>> gin) {
        auto av = a.data();
        auto bv = b.data();
        const int64_t na = a.numel();
        const int64_t nb = b.numel();
        const int64_t n = static_cast<int64_t>(g.size());
        if (!gin[0].empty()) {
          for (int64_t i = 0; i < n; ++i) {
            gin[0][i % na] += g[i] * grad_a(av[i % na], bv[i % nb], y[i]);
          }
        }
        if (!gin[1].empty()) {
          for (int64_t i = 0; i < n; ++i) {
            gin[1][i % nb] += g[i] * grad_b(av[i % na], bv[i % nb], y[i]);
          }
        }
      });
}

// `derivative(x, y)` returns dy/dx given input x and output y.
template <typename Forward, typename Derivative>
Tensor Unary(const Tensor& x, Forward forward, Derivative derivative) {
  auto xv = x.data();
  std::vector<double> out(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) out[i] = forward(xv[i]);
  return MakeResult(x.shape(), std::move(out), {x},
                    [x, derivative](std::span<const double> g,
                                    std::span<const double> y,
                                    std::span<std::span<double>> gin) {
                      auto xv = x.data();
                      for (size_t i = 0; i < g.size(); ++i) {
                        gin[0][i] += g[i] * derivative(xv[i], y[i]);
                      }
                    });
}

double WrapResidual(double x) {
  return x - kTwoPi * std::round(x / kTwoPi);
}

}  // namespace

int64_t NumElements(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    CHECK_GE(d, 0);
    n *= d;
  }
  return n;
}

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::Zeros(Shape shape) { return Full(std::move(shape), 0.0); }

Tensor Tensor::Full(Shape shape, double value) {
  const int64_t n = NumElements(shape);
  return FromData(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::FromData(Shape shape, std::vector<double> data) {
  CHECK_EQ(NumElements(shape), static_cast<int64_t>(data.size()));
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  return Tensor(std::move(node));
}

Tensor Tensor::Scalar(double value) { return FromData({1}, {value}); }

Tensor Tensor::Parameter(Shape shape, std::vector<double> data) {
  Tensor t = FromData(std::move(shape), std::move(data));
  t.node_->requires_grad = true;
  return t;
}

const Shape& Tensor::shape() const { return node_->shape; }
int64_t Tensor::rank() const { return static_cast<int64_t>(shape().size()); }

int64_t Tensor::dim(int64_t axis) const {
  const int64_t r = rank();
  if (axis < 0) axis += r;
  CHECK(axis >= 0 && axis < r) << "axis out of range";
  return shape()[axis];
}

int64_t Tensor::numel() const {
  return static_cast<int64_t>(node_->value.size());
}

std::span<const double> Tensor::data() const { return node_->value; }
std::span<double> Tensor::mutable_data() { return node_->value; }

double Tensor::item() const {
  CHECK_EQ(numel(), 1);
  return node_->value[0];
}

bool Tensor::requires_grad() const {
  return node_ != nullptr && node_->requires_grad;
}
void Tensor::set_requires_grad(bool value) {
  CHECK(node_->leaf) << "set_requires_grad on a non-leaf tensor";
  node_->requires_grad = value;
}
bool Tensor::is_leaf() const { return node_->leaf; }
std::span<const double> Tensor::grad() const { return node_->grad; }

std::span<double> Tensor::mutable_grad() {
  if (node_->grad.empty()) node_->grad.assign(node_->value.size(), 0.0);
  return node_->grad;
}

void Tensor::ZeroGrad() {
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void Tensor::Backward() const {
  CHECK_EQ(numel(), 1) << "Backward() needs a scalar root";
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order (inputs first).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && !child->leaf &&
          visited.insert(child).second) {
        stack.emplace_back(child, 0);
      }
      continue;
    }
    order.push_back(node);
    stack.pop_back();
  }

  if (node_->leaf) {
    if (node_->grad.empty()) node_->grad.assign(1, 0.0);
    node_->grad[0] += 1.0;
    return;
  }
  node_->grad.assign(1, 1.0);
  std::vector<std::span<double>> grad_inputs;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->grad.empty()) continue;
    grad_inputs.assign(node->inputs.size(), std::span<double>());
    for (size_t i = 0; i < node->inputs.size(); ++i) {
      Node* in = node->inputs[i].get();
      if (!in->requires_grad) continue;
      if (in->grad.empty()) in->grad.assign(in->value.size(), 0.0);
      grad_inputs[i] = in->grad;
    }
    node->backward(node->grad, node->value, grad_inputs);
    node->grad.clear();
    node->grad.shrink_to_fit();
  }
}

Tensor Tensor::Detach() const {
  return FromData(node_->shape, node_->value);
}

Tensor Tensor::Clone() const { return Detach(); }

Tensor MakeResult(Shape shape, std::vector<double> value,
                  std::vector<Tensor> inputs, BackwardFn backward) {
  CHECK_EQ(NumElements(shape), static_cast<int64_t>(value.size()));
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  bool needs_grad = false;
  if (g_grad_enabled) {
    for (const Tensor& t : inputs) needs_grad = needs_grad || t.requires_grad();
  }
  if (needs_grad) {
    node->requires_grad = true;
    node->leaf = false;
    node->inputs.reserve(inputs.size());
    for (Tensor& t : inputs) node->inputs.push_back(std::move(t.node_));
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

bool GradEnabled() { return g_grad_enabled; }

double WrappedAtan2(double y, double x) {
  const double a = std::atan2(y, x);
  return a <= -std::numbers::pi ? std::numbers::pi : a;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

// ---------------------------------------------------------------------------
// Elementwise

Tensor Add(const Tensor& a, const Tensor& b) {
  return Binary(
      a, b, [](double x, double y) { return x + y; },
      [](double, double, double) { return 1.0; },
      [](double, double, double) { return 1.0; });
}

Tensor Sub(const Tensor& a, const Tensor& b) {
  return Binary(
      a, b, [](double x, double y) { return x - y; },
      [](double, double, double) { return 1.0; },
      [](double, double, double) { return -1.0; });
}

Tensor Mul(const Tensor& a, const Tensor& b) {
  return Binary(
      a, b, [](double x, double y) { return x * y; },
      [](double, double y, double) { return y; },
      [](double x, double, double) { return x; });
}

Tensor Div(const Tensor& a, const Tensor& b) {
  return Binary(
      a, b, [](double x, double y) { return x / y; },
      [](double, double y, double) { return 1.0 / y; },
      [](double x, double y, double) { return -x / (y * y); });
}

Tensor Atan2(const Tensor& y, const Tensor& x) {
  return Binary(
      y, x,
      [](double yy, double xx) { return WrappedAtan2(yy, xx); },
      [](double yy, double xx, double) {
        const double r2 = xx * xx + yy * yy;
        return r2 > 0.0 ? xx / r2 : 0.0;
      },
      [](double yy, double xx, double) {
        const double r2 = xx * xx + yy * yy;
        return r2 > 0.0 ? -yy / r2 : 0.0;
      });
}

Tensor Scale(const Tensor& x, double factor) {
  return Unary(
      x, [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Tensor AddScalar(const Tensor& x, double value) {
  return Unary(
      x, [value](double v) { return v + value; },
      [](double, double) { return 1.0; });
}

Tensor Neg(const Tensor& x) { return Scale(x, -1.0); }

Tensor Exp(const Tensor& x) {
  return Unary(
      x, [](double v) { return std::exp(v); },
      [](double, double y) { return y; });
}

Tensor Log(const Tensor& x) {
  return Unary(
      x, [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; });
}

Tensor Sin(const Tensor& x) {
  return Unary(
      x, [](double v) { return std::sin(v); },
      [](double v, double) { return std::cos(v); });
}

Tensor Cos(const Tensor& x) {
  return Unary(
      x, [](double v) { return std::cos(v); },
      [](double v, double) { return -std::sin(v); });
}

Tensor Sqrt(const Tensor& x) {
  return Unary(
      x, [](double v) { return std::sqrt(v); },
      [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Tensor Square(const Tensor& x) {
  return Unary(
      x, [](double v) { return v * v; },
      [](double v, double) { return 2.0 * v; });
}

Tensor Abs(const Tensor& x) {
  return Unary(
      x, [](double v) { return std::abs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor Gelu(const Tensor& x) {
  return Unary(
      x,
      [](double v) { return 0.5 * v * (1.0 + std::erf(v * M_SQRT1_2)); },
      [](double v, double) {
        const double cdf = 0.5 * (1.0 + std::erf(v * M_SQRT1_2));
        const double pdf = std::exp(-0.5 * v * v) * 0.5 * M_2_SQRTPI * M_SQRT1_2;
        return cdf + v * pdf;
      });
}

Tensor LeakyRelu(const Tensor& x, double slope) {
  return Unary(
      x, [slope](double v) { return v >= 0.0 ? v : slope * v; },
      [slope](double v, double) { return v >= 0.0 ? 1.0 : slope; });
}

Tensor AntiWrap(const Tensor& x) {
  return Unary(
      x, [](double v) { return std::abs(WrapResidual(v)); },
      [](double v, double) {
        const double r = WrapResidual(v);
        return r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
      });
}

// ---------------------------------------------------------------------------
// Reductions

Tensor Sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return MakeResult({1}, {total}, {x},
                    [](std::span<const double> g, std::span<const double>,
                       std::span<std::span<double>> gin) {
                      for (double& v : gin[0]) v += g[0];
                    });
}

Tensor Mean(const Tensor& x) {
  CHECK_GT(x.numel(), 0);
  return Scale(Sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor SumRows(const Tensor& x) {
  CHECK_EQ(x.rank(), 2);
  const int64_t rows = x.dim(0);
  const int64_t cols = x.dim(1);
  std::vector<double> out(cols, 0.0);
  auto xv = x.data();
  for (int64_t r = 0; r < rows; ++r) {
    for (int64_t c = 0; c < cols; ++c) out[c] += xv[r * cols + c];
  }
  return MakeResult({cols}, std::move(out), {x},
                    [rows, cols](std::span<const double> g,
                                 std::span<const double>,
                                 std::span<std::span<double>> gin) {
                      for (int64_t r = 0; r < rows; ++r) {
                        for (int64_t c = 0; c < cols; ++c) {
                          gin[0][r * cols + c] += g[c];
                        }
                      }
                    });
}

// ---------------------------------------------------------------------------
// Dense layers and shape ops

Tensor Linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  CHECK_EQ(weight.rank(), 2);
  const int64_t out_dim = weight.dim(0);
  const int64_t in_dim = weight.dim(1);
  CHECK_EQ(x.dim(-1), in_dim) << "Linear: input width mismatch";
  const int64_t rows = x.numel() / in_dim;
  if (bias.defined()) CHECK_EQ(bias.numel(), out_dim);

  Shape shape = x.shape();
  shape.back() = out_dim;
  std::vector<double> out(rows * out_dim);
  {
    ConstMatrixMap xm(x.data().data(), rows, in_dim);
    ConstMatrixMap wm(weight.data().data(), out_dim, in_dim);
    MatrixMap ym(out.data(), rows, out_dim);
    ym.noalias() = xm * wm.transpose();
    if (bias.defined()) {
      Eigen::Map<const Eigen::RowVectorXd> bv(bias.data().data(), out_dim);
      ym.rowwise() += bv;
    }
  }
  std::vector<Tensor> inputs = {x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return MakeResult(
      std::move(shape), std::move(out), std::move(inputs),
      [x, weight, rows, in_dim, out_dim](std::span<const double> g,
                                         std::span<const double>,
                                         std::span<std::span<double>> gin) {
        ConstMatrixMap gm(g.data(), rows, out_dim);
        if (!gin[0].empty()) {
          ConstMatrixMap wm(weight.data().data(), out_dim, in_dim);
          MatrixMap gx(gin[0].data(), rows, in_dim);
          gx.noalias() += gm * wm;
        }
        if (!gin[1].empty()) {
          ConstMatrixMap xm(x.data().data(), rows, in_dim);
          MatrixMap gw(gin[1].data(), out_dim, in_dim);
          gw.noalias() += gm.transpose() * xm;
        }
        if (gin.size() > 2 && !gin[2].empty()) {
          Eigen::Map<Eigen::RowVectorXd> gb(gin[2].data(), out_dim);
          gb += gm.colwise().sum();
        }
      });
}

Tensor Reshape(const Tensor& x, Shape shape) {
  CHECK_EQ(NumElements(shape), x.numel()) << "Reshape: element count differs";
  std::vector<double> out(x.data().begin(), x.data().end());
  return MakeResult(std::move(shape), std::move(out), {x},
                    [](std::span<const double> g, std::span<const double>,
                       std::span<std::span<double>> gin) {
                      for (size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i];
                    });
}

Tensor ConcatColumns(const Tensor& a, const Tensor& b) {
  CHECK_EQ(a.rank(), 2);
  CHECK_EQ(b.rank(), 2);
  CHECK_EQ(a.dim(0), b.dim(0));
  const int64_t rows = a.dim(0);
  const int64_t ca = a.dim(1);
  const int64_t cb = b.dim(1);
  std::vector<double> out(rows * (ca + cb));
  auto av = a.data();
  auto bv = b.data();
  for (int64_t r = 0; r < rows; ++r) {
    std::copy_n(av.begin() + r * ca, ca, out.begin() + r * (ca + cb));
    std::copy_n(bv.begin() + r * cb, cb, out.begin() + r * (ca + cb) + ca);
  }
  return MakeResult({rows, ca + cb}, std::move(out), {a, b},
                    [rows, ca, cb](std::span<const double> g,
                                   std::span<const double>,
                                   std::span<std::span<double>> gin) {
                      for (int64_t r = 0; r < rows; ++r) {
                        const double* row = g.data() + r * (ca + cb);
                        if (!gin[0].empty()) {
                          for (int64_t c = 0; c < ca; ++c) {
                            gin[0][r * ca + c] += row[c];
                          }
                        }
                        if (!gin[1].empty()) {
                          for (int64_t c = 0; c < cb; ++c) {
                            gin[1][r * cb + c] += row[ca + c];
                          }
                        }
                      }
                    });
}

Tensor SliceRows(const Tensor& x, int64_t start, int64_t count) {
  const int64_t rows = x.dim(0);
  CHECK(start >= 0 && count >= 0 && start + count <= rows)
      << "SliceRows out of range";
  const int64_t inner = rows == 0 ? 0 : x.numel() / rows;
  Shape shape = x.shape();
  shape[0] = count;
  std::vector<double> out(x.data().begin() + start * inner,
                          x.data().begin() + (start + count) * inner);
  return MakeResult(std::move(shape), std::move(out), {x},
                    [start, inner](std::span<const double> g,
                                   std::span<const double>,
                                   std::span<std::span<double>> gin) {
                      for (size_t i = 0; i < g.size(); ++i) {
                        gin[0][start * inner + i] += g[i];
                      }
                    });
}

Tensor PadRows(const Tensor& x, int64_t before, int64_t after) {
  CHECK(before >= 0 && after >= 0);
  const int64_t rows = x.dim(0);
  const int64_t inner = rows == 0 ? 0 : x.numel() / rows;
  Shape shape = x.shape();
  shape[0] = rows + before + after;
  std::vector<double> out(NumElements(shape), 0.0);
  std::copy(x.data().begin(), x.data().end(), out.begin() + before * inner);
  return MakeResult(std::move(shape), std::move(out), {x},
                    [before, inner](std::span<const double> g,
                                    std::span<const double>,
                                    std::span<std::span<double>> gin) {
                      for (size_t i = 0; i < gin[0].size(); ++i) {
                        gin[0][i] += g[before * inner + i];
                      }
                    });
}

Tensor Diff(const Tensor& x, int axis) {
  CHECK_EQ(x.rank(), 2);
  CHECK(axis == 0 || axis == 1);
  const int64_t rows = x.dim(0);
  const int64_t cols = x.dim(1);
  const int64_t out_rows = axis == 0 ? std::max<int64_t>(rows - 1, 0) : rows;
  const int64_t out_cols = axis == 1 ? std::max<int64_t>(cols - 1, 0) : cols;
  const int64_t step = axis == 0 ? cols : 1;
  std::vector<double> out(out_rows * out_cols);
  auto xv = x.data();
  for (int64_t r = 0; r < out_rows; ++r) {
    for (int64_t c = 0; c < out_cols; ++c) {
      const int64_t i = r * cols + c;
      out[r * out_cols + c] = xv[i + step] - xv[i];
    }
  }
  return MakeResult({out_rows, out_cols}, std::move(out), {x},
                    [cols, out_rows, out_cols, step](
                        std::span<const double> g, std::span<const double>,
                        std::span<std::span<double>> gin) {
                      for (int64_t r = 0; r < out_rows; ++r) {
                        for (int64_t c = 0; c < out_cols; ++c) {
                          const int64_t i = r * cols + c;
                          const double gv = g[r * out_cols + c];
                          gin[0][i + step] += gv;
                          gin[0][i] -= gv;
                        }
                      }
                    });
}

// ---------------------------------------------------------------------------
// Normalization

Tensor LayerNorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 double eps) {
  const int64_t width = x.dim(-1);
  CHECK_EQ(gamma.numel(), width);
  CHECK_EQ(beta.numel(), width);
  const int64_t rows = x.numel() / width;
  std::vector<double> out(x.numel());
  std::vector<double> inv_std(rows);
  auto xv = x.data();
  auto gv = gamma.data();
  auto bv = beta.data();
  for (int64_t r = 0; r < rows; ++r) {
    const double* row = xv.data() + r * width;
    double mean = 0.0;
    for (int64_t c = 0; c < width; ++c) mean += row[c];
    mean /= static_cast<double>(width);
    double var = 0.0;
    for (int64_t c = 0; c < width; ++c) var += (row[c] - mean) * (row[c] - mean);
    var /= static_cast<double>(width);
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std[r] = inv;
    for (int64_t c = 0; c < width; ++c) {
      out[r * width + c] = (row[c] - mean) * inv * gv[c] + bv[c];
    }
  }
  return MakeResult(
      x.shape(), std::move(out), {x, gamma, beta},
      [x, gamma, rows, width, inv_std = std::move(inv_std)](
          std::span<const double> g, std::span<const double>,
          std::span<std::span<double>> gin) {
        auto xv = x.data();
        auto gv = gamma.data();
        std::vector<double> xhat(width);
        std::vector<double> dxhat(width);
        const double n = static_cast<double>(width);
        for (int64_t r = 0; r < rows; ++r) {
          const double* row = xv.data() + r * width;
          const double* grow = g.data() + r * width;
          double mean = 0.0;
          for (int64_t c = 0; c < width; ++c) mean += row[c];
          mean /= n;
          double sum_d = 0.0;
          double sum_dx = 0.0;
          for (int64_t c = 0; c < width; ++c) {
            xhat[c] = (row[c] - mean) * inv_std[r];
            dxhat[c] = grow[c] * gv[c];
            sum_d += dxhat[c];
            sum_dx += dxhat[c] * xhat[c];
          }
          if (!gin[0].empty()) {
            for (int64_t c = 0; c < width; ++c) {
              gin[0][r * width + c] +=
                  inv_std[r] * (dxhat[c] - sum_d / n - xhat[c] * sum_dx / n);
            }
          }
          if (!gin[1].empty()) {
            for (int64_t c = 0; c < width; ++c) gin[1][c] += grow[c] * xhat[c];
          }
          if (!gin[2].empty()) {
            for (int64_t c = 0; c < width; ++c) gin[2][c] += grow[c];
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Convolutions

Tensor DepthwiseConv1d(const Tensor& x, const Tensor& weight,
                       const Tensor& bias) {
  CHECK_EQ(x.rank(), 2);
  CHECK_EQ(weight.rank(), 2);
  const int64_t steps = x.dim(0);
  const int64_t channels = x.dim(1);
  const int64_t kernel = weight.dim(0);
  CHECK_EQ(weight.dim(1), channels);
  CHECK_EQ(kernel % 2, 1) << "depthwise kernel must be odd";
  CHECK_EQ(bias.numel(), channels);
  const int64_t pad = kernel / 2;
  std::vector<double> out(steps * channels);
  auto xv = x.data();
  auto wv = weight.data();
  auto bv = bias.data();
  for (int64_t t = 0; t < steps; ++t) {
    double* orow = out.data() + t * channels;
    std::copy(bv.begin(), bv.end(), orow);
    for (int64_t k = 0; k < kernel; ++k) {
      const int64_t src = t + k - pad;
      if (src < 0 || src >= steps) continue;
      const double* xrow = xv.data() + src * channels;
      const double* wrow = wv.data() + k * channels;
      for (int64_t c = 0; c < channels; ++c) orow[c] += wrow[c] * xrow[c];
    }
  }
  return MakeResult(
      x.shape(), std::move(out), {x, weight, bias},
      [x, weight, steps, channels, kernel, pad](
          std::span<const double> g, std::span<const double>,
          std::span<std::span<double>> gin) {
        auto xv = x.data();
        auto wv = weight.data();
        for (int64_t t = 0; t < steps; ++t) {
          const double* grow = g.data() + t * channels;
          for (int64_t k = 0; k < kernel; ++k) {
            const int64_t src = t + k - pad;
            if (src < 0 || src >= steps) continue;
            if (!gin[0].empty()) {
              double* gx = gin[0].data() + src * channels;
              const double* wrow = wv.data() + k * channels;
              for (int64_t c = 0; c < channels; ++c) gx[c] += grow[c] * wrow[c];
            }
            if (!gin[1].empty()) {
              double* gw = gin[1].data() + k * channels;
              const double* xrow = xv.data() + src * channels;
              for (int64_t c = 0; c < channels; ++c) gw[c] += grow[c] * xrow[c];
            }
          }
          if (!gin[2].empty()) {
            for (int64_t c = 0; c < channels; ++c) gin[2][c] += grow[c];
          }
        }
      });
}

Tensor Conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              int64_t kernel, int64_t padding) {
  CHECK_EQ(x.rank(), 2);
  const int64_t steps = x.dim(0);
  const int64_t in_ch = x.dim(1);
  CHECK_EQ(weight.dim(1), kernel * in_ch) << "Conv1d weight layout";
  const int64_t padded = steps + 2 * padding;
  const int64_t out_steps = padded - kernel + 1;
  CHECK_GT(out_steps, 0) << "Conv1d input shorter than kernel";
  const int64_t width = kernel * in_ch;

  // In [T, C] layout an im2col row is a contiguous window of the padded input.
  std::vector<double> padded_x(padded * in_ch, 0.0);
  std::copy(x.data().begin(), x.data().end(),
            padded_x.begin() + padding * in_ch);
  std::vector<double> cols(out_steps * width);
  for (int64_t t = 0; t < out_steps; ++t) {
    std::copy_n(padded_x.begin() + t * in_ch, width, cols.begin() + t * width);
  }
  Tensor col_tensor = MakeResult(
      {out_steps, width}, std::move(cols), {x},
      [steps, in_ch, padding, out_steps, width](
          std::span<const double> g, std::span<const double>,
          std::span<std::span<double>> gin) {
        for (int64_t t = 0; t < out_steps; ++t) {
          for (int64_t j = 0; j < width; ++j) {
            const int64_t flat = t * in_ch + j - padding * in_ch;
            if (flat < 0 || flat >= steps * in_ch) continue;
            gin[0][flat] += g[t * width + j];
          }
        }
      });
  return Linear(col_tensor, weight, bias);
}

Tensor Conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              const Conv2dGeometry& geo) {
  CHECK_EQ(x.rank(), 3);
  const int64_t height = x.dim(0);
  const int64_t width = x.dim(1);
  const int64_t in_ch = x.dim(2);
  const int64_t out_ch = weight.dim(0);
  const int64_t patch = geo.kernel_h * geo.kernel_w * in_ch;
  CHECK_EQ(weight.dim(1), patch) << "Conv2d weight layout";
  const int64_t out_h = (height + 2 * geo.pad_h - geo.kernel_h) / geo.stride_h + 1;
  const int64_t out_w = (width + 2 * geo.pad_w - geo.kernel_w) / geo.stride_w + 1;
  CHECK(out_h > 0 && out_w > 0) << "Conv2d input smaller than kernel";

  std::vector<double> cols(out_h * out_w * patch, 0.0);
  auto xv = x.data();
  for (int64_t oh = 0; oh < out_h; ++oh) {
    for (int64_t ow = 0; ow < out_w; ++ow) {
      double* dst = cols.data() + (oh * out_w + ow) * patch;
      for (int64_t kh = 0; kh < geo.kernel_h; ++kh) {
        const int64_t ih = oh * geo.stride_h + kh - geo.pad_h;
        if (ih < 0 || ih >= height) continue;
        for (int64_t kw = 0; kw < geo.kernel_w; ++kw) {
          const int64_t iw = ow * geo.stride_w + kw - geo.pad_w;
          if (iw < 0 || iw >= width) continue;
          std::copy_n(xv.begin() + (ih * width + iw) * in_ch, in_ch,
                      dst + (kh * geo.kernel_w + kw) * in_ch);
        }
      }
    }
  }
  Tensor col_tensor = MakeResult(
      {out_h * out_w, patch}, std::move(cols), {x},
      [height, width, in_ch, out_h, out_w, patch, geo](
          std::span<const double> g, std::span<const double>,
          std::span<std::span<double>> gin) {
        for (int64_t oh = 0; oh < out_h; ++oh) {
          for (int64_t ow = 0; ow < out_w; ++ow) {
            const double* src = g.data() + (oh * out_w + ow) * patch;
            for (int64_t kh = 0; kh < geo.kernel_h; ++kh) {
              const int64_t ih = oh * geo.stride_h + kh - geo.pad_h;
              if (ih < 0 || ih >= height) continue;
              for (int64_t kw = 0; kw < geo.kernel_w; ++kw) {
                const int64_t iw = ow * geo.stride_w + kw - geo.pad_w;
                if (iw < 0 || iw >= width) continue;
                double* dst = gin[0].data() + (ih * width + iw) * in_ch;
                const double* s = src + (kh * geo.kernel_w + kw) * in_ch;
                for (int64_t c = 0; c < in_ch; ++c) dst[c] += s[c];
              }
            }
          }
        }
      });
  return Reshape(Linear(col_tensor, weight, bias), {out_h, out_w, out_ch});
}

Tensor StraightThrough(const Tensor& x, const Tensor& value) {
  CHECK_EQ(x.numel(), value.numel());
  std::vector<double> out(value.data().begin(), value.data().end());
  return MakeResult(x.shape(), std::move(out), {x},
                    [](std::span<const double> g, std::span<const double>,
                       std::span<std::span<double>> gin) {
                      for (size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i];
                    });
}

}  // namespace apcodec
