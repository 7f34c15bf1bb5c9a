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

#include "apcodec/nn.h"

#include <cmath>
#include <utility>

#include "glog/logging.h"

namespace apcodec {

Tensor ParameterList::Add(const std::string& name, Shape shape,
                          std::vector<double> values) {
  Tensor t = Tensor::Parameter(std::move(shape), std::move(values));
  entries_.push_back({name, t});
  return t;
}

Tensor ParameterList::AddUniform(const std::string& name, Shape shape,
                                 double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> values(NumElements(shape));
  for (double& v : values) v = dist(rng);
  return Add(name, std::move(shape), std::move(values));
}

Tensor ParameterList::AddConstant(const std::string& name, Shape shape,
                                  double value) {
  std::vector<double> values(NumElements(shape), value);
  return Add(name, std::move(shape), std::move(values));
}

std::vector<Tensor> ParameterList::tensors() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.tensor);
  return out;
}

int64_t ParameterList::NumScalars() const {
  int64_t n = 0;
  for (const auto& e : entries_) n += e.tensor.numel();
  return n;
}

void ParameterList::ZeroGrad() {
  for (auto& e : entries_) e.tensor.ZeroGrad();
}

LinearLayer::LinearLayer(ParameterList& params, const std::string& name,
                         int64_t in, int64_t out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  weight_ = params.AddUniform(name + ".weight", {out, in}, bound, rng);
  bias_ = params.AddUniform(name + ".bias", {out}, bound, rng);
}

Conv1dLayer::Conv1dLayer(ParameterList& params, const std::string& name,
                         int64_t in, int64_t out, int64_t kernel, Rng& rng)
    : kernel_(kernel) {
  CHECK_EQ(kernel % 2, 1) << "Conv1dLayer expects an odd kernel";
  const double bound = 1.0 / std::sqrt(static_cast<double>(in * kernel));
  weight_ = params.AddUniform(name + ".weight", {out, kernel * in}, bound, rng);
  bias_ = params.AddUniform(name + ".bias", {out}, bound, rng);
}

Tensor Conv1dLayer::Forward(const Tensor& x) const {
  return Conv1d(x, weight_, bias_, kernel_, kernel_ / 2);
}

LayerNormLayer::LayerNormLayer(ParameterList& params, const std::string& name,
                               int64_t width) {
  gamma_ = params.AddConstant(name + ".gamma", {width}, 1.0);
  beta_ = params.AddConstant(name + ".beta", {width}, 0.0);
}

ConvNextBlock::ConvNextBlock(ParameterList& params, const std::string& name,
                             int64_t dim, int64_t hidden, int64_t kernel,
                             Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(kernel));
  dw_weight_ = params.AddUniform(name + ".dwconv.weight", {kernel, dim}, bound, rng);
  dw_bias_ = params.AddUniform(name + ".dwconv.bias", {dim}, bound, rng);
  norm_ = LayerNormLayer(params, name + ".norm", dim);
  expand_ = LinearLayer(params, name + ".pwconv1", dim, hidden, rng);
  grn_gamma_ = params.AddConstant(name + ".grn.gamma", {hidden}, 0.0);
  grn_beta_ = params.AddConstant(name + ".grn.beta", {hidden}, 0.0);
  project_ = LinearLayer(params, name + ".pwconv2", hidden, dim, rng);
}

Tensor GlobalResponseNorm(const Tensor& h, const Tensor& gamma,
                          const Tensor& beta) {
  Tensor gx = Sqrt(AddScalar(SumRows(Square(h)), 1e-12));
  Tensor nx = Div(gx, AddScalar(Mean(gx), 1e-6));
  return Add(Add(Mul(Mul(h, nx), gamma), beta), h);
}

Tensor ConvNextBlock::Forward(const Tensor& x) const {
  Tensor h = DepthwiseConv1d(x, dw_weight_, dw_bias_);
  h = norm_.Forward(h);
  h = Gelu(expand_.Forward(h));
  h = GlobalResponseNorm(h, grn_gamma_, grn_beta_);
  h = project_.Forward(h);
  return Add(x, h);
}

Conv2dLayer::Conv2dLayer(ParameterList& params, const std::string& name,
                         int64_t in, int64_t out,
                         const Conv2dGeometry& geometry, Rng& rng)
    : geometry_(geometry) {
  const int64_t fan_in = geometry.kernel_h * geometry.kernel_w * in;
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  weight_ = params.AddUniform(name + ".weight", {out, fan_in}, bound, rng);
  bias_ = params.AddUniform(name + ".bias", {out}, bound, rng);
}

}  // namespace apcodec
