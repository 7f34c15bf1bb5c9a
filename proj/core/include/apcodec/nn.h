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

#ifndef APCODEC_NN_H_
#define APCODEC_NN_H_

// Parameter bookkeeping and the small set of layers the codec and the
// discriminators are built from. Sequences use a [time, channels] layout.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "apcodec/autograd.h"

namespace apcodec {

using Rng = std::mt19937_64;

struct NamedParameter {
  std::string name;
  Tensor tensor;
};

// Ordered registry of trainable tensors belonging to one model component.
class ParameterList {
 public:
  Tensor Add(const std::string& name, Shape shape, std::vector<double> values);
  // Uniform(-bound, bound), drawn in row-major order from `rng`.
  Tensor AddUniform(const std::string& name, Shape shape, double bound,
                    Rng& rng);
  Tensor AddConstant(const std::string& name, Shape shape, double value);

  const std::vector<NamedParameter>& entries() const { return entries_; }
  std::vector<NamedParameter>& mutable_entries() { return entries_; }
  std::vector<Tensor> tensors() const;
  int64_t NumScalars() const;
  void ZeroGrad();

 private:
  std::vector<NamedParameter> entries_;
};

class LinearLayer {
 public:
  LinearLayer() = default;
  LinearLayer(ParameterList& params, const std::string& name, int64_t in,
              int64_t out, Rng& rng);
  Tensor Forward(const Tensor& x) const { return Linear(x, weight_, bias_); }

 private:
  Tensor weight_;
  Tensor bias_;
};

// Stride-1 convolution with symmetric "same" zero padding (odd kernels).
class Conv1dLayer {
 public:
  Conv1dLayer() = default;
  Conv1dLayer(ParameterList& params, const std::string& name, int64_t in,
              int64_t out, int64_t kernel, Rng& rng);
  Tensor Forward(const Tensor& x) const;

 private:
  Tensor weight_;
  Tensor bias_;
  int64_t kernel_ = 1;
};

class LayerNormLayer {
 public:
  LayerNormLayer() = default;
  LayerNormLayer(ParameterList& params, const std::string& name, int64_t width);
  Tensor Forward(const Tensor& x) const {
    return LayerNorm(x, gamma_, beta_, 1e-6);
  }

 private:
  Tensor gamma_;
  Tensor beta_;
};

// ConvNeXt-V2 block: depthwise conv -> LayerNorm -> pointwise expansion ->
// GELU -> global response normalization -> pointwise projection -> residual.
class ConvNextBlock {
 public:
  ConvNextBlock() = default;
  ConvNextBlock(ParameterList& params, const std::string& name, int64_t dim,
                int64_t hidden, int64_t kernel, Rng& rng);
  Tensor Forward(const Tensor& x) const;

 private:
  Tensor dw_weight_;
  Tensor dw_bias_;
  LayerNormLayer norm_;
  LinearLayer expand_;
  Tensor grn_gamma_;
  Tensor grn_beta_;
  LinearLayer project_;
};

// Global response normalization over the time axis of h: [T, C].
Tensor GlobalResponseNorm(const Tensor& h, const Tensor& gamma,
                          const Tensor& beta);

class Conv2dLayer {
 public:
  Conv2dLayer() = default;
  Conv2dLayer(ParameterList& params, const std::string& name, int64_t in,
              int64_t out, const Conv2dGeometry& geometry, Rng& rng);
  Tensor Forward(const Tensor& x) const {
    return Conv2d(x, weight_, bias_, geometry_);
  }

 private:
  Tensor weight_;
  Tensor bias_;
  Conv2dGeometry geometry_;
};

}  // namespace apcodec

#endif  // APCODEC_NN_H_
