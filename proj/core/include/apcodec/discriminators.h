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

#ifndef APCODEC_DISCRIMINATORS_H_
#define APCODEC_DISCRIMINATORS_H_

#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "apcodec/autograd.h"
#include "apcodec/nn.h"

namespace apcodec {

struct StftResolution {
  int fft_size = 1024;
  int hop = 256;
  bool operator==(const StftResolution&) const = default;
};

struct DiscriminatorConfig {
  std::vector<int> periods = {2, 3, 5, 7, 11};
  // Output channels of the strided (kernel x 1) stack; the last entry uses
  // stride 1, the others `mpd_stride`.
  std::vector<int> mpd_channels = {32, 128, 512, 1024, 1024};
  int mpd_kernel = 5;
  int mpd_stride = 3;
  std::vector<StftResolution> resolutions = {{512, 128}, {1024, 256}, {2048, 512}};
  int mrd_channels = 32;
  double leaky_slope = 0.1;
  double magnitude_eps = 1e-9;

  absl::Status Validate() const;
  bool operator==(const DiscriminatorConfig&) const = default;
};

// One entry per sub-discriminator: its flattened score map and the
// activations of every layer (score map included, as the last feature).
struct DiscriminatorOutput {
  std::vector<Tensor> scores;
  std::vector<std::vector<Tensor>> features;
};

// Zero-pads a 1-D waveform to a multiple of `period` and folds it into a
// [length / period, period, 1] map.
Tensor FoldByPeriod(const Tensor& waveform, int period);

class MultiPeriodDiscriminator {
 public:
  MultiPeriodDiscriminator(const DiscriminatorConfig& config, Rng& rng);

  absl::StatusOr<DiscriminatorOutput> Forward(const Tensor& waveform) const;

  ParameterList& params() { return params_; }
  const ParameterList& params() const { return params_; }

 private:
  struct Stack {
    int period;
    std::vector<Conv2dLayer> convs;
    Conv2dLayer post;
  };
  DiscriminatorConfig config_;
  ParameterList params_;
  std::vector<Stack> stacks_;
};

class MultiResolutionDiscriminator {
 public:
  MultiResolutionDiscriminator(const DiscriminatorConfig& config, Rng& rng);

  absl::StatusOr<DiscriminatorOutput> Forward(const Tensor& waveform) const;

  ParameterList& params() { return params_; }
  const ParameterList& params() const { return params_; }

 private:
  struct Stack {
    StftResolution resolution;
    std::vector<Conv2dLayer> convs;
    Conv2dLayer post;
  };
  DiscriminatorConfig config_;
  ParameterList params_;
  std::vector<Stack> stacks_;
};

// MPD followed by MRD; outputs are concatenated in that order.
class Discriminators {
 public:
  Discriminators(const DiscriminatorConfig& config, uint64_t seed,
                 uint64_t generation);

  absl::StatusOr<DiscriminatorOutput> Forward(const Tensor& waveform) const;

  MultiPeriodDiscriminator& mpd() { return mpd_; }
  const MultiPeriodDiscriminator& mpd() const { return mpd_; }
  MultiResolutionDiscriminator& mrd() { return mrd_; }
  const MultiResolutionDiscriminator& mrd() const { return mrd_; }
  std::vector<Tensor> Tensors() const;
  void ZeroGrad();

 private:
  MultiPeriodDiscriminator mpd_;
  MultiResolutionDiscriminator mrd_;
};

}  // namespace apcodec

#endif  // APCODEC_DISCRIMINATORS_H_
