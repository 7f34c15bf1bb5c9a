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

#include <algorithm>

#include "absl/strings/str_cat.h"
#include "apcodec/codec_model.h"
#include "apcodec/spectral_frontend.h"
#include "apcodec/status_macros.h"

namespace apcodec {

absl::Status DiscriminatorConfig::Validate() const {
  if (periods.empty() || resolutions.empty()) {
    return absl::InvalidArgumentError(
        "discriminator needs at least one period and one resolution");
  }
  for (int p : periods) {
    if (p <= 0) return absl::InvalidArgumentError("periods must be positive");
  }
  for (const auto& r : resolutions) {
    if (r.fft_size <= 0 || r.hop <= 0) {
      return absl::InvalidArgumentError("STFT resolutions must be positive");
    }
  }
  if (mpd_channels.empty() || mrd_channels <= 0 || mpd_kernel <= 0 ||
      mpd_kernel % 2 == 0 || mpd_stride <= 0) {
    return absl::InvalidArgumentError("invalid discriminator layer settings");
  }
  return absl::OkStatus();
}

Tensor FoldByPeriod(const Tensor& waveform, int period) {
  const int64_t length = waveform.dim(0);
  const int64_t padded = (length + period - 1) / period * period;
  Tensor x = padded == length ? waveform : PadRows(waveform, 0, padded - length);
  return Reshape(x, {padded / period, period, 1});
}

MultiPeriodDiscriminator::MultiPeriodDiscriminator(
    const DiscriminatorConfig& config, Rng& rng)
    : config_(config) {
  for (int period : config.periods) {
    Stack stack;
    stack.period = period;
    const std::string name = absl::StrCat("mpd.p", period);
    int in = 1;
    for (size_t i = 0; i < config.mpd_channels.size(); ++i) {
      const bool last = i + 1 == config.mpd_channels.size();
      Conv2dGeometry geo;
      geo.kernel_h = config.mpd_kernel;
      geo.stride_h = last ? 1 : config.mpd_stride;
      geo.pad_h = config.mpd_kernel / 2;
      stack.convs.emplace_back(params_, absl::StrCat(name, ".conv", i), in,
                               config.mpd_channels[i], geo, rng);
      in = config.mpd_channels[i];
    }
    Conv2dGeometry post;
    post.kernel_h = 3;
    post.pad_h = 1;
    stack.post = Conv2dLayer(params_, name + ".post", in, 1, post, rng);
    stacks_.push_back(std::move(stack));
  }
}

absl::StatusOr<DiscriminatorOutput> MultiPeriodDiscriminator::Forward(
    const Tensor& waveform) const {
  if (waveform.rank() != 1) {
    return absl::InvalidArgumentError("MPD expects a 1-D waveform");
  }
  const int max_period =
      *std::max_element(config_.periods.begin(), config_.periods.end());
  if (waveform.dim(0) < max_period) {
    return absl::InvalidArgumentError(absl::StrCat(
        "waveform of ", waveform.dim(0), " samples is shorter than period ",
        max_period));
  }
  DiscriminatorOutput out;
  for (const Stack& stack : stacks_) {
    Tensor h = FoldByPeriod(waveform, stack.period);
    std::vector<Tensor> features;
    for (const auto& conv : stack.convs) {
      h = LeakyRelu(conv.Forward(h), config_.leaky_slope);
      features.push_back(h);
    }
    h = stack.post.Forward(h);
    features.push_back(h);
    out.scores.push_back(Reshape(h, {h.numel()}));
    out.features.push_back(std::move(features));
  }
  return out;
}

MultiResolutionDiscriminator::MultiResolutionDiscriminator(
    const DiscriminatorConfig& config, Rng& rng)
    : config_(config) {
  const int c = config.mrd_channels;
  for (const StftResolution& res : config.resolutions) {
    Stack stack;
    stack.resolution = res;
    const std::string name = absl::StrCat("mrd.r", res.fft_size, "_", res.hop);
    Conv2dGeometry wide;
    wide.kernel_h = 3;
    wide.kernel_w = 9;
    wide.pad_h = 1;
    wide.pad_w = 4;
    Conv2dGeometry strided = wide;
    strided.stride_w = 2;
    Conv2dGeometry square;
    square.kernel_h = 3;
    square.kernel_w = 3;
    square.pad_h = 1;
    square.pad_w = 1;
    stack.convs.emplace_back(params_, name + ".conv0", 1, c, wide, rng);
    for (int i = 1; i <= 3; ++i) {
      stack.convs.emplace_back(params_, absl::StrCat(name, ".conv", i), c, c,
                               strided, rng);
    }
    stack.convs.emplace_back(params_, name + ".conv4", c, c, square, rng);
    stack.post = Conv2dLayer(params_, name + ".post", c, 1, square, rng);
    stacks_.push_back(std::move(stack));
  }
}

absl::StatusOr<DiscriminatorOutput> MultiResolutionDiscriminator::Forward(
    const Tensor& waveform) const {
  if (waveform.rank() != 1) {
    return absl::InvalidArgumentError("MRD expects a 1-D waveform");
  }
  int largest = 0;
  for (const auto& r : config_.resolutions) largest = std::max(largest, r.fft_size);
  if (waveform.dim(0) < largest) {
    return absl::InvalidArgumentError(absl::StrCat(
        "waveform of ", waveform.dim(0),
        " samples is shorter than the largest analysis window ", largest));
  }
  DiscriminatorOutput out;
  for (const Stack& stack : stacks_) {
    Tensor mag = StftMagnitude(waveform, stack.resolution.fft_size,
                               stack.resolution.hop, config_.magnitude_eps);
    Tensor h = Reshape(mag, {mag.dim(0), mag.dim(1), 1});
    std::vector<Tensor> features;
    for (const auto& conv : stack.convs) {
      h = LeakyRelu(conv.Forward(h), config_.leaky_slope);
      features.push_back(h);
    }
    h = stack.post.Forward(h);
    features.push_back(h);
    out.scores.push_back(Reshape(h, {h.numel()}));
    out.features.push_back(std::move(features));
  }
  return out;
}

namespace {

MultiPeriodDiscriminator MakeMpd(const DiscriminatorConfig& config,
                                 uint64_t seed, uint64_t generation) {
  Rng rng = ComponentRng(seed, Component::kMultiPeriod, generation);
  return MultiPeriodDiscriminator(config, rng);
}

MultiResolutionDiscriminator MakeMrd(const DiscriminatorConfig& config,
                                     uint64_t seed, uint64_t generation) {
  Rng rng = ComponentRng(seed, Component::kMultiResolution, generation);
  return MultiResolutionDiscriminator(config, rng);
}

}  // namespace

Discriminators::Discriminators(const DiscriminatorConfig& config,
                               uint64_t seed, uint64_t generation)
    : mpd_(MakeMpd(config, seed, generation)),
      mrd_(MakeMrd(config, seed, generation)) {}

absl::StatusOr<DiscriminatorOutput> Discriminators::Forward(
    const Tensor& waveform) const {
  ASSIGN_OR_RETURN(DiscriminatorOutput out, mpd_.Forward(waveform));
  ASSIGN_OR_RETURN(DiscriminatorOutput mrd, mrd_.Forward(waveform));
  for (size_t i = 0; i < mrd.scores.size(); ++i) {
    out.scores.push_back(std::move(mrd.scores[i]));
    out.features.push_back(std::move(mrd.features[i]));
  }
  return out;
}

std::vector<Tensor> Discriminators::Tensors() const {
  std::vector<Tensor> out = mpd_.params().tensors();
  for (const Tensor& t : mrd_.params().tensors()) out.push_back(t);
  return out;
}

void Discriminators::ZeroGrad() {
  mpd_.params().ZeroGrad();
  mrd_.params().ZeroGrad();
}

}  // namespace apcodec
