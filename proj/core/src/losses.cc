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

#include "apcodec/losses.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "absl/strings/str_cat.h"
#include "apcodec/codec_model.h"

namespace apcodec {
namespace {

constexpr double kMelLogFloor = 1e-5;

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double MelToHz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Tensor AntiWrapMean(const Tensor& pred, const Tensor& target) {
  return Mean(AntiWrap(Sub(pred, target)));
}

}  // namespace

absl::Status LossWeights::Validate() const {
  for (double w : {amplitude, phase, mel, complex, quantization, adversarial,
                   feature_matching}) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      return absl::InvalidArgumentError("loss weights must be finite and >= 0");
    }
  }
  return absl::OkStatus();
}

void LossReport::Add(std::string name, double weight, double value) {
  terms.push_back({std::move(name), weight, value});
  total += weight * value;
}

const LossTerm* LossReport::Find(const std::string& name) const {
  for (const auto& t : terms) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

double AntiWrap(double x) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  return std::abs(x - kTwoPi * std::round(x / kTwoPi));
}

MelFilterbank::MelFilterbank(int sample_rate, int fft_size, int num_mels,
                             double fmin_hz, double fmax_hz) {
  const int bins = fft_size / 2 + 1;
  const double mel_lo = HzToMel(fmin_hz);
  const double mel_hi = HzToMel(fmax_hz);
  std::vector<double> edges(num_mels + 2);
  for (int i = 0; i < num_mels + 2; ++i) {
    edges[i] = MelToHz(mel_lo + (mel_hi - mel_lo) * i / (num_mels + 1));
  }
  std::vector<double> w(static_cast<size_t>(num_mels) * bins, 0.0);
  for (int m = 0; m < num_mels; ++m) {
    const double lo = edges[m];
    const double center = edges[m + 1];
    const double hi = edges[m + 2];
    for (int k = 0; k < bins; ++k) {
      const double hz = static_cast<double>(k) * sample_rate / fft_size;
      double v = 0.0;
      if (hz > lo && hz <= center) {
        v = (hz - lo) / (center - lo);
      } else if (hz > center && hz < hi) {
        v = (hi - hz) / (hi - center);
      }
      w[static_cast<size_t>(m) * bins + k] = v;
    }
  }
  weight_ = Tensor::FromData({num_mels, bins}, std::move(w));
}

SpectralLossTensors SpectralLossTerms(const Tensor& pred_log_amplitude,
                                      const Tensor& pred_phase,
                                      const Tensor& target_log_amplitude,
                                      const Tensor& target_phase,
                                      const MelFilterbank& mel) {
  const Tensor ta = target_log_amplitude.Detach();
  const Tensor tp = target_phase.Detach();
  SpectralLossTensors out;
  out.amplitude = Mean(Square(Sub(pred_log_amplitude, ta)));

  Tensor phase = AntiWrapMean(pred_phase, tp);
  if (pred_phase.dim(1) > 1) {
    phase = Add(phase, AntiWrapMean(Diff(pred_phase, 1), Diff(tp, 1)));
  }
  if (pred_phase.dim(0) > 1) {
    phase = Add(phase, AntiWrapMean(Diff(pred_phase, 0), Diff(tp, 0)));
  }
  out.phase = phase;

  const Tensor pred_mag = Exp(pred_log_amplitude);
  const Tensor target_mag = Exp(ta);
  const Tensor undefined;
  Tensor pred_mel = Log(AddScalar(Linear(pred_mag, mel.weight(), undefined),
                                  kMelLogFloor));
  Tensor target_mel = Log(AddScalar(Linear(target_mag, mel.weight(), undefined),
                                    kMelLogFloor));
  out.mel = Mean(Abs(Sub(pred_mel, target_mel)));

  Tensor pr = Mul(pred_mag, Cos(pred_phase));
  Tensor pi = Mul(pred_mag, Sin(pred_phase));
  Tensor tr = Mul(target_mag, Cos(tp));
  Tensor ti = Mul(target_mag, Sin(tp));
  out.complex =
      Add(Mean(Square(Sub(pr, tr))), Mean(Square(Sub(pi, ti))));
  return out;
}

absl::StatusOr<SpectralLossValues> SpectralLosses(const SpectralPair& pred,
                                                  const SpectralPair& target,
                                                  const MelFilterbank& mel) {
  if (pred.log_amplitude.rows != target.log_amplitude.rows ||
      pred.log_amplitude.cols != target.log_amplitude.cols ||
      pred.phase.rows != target.phase.rows ||
      pred.phase.cols != target.phase.cols ||
      pred.log_amplitude.rows != pred.phase.rows ||
      pred.log_amplitude.cols != pred.phase.cols) {
    return absl::InvalidArgumentError("spectral pair shapes differ");
  }
  if (pred.frames() == 0 || pred.bins() == 0) {
    return absl::InvalidArgumentError("empty spectral pair");
  }
  if (mel.weight().dim(1) != pred.bins()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "mel filterbank expects ", mel.weight().dim(1), " bins, got ",
        pred.bins()));
  }
  NoGradGuard no_grad;
  SpectralLossTensors t = SpectralLossTerms(
      MatrixToTensor(pred.log_amplitude), MatrixToTensor(pred.phase),
      MatrixToTensor(target.log_amplitude), MatrixToTensor(target.phase), mel);
  return SpectralLossValues{t.amplitude.item(), t.phase.item(), t.mel.item(),
                            t.complex.item()};
}

absl::StatusOr<Tensor> QuantizationLoss(
    const std::vector<Tensor>& stage_inputs,
    const std::vector<Tensor>& stage_outputs) {
  if (stage_inputs.size() != stage_outputs.size()) {
    return absl::InvalidArgumentError(absl::StrCat(
        stage_inputs.size(), " stage inputs vs ", stage_outputs.size(),
        " stage outputs"));
  }
  if (stage_inputs.empty()) {
    return absl::InvalidArgumentError("no quantizer stages");
  }
  Tensor total;
  for (size_t i = 0; i < stage_inputs.size(); ++i) {
    if (stage_inputs[i].shape() != stage_outputs[i].shape()) {
      return absl::InvalidArgumentError(
          absl::StrCat("stage ", i, " input/output shapes differ"));
    }
    Tensor mse = Mean(Square(Sub(stage_inputs[i], stage_outputs[i].Detach())));
    total = total.defined() ? Add(total, mse) : mse;
  }
  return total;
}

absl::StatusOr<AdversarialLosses> AdversarialTerms(
    const DiscriminatorOutput& real, const DiscriminatorOutput& fake) {
  if (real.scores.size() != fake.scores.size() ||
      real.features.size() != fake.features.size() ||
      real.scores.size() != real.features.size() || real.scores.empty()) {
    return absl::InvalidArgumentError(
        "real and fake discriminator outputs have different structure");
  }
  const double count = static_cast<double>(real.scores.size());
  Tensor gen;
  Tensor disc;
  Tensor fm;
  int64_t maps = 0;
  auto accumulate = [](Tensor& acc, const Tensor& v) {
    acc = acc.defined() ? Add(acc, v) : v;
  };
  for (size_t d = 0; d < real.scores.size(); ++d) {
    if (real.scores[d].shape() != fake.scores[d].shape() ||
        real.features[d].size() != fake.features[d].size()) {
      return absl::InvalidArgumentError(absl::StrCat(
          "sub-discriminator ", d, " differs between real and fake"));
    }
    accumulate(gen, Mean(Square(AddScalar(fake.scores[d], -1.0))));
    accumulate(disc, Add(Mean(Square(AddScalar(real.scores[d], -1.0))),
                         Mean(Square(fake.scores[d]))));
    for (size_t l = 0; l < real.features[d].size(); ++l) {
      if (real.features[d][l].shape() != fake.features[d][l].shape()) {
        return absl::InvalidArgumentError(absl::StrCat(
            "feature map ", l, " of sub-discriminator ", d, " differs"));
      }
      accumulate(fm, Mean(Abs(Sub(real.features[d][l], fake.features[d][l]))));
      ++maps;
    }
  }
  AdversarialLosses out;
  out.generator = Scale(gen, 1.0 / count);
  out.discriminator = Scale(disc, 1.0 / count);
  out.feature_matching =
      maps > 0 ? Scale(fm, 1.0 / static_cast<double>(maps)) : Tensor::Scalar(0.0);
  return out;
}

}  // namespace apcodec
