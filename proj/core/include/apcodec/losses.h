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

#ifndef APCODEC_LOSSES_H_
#define APCODEC_LOSSES_H_

#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "apcodec/autograd.h"
#include "apcodec/discriminators.h"
#include "apcodec/spectral_frontend.h"

namespace apcodec {

struct LossWeights {
  double amplitude = 4.5;
  double phase = 10.0;
  double mel = 4.5;
  double complex = 4.5;
  double quantization = 1.0;
  double adversarial = 1.0;
  double feature_matching = 2.0;

  absl::Status Validate() const;
  bool operator==(const LossWeights&) const = default;
};

struct LossTerm {
  std::string name;
  double weight = 0.0;
  double value = 0.0;
};

// One generator update's objective, term by term.
struct LossReport {
  std::vector<LossTerm> terms;
  double total = 0.0;  // sum of weight * value

  void Add(std::string name, double weight, double value);
  const LossTerm* Find(const std::string& name) const;
};

// |x - 2 pi round(x / 2 pi)| with round-half-away-from-zero; range [0, pi].
double AntiWrap(double x);

// Triangular mel filters on the HTK mel scale, unit peak, as a constant
// [num_mels, bins] weight.
class MelFilterbank {
 public:
  MelFilterbank(int sample_rate, int fft_size, int num_mels, double fmin_hz,
                double fmax_hz);
  const Tensor& weight() const { return weight_; }
  int num_mels() const { return static_cast<int>(weight_.dim(0)); }

 private:
  Tensor weight_;
};

struct SpectralLossTensors {
  Tensor amplitude;  // MSE of log amplitudes
  Tensor phase;      // IP + GD + IAF anti-wrapping errors
  Tensor mel;        // L1 of log mel magnitudes
  Tensor complex;    // mean |X_pred - X_target|^2
};

// Inputs are [frames, bins] tensors; targets are treated as constants.
SpectralLossTensors SpectralLossTerms(const Tensor& pred_log_amplitude,
                                      const Tensor& pred_phase,
                                      const Tensor& target_log_amplitude,
                                      const Tensor& target_phase,
                                      const MelFilterbank& mel);

struct SpectralLossValues {
  double amplitude = 0.0;
  double phase = 0.0;
  double mel = 0.0;
  double complex = 0.0;
};

absl::StatusOr<SpectralLossValues> SpectralLosses(const SpectralPair& pred,
                                                  const SpectralPair& target,
                                                  const MelFilterbank& mel);

// Sum over stages of MSE(input, stop_gradient(output)).
absl::StatusOr<Tensor> QuantizationLoss(const std::vector<Tensor>& stage_inputs,
                                        const std::vector<Tensor>& stage_outputs);

struct AdversarialLosses {
  Tensor generator;         // mean_d mean (1 - D(fake))^2
  Tensor discriminator;     // mean_d [mean (1 - D(real))^2 + mean D(fake)^2]
  Tensor feature_matching;  // mean over feature maps of mean |f_real - f_fake|
};

absl::StatusOr<AdversarialLosses> AdversarialTerms(
    const DiscriminatorOutput& real, const DiscriminatorOutput& fake);

}  // namespace apcodec

#endif  // APCODEC_LOSSES_H_
