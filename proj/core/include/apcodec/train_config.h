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

#ifndef APCODEC_TRAIN_CONFIG_H_
#define APCODEC_TRAIN_CONFIG_H_

#include <cstdint>

#include "absl/status/status.h"

namespace apcodec {

struct TrainConfig {
  int crop_length = 7960;
  int batch_size = 16;
  double beta1 = 0.8;
  double beta2 = 0.99;
  double initial_lr = 2e-4;
  double lr_decay_per_epoch = 0.999;
  double weight_decay = 0.01;
  // 0 disables gradient clipping.
  double max_grad_norm = 0.0;
  int64_t steps_per_stage = 1000;
  uint64_t seed = 0;

  // Joint stage only; false gives a metric-only first stage.
  bool adversarial_in_joint = true;

  double commitment_weight = 0.25;
  double ema_decay = 0.99;
  int dead_code_window = 20;
  int kmeans_iterations = 10;

  int mel_bins = 80;
  double mel_fmin = 0.0;
  // 0 selects the Nyquist frequency.
  double mel_fmax = 0.0;

  // Encoder/quantizer hashes are re-verified every this many steps of the
  // individual stage.
  int freeze_check_interval = 10;

  absl::Status Validate(int frame_shift) const;
  bool operator==(const TrainConfig&) const = default;
};

}  // namespace apcodec

#endif  // APCODEC_TRAIN_CONFIG_H_
