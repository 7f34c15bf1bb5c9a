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

#ifndef APCODEC_OPTIMIZER_H_
#define APCODEC_OPTIMIZER_H_

#include <cstdint>
#include <vector>

#include "absl/status/status.h"
#include "apcodec/autograd.h"

namespace apcodec {

struct AdamWOptions {
  double beta1 = 0.8;
  double beta2 = 0.99;
  double eps = 1e-8;
  double weight_decay = 0.01;
  // Global L2 gradient-norm clip; 0 disables clipping.
  double max_grad_norm = 0.0;
};

// Adam with decoupled weight decay over a fixed list of parameter tensors.
class AdamW {
 public:
  AdamW(std::vector<Tensor> params, const AdamWOptions& options);

  // Applies one update with learning rate `lr` using the accumulated grads,
  // then leaves the gradients untouched (callers zero them).
  void Step(double lr);
  void ZeroGrad();

  int64_t steps() const { return steps_; }

  struct State {
    int64_t steps = 0;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
  };
  State GetState() const;
  absl::Status SetState(State state);

 private:
  std::vector<Tensor> params_;
  AdamWOptions options_;
  int64_t steps_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

// initial_lr * decay^epoch.
double ExponentialLr(double initial_lr, double decay, int64_t epoch);

}  // namespace apcodec

#endif  // APCODEC_OPTIMIZER_H_
