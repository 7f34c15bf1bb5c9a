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

#include "apcodec/optimizer.h"

#include <cmath>
#include <utility>

namespace apcodec {

AdamW::AdamW(std::vector<Tensor> params, const AdamWOptions& options)
    : params_(std::move(params)), options_(options) {
  for (const Tensor& p : params_) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void AdamW::Step(double lr) {
  ++steps_;
  double clip = 1.0;
  if (options_.max_grad_norm > 0.0) {
    double sq = 0.0;
    for (const Tensor& p : params_) {
      for (double g : p.grad()) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (norm > options_.max_grad_norm) clip = options_.max_grad_norm / norm;
  }
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double bias1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double bias2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    auto grad = p.grad();
    auto value = p.mutable_data();
    auto& m = m_[i];
    auto& v = v_[i];
    const double decay = 1.0 - lr * options_.weight_decay;
    for (size_t j = 0; j < value.size(); ++j) {
      const double g = grad.empty() ? 0.0 : grad[j] * clip;
      value[j] *= decay;
      m[j] = b1 * m[j] + (1.0 - b1) * g;
      v[j] = b2 * v[j] + (1.0 - b2) * g * g;
      const double m_hat = m[j] / bias1;
      const double v_hat = v[j] / bias2;
      value[j] -= lr * m_hat / (std::sqrt(v_hat) + options_.eps);
    }
  }
}

void AdamW::ZeroGrad() {
  for (Tensor& p : params_) p.ZeroGrad();
}

AdamW::State AdamW::GetState() const { return State{steps_, m_, v_}; }

absl::Status AdamW::SetState(State state) {
  if (state.first_moment.size() != params_.size() ||
      state.second_moment.size() != params_.size()) {
    return absl::InvalidArgumentError("optimizer state size mismatch");
  }
  for (size_t i = 0; i < params_.size(); ++i) {
    if (static_cast<int64_t>(state.first_moment[i].size()) != params_[i].numel() ||
        static_cast<int64_t>(state.second_moment[i].size()) != params_[i].numel()) {
      return absl::InvalidArgumentError("optimizer moment shape mismatch");
    }
  }
  steps_ = state.steps;
  m_ = std::move(state.first_moment);
  v_ = std::move(state.second_moment);
  return absl::OkStatus();
}

double ExponentialLr(double initial_lr, double decay, int64_t epoch) {
  return initial_lr * std::pow(decay, static_cast<double>(epoch));
}

}  // namespace apcodec
