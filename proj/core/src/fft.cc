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

#include "apcodec/fft.h"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <utility>
#include <vector>

#include "glog/logging.h"

namespace apcodec {
namespace {

struct PlanPair {
  fftw_plan forward;
  fftw_plan inverse;
};

// The FFTW planner is not thread-safe; execution of an existing plan is.
PlanPair GetPlans(int size) {
  static std::mutex mutex;
  static std::map<int, PlanPair>* plans = new std::map<int, PlanPair>();
  std::lock_guard<std::mutex> lock(mutex);
  auto it = plans->find(size);
  if (it != plans->end()) return it->second;
  std::vector<double> real(size);
  std::vector<fftw_complex> spectrum(size / 2 + 1);
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  PlanPair pair;
  pair.forward =
      fftw_plan_dft_r2c_1d(size, real.data(), spectrum.data(), flags);
  pair.inverse =
      fftw_plan_dft_c2r_1d(size, spectrum.data(), real.data(), flags);
  CHECK(pair.forward != nullptr && pair.inverse != nullptr)
      << "FFTW planning failed for size " << size;
  plans->emplace(size, pair);
  return pair;
}

}  // namespace

RealFft::RealFft(int size) : size_(size) {
  CHECK_GT(size, 0);
  PlanPair plans = GetPlans(size);
  forward_plan_ = plans.forward;
  inverse_plan_ = plans.inverse;
}

void RealFft::Forward(std::span<const double> in,
                      std::span<std::complex<double>> out) const {
  CHECK_EQ(static_cast<int>(in.size()), size_);
  CHECK_EQ(static_cast<int>(out.size()), bins());
  std::vector<double> scratch(in.begin(), in.end());
  fftw_execute_dft_r2c(static_cast<fftw_plan>(forward_plan_), scratch.data(),
                       reinterpret_cast<fftw_complex*>(out.data()));
}

void RealFft::Inverse(std::span<const std::complex<double>> in,
                      std::span<double> out) const {
  CHECK_EQ(static_cast<int>(in.size()), bins());
  CHECK_EQ(static_cast<int>(out.size()), size_);
  // c2r overwrites its input.
  std::vector<std::complex<double>> scratch(in.begin(), in.end());
  fftw_execute_dft_c2r(static_cast<fftw_plan>(inverse_plan_),
                       reinterpret_cast<fftw_complex*>(scratch.data()),
                       out.data());
}

}  // namespace apcodec
