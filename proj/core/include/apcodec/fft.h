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

#ifndef APCODEC_FFT_H_
#define APCODEC_FFT_H_

#include <complex>
#include <span>

namespace apcodec {

// Real-input FFT of a fixed size backed by FFTW. Plans are created once per
// size and shared; Forward/Inverse are safe to call concurrently.
class RealFft {
 public:
  explicit RealFft(int size);

  int size() const { return size_; }
  int bins() const { return size_ / 2 + 1; }

  // out[k] = sum_n in[n] exp(-2 pi i k n / size), k in [0, bins).
  void Forward(std::span<const double> in,
               std::span<std::complex<double>> out) const;
  // Unnormalized Hermitian inverse: out[n] = sum over the full conjugate-
  // symmetric spectrum implied by `in`. Imaginary parts of the DC and (even
  // size) Nyquist bins are ignored.
  void Inverse(std::span<const std::complex<double>> in,
               std::span<double> out) const;

 private:
  int size_;
  void* forward_plan_;
  void* inverse_plan_;
};

}  // namespace apcodec

#endif  // APCODEC_FFT_H_
