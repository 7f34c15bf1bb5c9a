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

#ifndef APCODEC_SPECTRAL_FRONTEND_H_
#define APCODEC_SPECTRAL_FRONTEND_H_

// Waveform <-> (log-amplitude, phase) spectra. Analysis reflect-pads the
// waveform by frame_length / 2 on both sides, applies a periodic Hann window
// of frame_length samples zero-padded to fft_size, and emits
// ceil(length / frame_shift) frames. Synthesis inverts this by weighted
// overlap-add with squared-window normalization.

#include <cstdint>
#include <span>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "apcodec/autograd.h"
#include "apcodec/matrix.h"

namespace apcodec {

struct SignalConfig {
  int sample_rate = 48000;
  int frame_length = 320;
  int frame_shift = 40;
  int fft_size = 1024;
  // Magnitudes are clamped to this value before taking the natural log.
  double amplitude_floor = 1e-5;

  int bins() const { return fft_size / 2 + 1; }
  absl::Status Validate() const;
  bool operator==(const SignalConfig&) const = default;
};

struct SpectralPair {
  Matrix log_amplitude;  // [frames, bins], natural log of magnitude
  Matrix phase;          // [frames, bins], radians in (-pi, pi]

  int64_t frames() const { return log_amplitude.rows; }
  int64_t bins() const { return log_amplitude.cols; }
};

// Number of analysis frames for a waveform of `num_samples` samples.
int64_t FrameCount(int64_t num_samples, const SignalConfig& config);

// Periodic Hann window, w[n] = 0.5 - 0.5 cos(2 pi n / length).
std::vector<double> HannWindow(int length);

absl::StatusOr<SpectralPair> Analyze(std::span<const double> waveform,
                                     const SignalConfig& config);

// Returns frames * frame_shift samples.
absl::StatusOr<std::vector<double>> Synthesize(const SpectralPair& pair,
                                               const SignalConfig& config);

// Real/imaginary spectra [frames, bins] -> waveform [frames * frame_shift].
// Differentiable; Synthesize() is this op applied to exp(A) e^{i phase}.
Tensor InverseStft(const Tensor& real, const Tensor& imag,
                   const SignalConfig& config);

// Magnitude spectrogram of a 1-D waveform without centering:
// 1 + (length - fft_size) / hop frames, periodic Hann window of fft_size,
// magnitude sqrt(re^2 + im^2 + eps). Differentiable.
Tensor StftMagnitude(const Tensor& waveform, int fft_size, int hop,
                     double eps);

// Replicates the last frame until the frame count is a multiple of
// `multiple`. Returns the input unchanged when it already is.
SpectralPair PadFramesToMultiple(const SpectralPair& pair, int64_t multiple);

// Keeps the first `frames` frames.
SpectralPair TrimFrames(const SpectralPair& pair, int64_t frames);

}  // namespace apcodec

#endif  // APCODEC_SPECTRAL_FRONTEND_H_
