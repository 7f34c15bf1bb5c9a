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

#include "apcodec/spectral_frontend.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "absl/strings/str_cat.h"
#include "apcodec/fft.h"
#include "glog/logging.h"

namespace apcodec {
namespace {

using Complex = std::complex<double>;

// Squared-window overlap-add envelope in padded coordinates.
std::vector<double> WindowEnvelope(int64_t frames, const SignalConfig& cfg,
                                   const std::vector<double>& window) {
  const int64_t length = (frames - 1) * cfg.frame_shift + cfg.frame_length;
  std::vector<double> env(std::max<int64_t>(length, 0), 0.0);
  for (int64_t f = 0; f < frames; ++f) {
    for (int n = 0; n < cfg.frame_length; ++n) {
      env[f * cfg.frame_shift + n] += window[n] * window[n];
    }
  }
  for (double& e : env) {
    if (e < 1e-12) e = 1.0;
  }
  return env;
}

std::vector<double> OverlapAdd(std::span<const double> real,
                               std::span<const double> imag, int64_t frames,
                               const SignalConfig& cfg) {
  const int bins = cfg.bins();
  const RealFft fft(cfg.fft_size);
  const std::vector<double> window = HannWindow(cfg.frame_length);
  const std::vector<double> env = WindowEnvelope(frames, cfg, window);
  std::vector<double> acc(env.size(), 0.0);
  std::vector<Complex> spectrum(bins);
  std::vector<double> frame(cfg.fft_size);
  const double norm = 1.0 / cfg.fft_size;
  for (int64_t f = 0; f < frames; ++f) {
    for (int k = 0; k < bins; ++k) {
      spectrum[k] = Complex(real[f * bins + k], imag[f * bins + k]);
    }
    fft.Inverse(spectrum, frame);
    double* dst = acc.data() + f * cfg.frame_shift;
    for (int n = 0; n < cfg.frame_length; ++n) {
      dst[n] += frame[n] * norm * window[n];
    }
  }
  const int64_t out_len = frames * cfg.frame_shift;
  const int64_t offset = cfg.frame_length / 2;
  std::vector<double> out(out_len);
  for (int64_t m = 0; m < out_len; ++m) {
    out[m] = acc[m + offset] / env[m + offset];
  }
  return out;
}

}  // namespace

absl::Status SignalConfig::Validate() const {
  if (sample_rate <= 0 || frame_length <= 0 || frame_shift <= 0 ||
      fft_size <= 0) {
    return absl::InvalidArgumentError(
        "signal config values must be strictly positive");
  }
  if (frame_length % frame_shift != 0) {
    return absl::InvalidArgumentError(absl::StrCat(
        "frame_shift ", frame_shift, " must divide frame_length ",
        frame_length));
  }
  if (frame_length < 2 * frame_shift) {
    return absl::InvalidArgumentError(
        "frame_length must be at least twice frame_shift for overlap-add");
  }
  if (frame_length % 2 != 0) {
    return absl::InvalidArgumentError("frame_length must be even");
  }
  if (fft_size < frame_length) {
    return absl::InvalidArgumentError(absl::StrCat(
        "fft_size ", fft_size, " is smaller than frame_length ",
        frame_length));
  }
  if (!(amplitude_floor > 0.0)) {
    return absl::InvalidArgumentError("amplitude_floor must be positive");
  }
  return absl::OkStatus();
}

int64_t FrameCount(int64_t num_samples, const SignalConfig& config) {
  return (num_samples + config.frame_shift - 1) / config.frame_shift;
}

std::vector<double> HannWindow(int length) {
  std::vector<double> w(length);
  for (int n = 0; n < length; ++n) {
    w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / length);
  }
  return w;
}

absl::StatusOr<SpectralPair> Analyze(std::span<const double> waveform,
                                     const SignalConfig& config) {
  if (absl::Status s = config.Validate(); !s.ok()) return s;
  if (waveform.empty()) {
    return absl::InvalidArgumentError("cannot analyze an empty waveform");
  }
  const int64_t length = static_cast<int64_t>(waveform.size());
  if (length < config.frame_length) {
    return absl::InvalidArgumentError(
        absl::StrCat("waveform of ", length, " samples is shorter than one ",
                     config.frame_length, "-sample frame"));
  }
  const int64_t pad = config.frame_length / 2;
  std::vector<double> padded(length + 2 * pad);
  for (int64_t i = 0; i < pad; ++i) {
    padded[i] = waveform[pad - i];
    padded[pad + length + i] = waveform[length - 2 - i];
  }
  std::copy(waveform.begin(), waveform.end(), padded.begin() + pad);

  const int64_t frames = FrameCount(length, config);
  const int bins = config.bins();
  const RealFft fft(config.fft_size);
  const std::vector<double> window = HannWindow(config.frame_length);
  const double log_floor = std::log(config.amplitude_floor);

  SpectralPair pair{Matrix(frames, bins), Matrix(frames, bins)};
  std::vector<double> frame(config.fft_size, 0.0);
  std::vector<Complex> spectrum(bins);
  for (int64_t f = 0; f < frames; ++f) {
    const double* src = padded.data() + f * config.frame_shift;
    for (int n = 0; n < config.frame_length; ++n) frame[n] = src[n] * window[n];
    fft.Forward(frame, spectrum);
    for (int k = 0; k < bins; ++k) {
      const double mag = std::abs(spectrum[k]);
      pair.log_amplitude(f, k) =
          mag > config.amplitude_floor ? std::log(mag) : log_floor;
      pair.phase(f, k) =
          WrappedAtan2(spectrum[k].imag(), spectrum[k].real());
    }
  }
  return pair;
}

absl::StatusOr<std::vector<double>> Synthesize(const SpectralPair& pair,
                                               const SignalConfig& config) {
  if (absl::Status s = config.Validate(); !s.ok()) return s;
  if (pair.log_amplitude.cols != config.bins() ||
      pair.phase.cols != config.bins() ||
      pair.log_amplitude.rows != pair.phase.rows) {
    return absl::InvalidArgumentError(absl::StrCat(
        "spectral pair of shape ", pair.log_amplitude.rows, "x",
        pair.log_amplitude.cols, " / ", pair.phase.rows, "x", pair.phase.cols,
        " does not match ", config.bins(), " bins"));
  }
  const int64_t frames = pair.frames();
  if (frames == 0) return std::vector<double>();
  std::vector<double> real(pair.log_amplitude.values.size());
  std::vector<double> imag(real.size());
  for (size_t i = 0; i < real.size(); ++i) {
    const double mag = std::exp(pair.log_amplitude.values[i]);
    real[i] = mag * std::cos(pair.phase.values[i]);
    imag[i] = mag * std::sin(pair.phase.values[i]);
  }
  return OverlapAdd(real, imag, frames, config);
}

Tensor InverseStft(const Tensor& real, const Tensor& imag,
                   const SignalConfig& config) {
  CHECK_EQ(real.rank(), 2);
  CHECK(real.shape() == imag.shape());
  CHECK_EQ(real.dim(1), config.bins());
  const int64_t frames = real.dim(0);
  CHECK_GT(frames, 0);
  std::vector<double> out = OverlapAdd(real.data(), imag.data(), frames, config);
  const int64_t out_len = static_cast<int64_t>(out.size());
  return MakeResult(
      {out_len}, std::move(out), {real, imag},
      [frames, config](std::span<const double> g, std::span<const double>,
                       std::span<std::span<double>> gin) {
        const int bins = config.bins();
        const int n_fft = config.fft_size;
        const RealFft fft(n_fft);
        const std::vector<double> window = HannWindow(config.frame_length);
        const std::vector<double> env = WindowEnvelope(frames, config, window);
        const int64_t offset = config.frame_length / 2;
        const int64_t out_len = static_cast<int64_t>(g.size());
        std::vector<double> frame_grad(n_fft, 0.0);
        std::vector<Complex> spectrum(bins);
        const bool even = n_fft % 2 == 0;
        for (int64_t f = 0; f < frames; ++f) {
          for (int n = 0; n < config.frame_length; ++n) {
            const int64_t p = f * config.frame_shift + n;
            const int64_t m = p - offset;
            frame_grad[n] =
                (m >= 0 && m < out_len) ? g[m] * window[n] / env[p] : 0.0;
          }
          fft.Forward(frame_grad, spectrum);
          for (int k = 0; k < bins; ++k) {
            const bool edge = k == 0 || (even && k == n_fft / 2);
            const double c = (edge ? 1.0 : 2.0) / n_fft;
            if (!gin[0].empty()) gin[0][f * bins + k] += c * spectrum[k].real();
            if (!gin[1].empty() && !edge) {
              gin[1][f * bins + k] += c * spectrum[k].imag();
            }
          }
        }
      });
}

Tensor StftMagnitude(const Tensor& waveform, int fft_size, int hop,
                     double eps) {
  CHECK_EQ(waveform.rank(), 1);
  const int64_t length = waveform.dim(0);
  CHECK_GE(length, fft_size) << "waveform shorter than analysis window";
  const int64_t frames = 1 + (length - fft_size) / hop;
  const int bins = fft_size / 2 + 1;
  const RealFft fft(fft_size);
  const std::vector<double> window = HannWindow(fft_size);
  std::vector<double> out(frames * bins);
  // Complex spectra are kept for the backward pass.
  std::vector<Complex> spectra(frames * bins);
  std::vector<double> frame(fft_size);
  auto xv = waveform.data();
  for (int64_t f = 0; f < frames; ++f) {
    for (int n = 0; n < fft_size; ++n) frame[n] = xv[f * hop + n] * window[n];
    std::span<Complex> dst(spectra.data() + f * bins, bins);
    fft.Forward(frame, dst);
    for (int k = 0; k < bins; ++k) {
      out[f * bins + k] = std::sqrt(std::norm(dst[k]) + eps);
    }
  }
  return MakeResult(
      {frames, bins}, std::move(out), {waveform},
      [frames, bins, fft_size, hop, spectra = std::move(spectra)](
          std::span<const double> g, std::span<const double> y,
          std::span<std::span<double>> gin) {
        const RealFft fft(fft_size);
        const std::vector<double> window = HannWindow(fft_size);
        const bool even = fft_size % 2 == 0;
        std::vector<Complex> z(bins);
        std::vector<double> frame_grad(fft_size);
        for (int64_t f = 0; f < frames; ++f) {
          for (int k = 0; k < bins; ++k) {
            const int64_t i = f * bins + k;
            const Complex d = spectra[i] * (g[i] / y[i]);
            const bool edge = k == 0 || (even && k == fft_size / 2);
            z[k] = edge ? Complex(d.real(), 0.0) : 0.5 * d;
          }
          fft.Inverse(z, frame_grad);
          for (int n = 0; n < fft_size; ++n) {
            gin[0][f * hop + n] += frame_grad[n] * window[n];
          }
        }
      });
}

SpectralPair PadFramesToMultiple(const SpectralPair& pair, int64_t multiple) {
  CHECK_GT(multiple, 0);
  const int64_t frames = pair.frames();
  const int64_t target = (frames + multiple - 1) / multiple * multiple;
  if (target == frames) return pair;
  CHECK_GT(frames, 0);
  const int64_t bins = pair.bins();
  SpectralPair out{Matrix(target, bins), Matrix(target, bins)};
  for (int64_t f = 0; f < target; ++f) {
    const int64_t src = std::min(f, frames - 1);
    std::copy_n(pair.log_amplitude.row(src).begin(), bins,
                out.log_amplitude.row(f).begin());
    std::copy_n(pair.phase.row(src).begin(), bins, out.phase.row(f).begin());
  }
  return out;
}

SpectralPair TrimFrames(const SpectralPair& pair, int64_t frames) {
  CHECK_LE(frames, pair.frames());
  const int64_t bins = pair.bins();
  SpectralPair out{Matrix(frames, bins), Matrix(frames, bins)};
  std::copy_n(pair.log_amplitude.values.begin(), frames * bins,
              out.log_amplitude.values.begin());
  std::copy_n(pair.phase.values.begin(), frames * bins,
              out.phase.values.begin());
  return out;
}

}  // namespace apcodec
