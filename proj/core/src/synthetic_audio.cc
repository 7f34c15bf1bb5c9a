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

#include "apcodec/synthetic_audio.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>

#include "absl/strings/str_format.h"
#include "apcodec/file_util.h"
#include "apcodec/status_macros.h"
#include "apcodec/wav_io.h"

namespace apcodec {

std::vector<double> SpeechLikeClip(int64_t num_samples, int sample_rate,
                                   Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double two_pi = 2.0 * std::numbers::pi;
  const double nyquist = sample_rate / 2.0;
  const double f0_base = 90.0 + 130.0 * u(rng);
  const double f0_drift = 0.15 * (u(rng) - 0.5);
  const double vibrato_hz = 4.0 + 2.0 * u(rng);
  const double syllable_hz = 3.0 + 2.0 * u(rng);
  const double formants[3] = {500.0 + 400.0 * u(rng), 1200.0 + 900.0 * u(rng),
                              2400.0 + 900.0 * u(rng)};
  const double formant_rate = 0.5 + u(rng);
  const double duration = static_cast<double>(num_samples) / sample_rate;
  const double burst_center = duration * (0.2 + 0.6 * u(rng));

  std::vector<double> out(num_samples, 0.0);
  double phase = 0.0;
  for (int64_t n = 0; n < num_samples; ++n) {
    const double t = static_cast<double>(n) / sample_rate;
    const double f0 = f0_base * (1.0 + f0_drift * t / std::max(duration, 1e-9)) *
                      (1.0 + 0.02 * std::sin(two_pi * vibrato_hz * t));
    phase += two_pi * f0 / sample_rate;
    double v = 0.0;
    for (int k = 1; k * f0 < nyquist * 0.95 && k <= 60; ++k) {
      const double f = k * f0;
      double gain = 0.0;
      for (int i = 0; i < 3; ++i) {
        const double center =
            formants[i] * (1.0 + 0.1 * std::sin(two_pi * formant_rate * t + i));
        const double width = 80.0 + 60.0 * i;
        gain += std::exp(-0.5 * std::pow((f - center) / width, 2.0)) / (i + 1);
      }
      v += (0.05 + gain) / k * std::sin(k * phase);
    }
    const double envelope =
        0.55 + 0.45 * std::sin(two_pi * syllable_hz * t - std::numbers::pi / 2);
    const double burst =
        std::exp(-0.5 * std::pow((t - burst_center) / 0.02, 2.0));
    out[n] = envelope * v + 0.05 * burst * gauss(rng) + 1e-3 * gauss(rng);
  }
  double peak = 0.0;
  for (double v : out) peak = std::max(peak, std::abs(v));
  if (peak > 0.0) {
    for (double& v : out) v *= 0.5 / peak;
  }
  return out;
}

std::vector<double> WhiteNoise(int64_t num_samples, double stddev, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, stddev);
  std::vector<double> out(num_samples);
  for (double& v : out) v = gauss(rng);
  return out;
}

absl::StatusOr<std::vector<ManifestEntry>> WriteToyCorpus(
    const std::string& dir, int count, double seconds, int sample_rate,
    uint64_t seed) {
  if (count < 1 || !(seconds > 0.0) || sample_rate <= 0) {
    return absl::InvalidArgumentError("toy corpus needs count, length, rate > 0");
  }
  std::filesystem::create_directories(dir);
  Rng rng(seed);
  const int64_t samples = static_cast<int64_t>(std::llround(seconds * sample_rate));
  std::vector<ManifestEntry> entries;
  for (int i = 0; i < count; ++i) {
    const std::string id = absl::StrFormat("clip%03d", i);
    const std::string path =
        (std::filesystem::path(dir) / (id + ".wav")).string();
    RETURN_IF_ERROR(WriteWav(path,
                             WavData{sample_rate,
                                     SpeechLikeClip(samples, sample_rate, rng)},
                             WavFormat::kFloat32));
    entries.push_back(
        ManifestEntry{id, path, static_cast<double>(samples) / sample_rate});
  }
  RETURN_IF_ERROR(WriteFileAtomically(
      (std::filesystem::path(dir) / "manifest.tsv").string(),
      FormatManifest(entries)));
  return entries;
}

}  // namespace apcodec
