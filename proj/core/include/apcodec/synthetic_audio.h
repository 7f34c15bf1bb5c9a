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

#ifndef APCODEC_SYNTHETIC_AUDIO_H_
#define APCODEC_SYNTHETIC_AUDIO_H_

// Deterministic synthetic test signals.

#include <cstdint>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "apcodec/manifest.h"
#include "apcodec/nn.h"

namespace apcodec {

// Voiced-speech-like clip: a harmonic source with a drifting, vibrato-laden
// fundamental, shaped by three moving formant bumps and a syllabic envelope,
// with short noise bursts. Peak amplitude 0.5.
std::vector<double> SpeechLikeClip(int64_t num_samples, int sample_rate,
                                   Rng& rng);

// Gaussian white noise with the given standard deviation.
std::vector<double> WhiteNoise(int64_t num_samples, double stddev, Rng& rng);

// Writes `count` clips of `seconds` each as 32-bit float WAV files into
// `dir` with a manifest "manifest.tsv" next to them; returns the manifest
// entries.
absl::StatusOr<std::vector<ManifestEntry>> WriteToyCorpus(
    const std::string& dir, int count, double seconds, int sample_rate,
    uint64_t seed);

}  // namespace apcodec

#endif  // APCODEC_SYNTHETIC_AUDIO_H_
