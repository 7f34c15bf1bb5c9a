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

#ifndef APCODEC_WAV_IO_H_
#define APCODEC_WAV_IO_H_

#include <string>
#include <vector>

#include "absl/status/statusor.h"

namespace apcodec {

enum class WavFormat { kPcm16, kFloat32 };

struct WavData {
  int sample_rate = 0;
  std::vector<double> samples;  // mono, nominal range [-1, 1]
};

// Reads mono 16-bit PCM or 32-bit IEEE-float RIFF/WAVE files.
absl::StatusOr<WavData> ReadWav(const std::string& path);

// Same, and fails with InvalidArgument unless the file's rate equals
// `expected_rate` (no resampling is performed).
absl::StatusOr<WavData> ReadWavAtRate(const std::string& path,
                                      int expected_rate);

// PCM16 output clips to [-1, 1].
absl::Status WriteWav(const std::string& path, const WavData& wav,
                      WavFormat format);

}  // namespace apcodec

#endif  // APCODEC_WAV_IO_H_
