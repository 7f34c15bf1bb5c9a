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

#ifndef APCODEC_BITSTREAM_H_
#define APCODEC_BITSTREAM_H_

// The .apc container: a fixed 22-byte little-endian header followed by the
// token payload. Tokens are written frame-major (all stages of frame 0, then
// frame 1, ...) at `codebook_bits` bits each, most significant bit first,
// and the final byte is zero-padded.
//
//   offset size field
//   0      4    magic "APC+"
//   4      1    version (1)
//   5      4    sample_rate
//   9      2    frame_shift
//   11     1    down_up_ratio
//   12     1    num_quantizers
//   13     1    codebook_bits
//   14     4    latent_frames
//   18     4    original_samples

#include <cstdint>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "apcodec/codec_model.h"
#include "apcodec/quantizer.h"

namespace apcodec {

inline constexpr uint8_t kBitstreamVersion = 1;
inline constexpr size_t kBitstreamHeaderBytes = 22;

struct BitstreamHeader {
  uint8_t version = kBitstreamVersion;
  uint32_t sample_rate = 0;
  uint16_t frame_shift = 0;
  uint8_t down_up_ratio = 0;
  uint8_t num_quantizers = 0;
  uint8_t codebook_bits = 0;
  uint32_t latent_frames = 0;
  uint32_t original_samples = 0;

  bool operator==(const BitstreamHeader&) const = default;
};

BitstreamHeader MakeHeader(const SignalConfig& signal, const CodecConfig& codec,
                           int64_t latent_frames, int64_t original_samples);

// Bitrate implied by the header fields, in kbps.
double HeaderBitrateKbps(const BitstreamHeader& header);

// ceil(latent_frames * num_quantizers * codebook_bits / 8)
size_t PayloadBytes(const BitstreamHeader& header);

// InvalidArgument when the header is internally inconsistent or disagrees
// with `tokens`.
absl::StatusOr<std::vector<uint8_t>> Pack(const TokenSequence& tokens,
                                          const BitstreamHeader& header);

struct UnpackedStream {
  BitstreamHeader header;
  TokenSequence tokens;
};

// Error codes: InvalidArgument for a bad magic, Unimplemented for an unknown
// version, OutOfRange for a truncated stream, DataLoss for inconsistent
// header fields or trailing bytes.
absl::StatusOr<UnpackedStream> Unpack(const std::vector<uint8_t>& bytes);

}  // namespace apcodec

#endif  // APCODEC_BITSTREAM_H_
