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

#include "apcodec/bitstream.h"

#include <cstring>

#include "absl/strings/str_cat.h"

namespace apcodec {
namespace {

constexpr char kMagic[4] = {'A', 'P', 'C', '+'};

template <typename T>
void PutLe(std::vector<uint8_t>& out, T value) {
  for (size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<uint8_t>(value >> (8 * i)));
  }
}

template <typename T>
T GetLe(const uint8_t* p) {
  T value = 0;
  for (size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(static_cast<T>(p[i]) << (8 * i));
  }
  return value;
}

absl::Status CheckHeader(const BitstreamHeader& h) {
  if (h.sample_rate == 0 || h.frame_shift == 0 || h.down_up_ratio == 0 ||
      h.num_quantizers == 0 || h.codebook_bits == 0 || h.codebook_bits > 16) {
    return absl::InvalidArgumentError("bitstream header has zero-valued fields");
  }
  const uint64_t block =
      static_cast<uint64_t>(h.frame_shift) * h.down_up_ratio;
  const uint64_t expected = (h.original_samples + block - 1) / block;
  if (expected != h.latent_frames) {
    return absl::InvalidArgumentError(absl::StrCat(
        "header claims ", h.latent_frames, " latent frames but ",
        h.original_samples, " samples need ", expected));
  }
  return absl::OkStatus();
}

}  // namespace

BitstreamHeader MakeHeader(const SignalConfig& signal, const CodecConfig& codec,
                           int64_t latent_frames, int64_t original_samples) {
  BitstreamHeader h;
  h.sample_rate = static_cast<uint32_t>(signal.sample_rate);
  h.frame_shift = static_cast<uint16_t>(signal.frame_shift);
  h.down_up_ratio = static_cast<uint8_t>(codec.down_up_ratio);
  h.num_quantizers = static_cast<uint8_t>(codec.num_quantizers);
  h.codebook_bits = static_cast<uint8_t>(codec.codebook_bits());
  h.latent_frames = static_cast<uint32_t>(latent_frames);
  h.original_samples = static_cast<uint32_t>(original_samples);
  return h;
}

double HeaderBitrateKbps(const BitstreamHeader& h) {
  const double latent_rate =
      static_cast<double>(h.sample_rate) / h.frame_shift / h.down_up_ratio;
  return latent_rate * h.codebook_bits * h.num_quantizers / 1000.0;
}

size_t PayloadBytes(const BitstreamHeader& h) {
  const uint64_t bits = static_cast<uint64_t>(h.latent_frames) *
                        h.num_quantizers * h.codebook_bits;
  return static_cast<size_t>((bits + 7) / 8);
}

absl::StatusOr<std::vector<uint8_t>> Pack(const TokenSequence& tokens,
                                          const BitstreamHeader& header) {
  if (absl::Status s = CheckHeader(header); !s.ok()) return s;
  if (tokens.frames != header.latent_frames ||
      tokens.num_quantizers != header.num_quantizers ||
      static_cast<int64_t>(tokens.indices.size()) !=
          tokens.frames * tokens.num_quantizers) {
    return absl::InvalidArgumentError(absl::StrCat(
        "token matrix ", tokens.frames, "x", tokens.num_quantizers,
        " does not match header ", header.latent_frames, "x",
        static_cast<int>(header.num_quantizers)));
  }
  if (header.version != kBitstreamVersion) {
    return absl::InvalidArgumentError("can only write the current version");
  }
  const int bits = header.codebook_bits;
  const int32_t limit = 1 << bits;
  std::vector<uint8_t> out;
  out.reserve(kBitstreamHeaderBytes + PayloadBytes(header));
  out.insert(out.end(), kMagic, kMagic + 4);
  out.push_back(header.version);
  PutLe<uint32_t>(out, header.sample_rate);
  PutLe<uint16_t>(out, header.frame_shift);
  out.push_back(header.down_up_ratio);
  out.push_back(header.num_quantizers);
  out.push_back(header.codebook_bits);
  PutLe<uint32_t>(out, header.latent_frames);
  PutLe<uint32_t>(out, header.original_samples);

  uint32_t acc = 0;
  int filled = 0;
  for (int32_t index : tokens.indices) {
    if (index < 0 || index >= limit) {
      return absl::InvalidArgumentError(
          absl::StrCat("token ", index, " does not fit in ", bits, " bits"));
    }
    acc = (acc << bits) | static_cast<uint32_t>(index);
    filled += bits;
    while (filled >= 8) {
      filled -= 8;
      out.push_back(static_cast<uint8_t>(acc >> filled));
    }
    acc &= (1u << filled) - 1u;
  }
  if (filled > 0) out.push_back(static_cast<uint8_t>(acc << (8 - filled)));
  return out;
}

absl::StatusOr<UnpackedStream> Unpack(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < 5) {
    return absl::OutOfRangeError(absl::StrCat(
        "stream of ", bytes.size(), " bytes is shorter than the header"));
  }
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    return absl::InvalidArgumentError("bad magic: not an APC+ bitstream");
  }
  if (bytes[4] != kBitstreamVersion) {
    return absl::UnimplementedError(absl::StrCat(
        "unsupported bitstream version ", static_cast<int>(bytes[4])));
  }
  if (bytes.size() < kBitstreamHeaderBytes) {
    return absl::OutOfRangeError(absl::StrCat(
        "truncated header: expected ", kBitstreamHeaderBytes, " bytes, got ",
        bytes.size()));
  }
  const uint8_t* p = bytes.data();
  UnpackedStream out;
  BitstreamHeader& h = out.header;
  h.version = p[4];
  h.sample_rate = GetLe<uint32_t>(p + 5);
  h.frame_shift = GetLe<uint16_t>(p + 9);
  h.down_up_ratio = p[11];
  h.num_quantizers = p[12];
  h.codebook_bits = p[13];
  h.latent_frames = GetLe<uint32_t>(p + 14);
  h.original_samples = GetLe<uint32_t>(p + 18);
  if (absl::Status s = CheckHeader(h); !s.ok()) {
    return absl::DataLossError(s.message());
  }
  const size_t expected = kBitstreamHeaderBytes + PayloadBytes(h);
  if (bytes.size() < expected) {
    return absl::OutOfRangeError(absl::StrCat(
        "truncated payload: expected ", expected, " bytes, got ", bytes.size()));
  }
  if (bytes.size() > expected) {
    return absl::DataLossError(absl::StrCat(
        "trailing data: expected ", expected, " bytes, got ", bytes.size()));
  }
  const int bits = h.codebook_bits;
  out.tokens = TokenSequence(h.latent_frames, h.num_quantizers);
  size_t pos = kBitstreamHeaderBytes;
  uint32_t acc = 0;
  int filled = 0;
  for (int32_t& index : out.tokens.indices) {
    while (filled < bits) {
      acc = (acc << 8) | bytes[pos++];
      filled += 8;
    }
    filled -= bits;
    index = static_cast<int32_t>((acc >> filled) & ((1u << bits) - 1u));
    acc &= (1u << filled) - 1u;
  }
  return out;
}

}  // namespace apcodec
