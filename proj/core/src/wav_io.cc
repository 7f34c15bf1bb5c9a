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

#include "apcodec/wav_io.h"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "absl/strings/str_cat.h"
#include "apcodec/file_util.h"
#include "apcodec/status_macros.h"

namespace apcodec {
namespace {

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatFloat = 3;
constexpr uint16_t kFormatExtensible = 0xFFFE;

uint16_t ReadU16(const uint8_t* p) { return p[0] | (p[1] << 8); }
uint32_t ReadU32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) |
         (static_cast<uint32_t>(p[3]) << 24);
}

void PutU16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(v & 0xFF);
  out.push_back(v >> 8);
}
void PutU32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xFF);
}
void PutTag(std::vector<uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

}  // namespace

absl::StatusOr<WavData> ReadWav(const std::string& path) {
  ASSIGN_OR_RETURN(std::vector<uint8_t> bytes, ReadFileBytes(path));
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    return absl::InvalidArgumentError(absl::StrCat(path, ": not a RIFF/WAVE file"));
  }
  uint16_t format = 0;
  uint16_t channels = 0;
  uint32_t rate = 0;
  uint16_t bits = 0;
  const uint8_t* data = nullptr;
  size_t data_size = 0;
  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const uint8_t* chunk = bytes.data() + pos;
    const uint32_t size = ReadU32(chunk + 4);
    const size_t body = pos + 8;
    const size_t available = bytes.size() - body;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || available < 16) {
        return absl::InvalidArgumentError(absl::StrCat(path, ": short fmt chunk"));
      }
      format = ReadU16(chunk + 8);
      channels = ReadU16(chunk + 10);
      rate = ReadU32(chunk + 12);
      bits = ReadU16(chunk + 22);
      if (format == kFormatExtensible && size >= 40 && available >= 40) {
        format = ReadU16(chunk + 32);
      }
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = std::min<size_t>(size, available);
      break;
    }
    pos = body + size + (size & 1);
  }
  if (channels == 0 || data == nullptr) {
    return absl::InvalidArgumentError(
        absl::StrCat(path, ": missing fmt or data chunk"));
  }
  if (channels != 1) {
    return absl::InvalidArgumentError(
        absl::StrCat(path, ": ", channels, " channels; only mono is supported"));
  }
  WavData wav;
  wav.sample_rate = static_cast<int>(rate);
  if (format == kFormatPcm && bits == 16) {
    wav.samples.resize(data_size / 2);
    for (size_t i = 0; i < wav.samples.size(); ++i) {
      const int16_t v = static_cast<int16_t>(ReadU16(data + 2 * i));
      wav.samples[i] = v / 32768.0;
    }
  } else if (format == kFormatFloat && bits == 32) {
    wav.samples.resize(data_size / 4);
    for (size_t i = 0; i < wav.samples.size(); ++i) {
      const uint32_t raw = ReadU32(data + 4 * i);
      float v;
      std::memcpy(&v, &raw, sizeof(v));
      wav.samples[i] = v;
    }
  } else {
    return absl::InvalidArgumentError(absl::StrCat(
        path, ": unsupported sample format ", format, "/", bits,
        " bits; expected 16-bit PCM or 32-bit float"));
  }
  return wav;
}

absl::StatusOr<WavData> ReadWavAtRate(const std::string& path,
                                      int expected_rate) {
  ASSIGN_OR_RETURN(WavData wav, ReadWav(path));
  if (wav.sample_rate != expected_rate) {
    return absl::InvalidArgumentError(
        absl::StrCat(path, ": sample rate ", wav.sample_rate,
                     " Hz does not match configured ", expected_rate, " Hz"));
  }
  return wav;
}

absl::Status WriteWav(const std::string& path, const WavData& wav,
                      WavFormat format) {
  if (wav.sample_rate <= 0) {
    return absl::InvalidArgumentError("sample rate must be positive");
  }
  const uint16_t bits = format == WavFormat::kPcm16 ? 16 : 32;
  const uint16_t block = bits / 8;
  const uint32_t data_size = static_cast<uint32_t>(wav.samples.size() * block);
  std::vector<uint8_t> out;
  out.reserve(44 + data_size);
  PutTag(out, "RIFF");
  PutU32(out, 36 + data_size);
  PutTag(out, "WAVE");
  PutTag(out, "fmt ");
  PutU32(out, 16);
  PutU16(out, format == WavFormat::kPcm16 ? kFormatPcm : kFormatFloat);
  PutU16(out, 1);
  PutU32(out, static_cast<uint32_t>(wav.sample_rate));
  PutU32(out, static_cast<uint32_t>(wav.sample_rate) * block);
  PutU16(out, block);
  PutU16(out, bits);
  PutTag(out, "data");
  PutU32(out, data_size);
  for (double s : wav.samples) {
    if (format == WavFormat::kPcm16) {
      const long q = std::clamp(std::lround(s * 32768.0), -32768L, 32767L);
      PutU16(out, static_cast<uint16_t>(static_cast<int16_t>(q)));
    } else {
      const float v = static_cast<float>(s);
      uint32_t raw;
      std::memcpy(&raw, &v, sizeof(raw));
      PutU32(out, raw);
    }
  }
  return WriteFileAtomically(path, out);
}

}  // namespace apcodec
