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

#ifndef APCODEC_CHECKPOINT_H_
#define APCODEC_CHECKPOINT_H_

// Versioned on-disk container for a training stage's complete state.
//
// Layout: "APCK", u32 version, u64 header length, a JSON header, then the
// raw little-endian float64 payload of every array listed in the header.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "apcodec/autograd.h"
#include "apcodec/codec_model.h"
#include "apcodec/config.h"
#include "apcodec/discriminators.h"
#include "apcodec/nn.h"
#include "apcodec/optimizer.h"
#include "apcodec/quantizer.h"

namespace apcodec {

inline constexpr uint32_t kCheckpointVersion = 1;

inline constexpr char kJointTag[] = "joint";
inline constexpr char kIndividualTag[] = "individual";

// "iteration-<k>-joint" / "iteration-<k>-individual"; k = 0 gives the plain
// stage tags.
std::string StageTag(bool individual, int iteration);
// Whether `tag` names an individual-stage checkpoint.
bool IsIndividualTag(const std::string& tag);
bool IsValidStageTag(const std::string& tag);

struct ArraySnapshot {
  std::string name;
  Shape shape;
  std::vector<double> values;
  bool operator==(const ArraySnapshot&) const = default;
};

std::vector<ArraySnapshot> CaptureParameters(const ParameterList& params);
// Names and shapes must match exactly.
absl::Status RestoreParameters(const std::vector<ArraySnapshot>& snapshot,
                               ParameterList& params);

struct StageCheckpoint {
  std::string stage_tag = kJointTag;
  // Modules whose parameters this stage did not update.
  std::vector<std::string> frozen_manifest;
  RunConfig config;
  std::vector<ArraySnapshot> encoder;
  std::vector<ArraySnapshot> decoder;
  // Training-only; not needed to encode or decode.
  std::vector<ArraySnapshot> mpd;
  std::vector<ArraySnapshot> mrd;
  ResidualVectorQuantizer::State quantizer;
  AdamW::State generator_optimizer;
  AdamW::State discriminator_optimizer;
  int64_t steps = 0;
  // Frozen-module hash of the checkpoint this stage consumed; empty for a
  // joint stage started from scratch.
  std::string parent_hash;
};

// Snapshot of a model and its discriminators; optimizer state left empty.
StageCheckpoint CaptureCheckpoint(const RunConfig& config,
                                  const CodecModel& model,
                                  const Discriminators* discriminators);

// Builds a codec model carrying the checkpoint's encoder, quantizer and
// decoder.
absl::StatusOr<std::unique_ptr<CodecModel>> BuildModel(
    const StageCheckpoint& checkpoint);
absl::Status RestoreModel(const StageCheckpoint& checkpoint,
                          CodecModel& model);
absl::Status RestoreDiscriminators(const StageCheckpoint& checkpoint,
                                   Discriminators& discriminators);

// SHA-256 (hex) over the signal and codec configs, the encoder parameters and
// the codebooks. Equal for a model and its captured checkpoint.
std::string FrozenModuleHash(const CodecModel& model);
std::string FrozenModuleHash(const StageCheckpoint& checkpoint);

std::vector<uint8_t> SerializeCheckpoint(const StageCheckpoint& checkpoint);
// Bad magic: InvalidArgument; unknown version: Unimplemented; short or
// inconsistent contents: DataLoss.
absl::StatusOr<StageCheckpoint> DeserializeCheckpoint(
    const std::vector<uint8_t>& bytes);

absl::Status SaveCheckpoint(const StageCheckpoint& checkpoint,
                            const std::string& path);
absl::StatusOr<StageCheckpoint> LoadCheckpoint(const std::string& path);

}  // namespace apcodec

#endif  // APCODEC_CHECKPOINT_H_
