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

#ifndef APCODEC_CONFIG_H_
#define APCODEC_CONFIG_H_

// Run configuration: every knob of every component, loaded from a flat
// "dotted.key = value" text file and then patched by command-line overrides.

#include <map>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "apcodec/codec_model.h"
#include "apcodec/discriminators.h"
#include "apcodec/losses.h"
#include "apcodec/spectral_frontend.h"
#include "apcodec/train_config.h"

namespace apcodec {

struct RunConfig {
  SignalConfig signal;
  CodecConfig codec;
  DiscriminatorConfig discriminator;
  LossWeights weights;
  TrainConfig train;
  std::string output_dir = "runs";
  std::string loss_log;  // empty: <output_dir>/losses.jsonl

  // Cross-field checks of every constituent type.
  absl::Status Validate() const;
  bool operator==(const RunConfig&) const = default;
};

// All recognized keys, in canonical order.
std::vector<std::string> ConfigKeys();

absl::Status SetConfigValue(RunConfig& config, const std::string& key,
                            const std::string& value);
absl::StatusOr<std::string> GetConfigValue(const RunConfig& config,
                                           const std::string& key);

// Parses "key = value" lines; '#' starts a comment. Unknown keys are errors.
absl::Status ApplyConfigText(RunConfig& config, const std::string& text);

// Loads `path` (if non-empty) over the defaults, applies "key=value"
// overrides in order, then validates.
absl::StatusOr<RunConfig> LoadRunConfig(
    const std::string& path, const std::vector<std::string>& overrides);

// Canonical text form; ApplyConfigText(RunConfig{}, ToConfigText(c)) == c.
std::string ToConfigText(const RunConfig& config);

}  // namespace apcodec

#endif  // APCODEC_CONFIG_H_
