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

#ifndef APCODEC_STAGED_TRAINING_H_
#define APCODEC_STAGED_TRAINING_H_

// Two-stage joint-individual training.
//
// The joint stage trains encoder, quantizer, decoder and discriminators
// together. The individual stage freezes the encoder and quantizer, feeds the
// decoder cached quantized latents, and trains a freshly initialized decoder
// and discriminators without the quantization loss.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "apcodec/checkpoint.h"
#include "apcodec/config.h"
#include "apcodec/losses.h"
#include "apcodec/manifest.h"
#include "apcodec/metrics.h"
#include "apcodec/quantizer.h"

namespace apcodec {

// Waveforms of every usable manifest entry, held in memory.
struct TrainingCorpus {
  std::vector<ManifestEntry> entries;
  std::vector<std::vector<double>> waveforms;
};

// Reads every entry at the configured rate. Clips shorter than `min_samples`
// and unreadable files are skipped with a warning; an empty manifest or an
// all-skipped corpus is an error.
absl::StatusOr<TrainingCorpus> LoadTrainingCorpus(
    const std::vector<ManifestEntry>& manifest, int sample_rate,
    int64_t min_samples);

// One optimization step as written to the loss log.
struct StepRecord {
  std::string stage_tag;
  int64_t step = 0;  // 1-based
  int64_t epoch = 0;
  double learning_rate = 0.0;
  LossReport generator;
  double discriminator_loss = 0.0;
};

std::string StepRecordJson(const StepRecord& record);

struct StageOptions {
  // Appends one JSON line per step when non-empty.
  std::string loss_log_path;
  std::function<void(const StepRecord&)> on_step;
  // Iteration index of the iterative mode; 0 outside it.
  int iteration = 0;
};

struct StageResult {
  StageCheckpoint checkpoint;
  std::vector<StepRecord> records;
  // Encoder+quantizer hashes observed during an individual stage (every
  // freeze_check_interval steps, plus the first and last step).
  std::vector<std::string> freeze_hashes;
};

// Trains from a fresh initialization drawn from config.train.seed.
absl::StatusOr<StageResult> TrainJoint(const RunConfig& config,
                                       const TrainingCorpus& corpus,
                                       const StageOptions& options = {});

// Continues joint training from every module of `start`.
absl::StatusOr<StageResult> FineTuneJoint(const StageCheckpoint& start,
                                          const RunConfig& config,
                                          const TrainingCorpus& corpus,
                                          const StageOptions& options = {});

struct LatentCacheEntry {
  std::string id;
  std::string audio_path;
  int64_t original_samples = 0;
  TokenSequence tokens;
};

struct LatentCache {
  std::string checkpoint_hash;  // FrozenModuleHash of the producing checkpoint
  std::string stage_tag;
  SignalConfig signal;
  CodecConfig codec;
  std::vector<LatentCacheEntry> entries;
};

// Tokenizes every manifest entry with the checkpoint's frozen encoder and
// quantizer. Individual-stage checkpoints are rejected.
absl::StatusOr<LatentCache> ExportLatents(
    const StageCheckpoint& checkpoint,
    const std::vector<ManifestEntry>& manifest);

// One "<id>.apc" bitstream per entry plus index.json.
absl::Status WriteLatentCache(const LatentCache& cache, const std::string& dir);
absl::StatusOr<LatentCache> ReadLatentCache(const std::string& dir);

// Fails with FailedPrecondition unless the signal and codec configs match.
absl::Status CheckCompatible(const RunConfig& config,
                             const StageCheckpoint& checkpoint);

// Requires cache.checkpoint_hash == FrozenModuleHash(joint); a stale cache is
// an error. Encoder and quantizer are copied bit-exactly and never updated.
absl::StatusOr<StageResult> TrainIndividual(const StageCheckpoint& joint,
                                            const LatentCache& cache,
                                            const RunConfig& config,
                                            const StageOptions& options = {});

struct IterationOutput {
  StageCheckpoint joint;
  StageCheckpoint individual;
  MetricReport metrics;
};

// Repeats joint fine-tuning -> export -> individual training `iterations`
// times starting from `start`. `cache_root`, when non-empty, receives each
// iteration's latent cache under iteration-<k>/.
absl::StatusOr<std::vector<IterationOutput>> TrainIterative(
    const StageCheckpoint& start, const RunConfig& config,
    const std::vector<ManifestEntry>& manifest, int iterations,
    const std::string& cache_root, const StageOptions& options = {});

// Learning rate after `step` completed steps with `steps_per_epoch` steps per
// full pass over the corpus.
double StageLearningRate(const TrainConfig& train, int64_t step,
                         int64_t steps_per_epoch);

}  // namespace apcodec

#endif  // APCODEC_STAGED_TRAINING_H_
