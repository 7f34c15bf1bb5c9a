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

#ifndef APCODEC_QUANTIZER_H_
#define APCODEC_QUANTIZER_H_

// Residual vector quantization. Stage q picks the codeword nearest (squared
// Euclidean distance, lowest index on ties) to the residual left by stages
// 0..q-1; the quantized latent is the sum of the picked codewords.

#include <cstdint>
#include <span>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "apcodec/autograd.h"
#include "apcodec/matrix.h"
#include "apcodec/nn.h"

namespace apcodec {

struct LatentSequence {
  Matrix values;  // [latent_frames, latent_dim]

  int64_t frames() const { return values.rows; }
  int64_t dim() const { return values.cols; }
};

// Frame-major codebook indices: index(f, q) = indices[f * Q + q].
struct TokenSequence {
  int64_t frames = 0;
  int num_quantizers = 0;
  std::vector<int32_t> indices;

  TokenSequence() = default;
  TokenSequence(int64_t num_frames, int quantizers)
      : frames(num_frames),
        num_quantizers(quantizers),
        indices(num_frames * quantizers, 0) {}

  int32_t& at(int64_t frame, int stage) {
    return indices[frame * num_quantizers + stage];
  }
  int32_t at(int64_t frame, int stage) const {
    return indices[frame * num_quantizers + stage];
  }
  bool operator==(const TokenSequence&) const = default;
};

struct Codebooks {
  std::vector<Matrix> tables;  // Q tables of [codebook_size, latent_dim]

  int num_quantizers() const { return static_cast<int>(tables.size()); }
  int64_t codebook_size() const { return tables.empty() ? 0 : tables[0].rows; }
  int64_t dim() const { return tables.empty() ? 0 : tables[0].cols; }
};

struct QuantizeResult {
  TokenSequence tokens;
  LatentSequence quantized;
  // Mean squared residual after each stage.
  std::vector<double> residual_norms;
};

// Exhaustive nearest-codeword search; ties go to the lowest index.
int32_t NearestCodeword(std::span<const double> vector, const Matrix& table);

absl::StatusOr<QuantizeResult> Quantize(const LatentSequence& latent,
                                        const Codebooks& books);

// Out-of-range indices yield DataLoss (corrupt token stream).
absl::StatusOr<LatentSequence> Dequantize(const TokenSequence& tokens,
                                          const Codebooks& books);

struct QuantizerTrainingOptions {
  double ema_decay = 0.99;
  double laplace_epsilon = 1e-5;
  // Codewords unused for this many updates are reseeded from batch residuals.
  int dead_code_window = 20;
  int kmeans_iterations = 10;
};

// Differentiable view of one quantizer pass.
struct QuantizerTrace {
  Tensor quantized;  // forward value = sum of codewords, gradient = identity
  std::vector<Tensor> stage_inputs;   // residual entering each stage
  std::vector<Tensor> stage_outputs;  // selected codewords (constants)
  TokenSequence tokens;
  std::vector<double> residual_norms;
};

// Codebooks plus the exponential-moving-average statistics that train them.
// Codebooks receive no gradient; the encoder sees a straight-through estimate.
class ResidualVectorQuantizer {
 public:
  ResidualVectorQuantizer(int num_quantizers, int codebook_size, int dim,
                          Rng& rng);

  const Codebooks& codebooks() const { return books_; }
  Codebooks& mutable_codebooks() { return books_; }

  QuantizerTrace Forward(const Tensor& latent) const;

  bool initialized() const { return initialized_; }
  // Sequential per-stage k-means on `latents` ([rows, dim]); stage q is fit to
  // the residual left by the already-fitted stages.
  void InitializeFromData(const Matrix& latents,
                          const QuantizerTrainingOptions& options, Rng& rng);

  // One EMA step. stage_inputs[q] holds every residual row that entered stage
  // q in the current batch and tokens[q] the row's selected index.
  void UpdateEma(const std::vector<Matrix>& stage_inputs,
                 const std::vector<std::vector<int32_t>>& tokens,
                 const QuantizerTrainingOptions& options, Rng& rng);

  // Serialization of the full state (tables, EMA statistics, usage counters).
  struct State {
    Codebooks books;
    std::vector<std::vector<double>> cluster_size;
    std::vector<Matrix> embed_sum;
    std::vector<std::vector<double>> usage;
    int64_t updates_since_reseed = 0;
    bool initialized = false;
  };
  State GetState() const;
  absl::Status SetState(State state);

 private:
  void ReseedDeadCodes(int stage, const Matrix& rows, Rng& rng);

  Codebooks books_;
  std::vector<std::vector<double>> cluster_size_;
  std::vector<Matrix> embed_sum_;
  std::vector<std::vector<double>> usage_;
  int64_t updates_since_reseed_ = 0;
  bool initialized_ = false;
};

}  // namespace apcodec

#endif  // APCODEC_QUANTIZER_H_
