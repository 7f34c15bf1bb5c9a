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

#ifndef APCODEC_CODEC_MODEL_H_
#define APCODEC_CODEC_MODEL_H_

#include <cstdint>
#include <memory>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "apcodec/autograd.h"
#include "apcodec/matrix.h"
#include "apcodec/nn.h"
#include "apcodec/quantizer.h"
#include "apcodec/spectral_frontend.h"

namespace apcodec {

// Architectural hyperparameters. Defaults reproduce the published 48 kHz
// configuration at Q = 3 (4.5 kbps).
struct CodecConfig {
  int num_blocks = 8;
  int kernel_size = 7;
  // Residual-stream width of every backbone block.
  int channel_size = 512;
  // Pointwise expansion inside a block: channel_size * expansion_factor.
  int expansion_factor = 3;
  int latent_dim = 32;
  int down_up_ratio = 8;
  int codebook_size = 1024;
  int num_quantizers = 3;

  int codebook_bits() const;
  absl::Status Validate() const;
  bool operator==(const CodecConfig&) const = default;
};

// (sample_rate / frame_shift / down_up_ratio) * log2(codebook_size) * Q / 1000
double BitrateKbps(const CodecConfig& codec, const SignalConfig& signal);

// Two parallel sub-encoders (log-amplitude, raw wrapped phase), each an input
// convolution, a ConvNeXt stack and a stride-`down_up_ratio` convolution;
// outputs are concatenated and projected to latent_dim.
class Encoder {
 public:
  Encoder(const CodecConfig& config, int bins, Rng& rng);

  // [frames, bins] x 2 -> [frames / down_up_ratio, latent_dim]
  Tensor Forward(const Tensor& log_amplitude, const Tensor& phase) const;

  ParameterList& params() { return params_; }
  const ParameterList& params() const { return params_; }

 private:
  struct Branch {
    Conv1dLayer input;
    LayerNormLayer norm_in;
    std::vector<ConvNextBlock> blocks;
    LayerNormLayer norm_out;
    LinearLayer downsample;  // kernel == stride == down_up_ratio
  };
  Branch MakeBranch(const std::string& name, Rng& rng);
  Tensor RunBranch(const Branch& branch, const Tensor& x) const;

  CodecConfig config_;
  int bins_;
  ParameterList params_;
  Branch amplitude_;
  Branch phase_;
  LinearLayer reduce_;
};

struct DecoderOutput {
  Tensor log_amplitude;  // [frames, bins]
  Tensor phase;          // [frames, bins], atan2(imag_map, real_map)
  Tensor real_map;
  Tensor imag_map;
};

// Mirror of the encoder: latent_dim -> channel_size projection, then two
// sub-decoders of transposed-convolution upsampling + ConvNeXt stack. The
// amplitude head is linear; the phase head estimates pseudo-real and
// pseudo-imaginary maps in parallel and takes their two-argument arctangent.
class Decoder {
 public:
  Decoder(const CodecConfig& config, int bins, Rng& rng);

  // `phase_map_scale` multiplies both pseudo maps before the arctangent; it
  // exists so tests can probe the scale invariance of the phase head.
  DecoderOutput Forward(const Tensor& latent,
                        double phase_map_scale = 1.0) const;

  ParameterList& params() { return params_; }
  const ParameterList& params() const { return params_; }

 private:
  struct Branch {
    LinearLayer upsample;  // kernel == stride == down_up_ratio
    LayerNormLayer norm_in;
    std::vector<ConvNextBlock> blocks;
    LayerNormLayer norm_out;
  };
  Branch MakeBranch(const std::string& name, Rng& rng);
  Tensor RunBranch(const Branch& branch, const Tensor& x) const;

  CodecConfig config_;
  int bins_;
  ParameterList params_;
  LinearLayer restore_;
  Branch amplitude_;
  Branch phase_;
  LinearLayer amplitude_head_;
  LinearLayer real_head_;
  LinearLayer imag_head_;
};

// Per-component seed derivation shared by construction and reinitialization.
enum class Component : uint64_t {
  kEncoder = 1,
  kQuantizer = 2,
  kDecoder = 3,
  kMultiPeriod = 4,
  kMultiResolution = 5,
  kData = 6,               // crop positions and batch order
  kQuantizerTraining = 7,  // k-means seeding and dead-code reseeding
};
Rng ComponentRng(uint64_t seed, Component component, uint64_t generation);

struct EncodedUtterance {
  TokenSequence tokens;
  int64_t original_samples = 0;
};

// Encoder + residual vector quantizer + decoder. The value-level methods run
// without gradient recording and do not mutate the model, so a const model
// can serve concurrent callers.
class CodecModel {
 public:
  CodecModel(const SignalConfig& signal, const CodecConfig& codec,
             uint64_t seed);

  const SignalConfig& signal_config() const { return signal_; }
  const CodecConfig& codec_config() const { return codec_; }

  absl::StatusOr<LatentSequence> Encode(const SpectralPair& pair) const;
  absl::StatusOr<SpectralPair> Decode(const LatentSequence& latent,
                                      double phase_map_scale = 1.0) const;

  // Waveform -> analysis -> frame padding -> encoder -> RVQ tokens.
  absl::StatusOr<EncodedUtterance> EncodeWaveform(
      std::span<const double> waveform) const;
  // Tokens -> dequantize -> decoder -> synthesis, trimmed to
  // `original_samples`.
  absl::StatusOr<std::vector<double>> DecodeTokens(
      const TokenSequence& tokens, int64_t original_samples) const;

  Encoder& encoder() { return *encoder_; }
  const Encoder& encoder() const { return *encoder_; }
  Decoder& decoder() { return *decoder_; }
  const Decoder& decoder() const { return *decoder_; }
  ResidualVectorQuantizer& quantizer() { return *quantizer_; }
  const ResidualVectorQuantizer& quantizer() const { return *quantizer_; }

  // Fresh decoder drawn from ComponentRng(seed, kDecoder, generation).
  void ReinitializeDecoder(uint64_t seed, uint64_t generation);

 private:
  SignalConfig signal_;
  CodecConfig codec_;
  std::unique_ptr<Encoder> encoder_;
  std::unique_ptr<ResidualVectorQuantizer> quantizer_;
  std::unique_ptr<Decoder> decoder_;
};

// Row-major matrix <-> [rows, cols] tensor.
Tensor MatrixToTensor(const Matrix& m);
Matrix TensorToMatrix(const Tensor& t);

}  // namespace apcodec

#endif  // APCODEC_CODEC_MODEL_H_
