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

#include "apcodec/codec_model.h"

#include <bit>
#include <utility>

#include "absl/strings/str_cat.h"
#include "apcodec/status_macros.h"
#include "glog/logging.h"

namespace apcodec {

int CodecConfig::codebook_bits() const {
  return std::countr_zero(static_cast<unsigned>(codebook_size));
}

absl::Status CodecConfig::Validate() const {
  if (num_blocks < 0 || kernel_size <= 0 || channel_size <= 0 ||
      expansion_factor <= 0 || latent_dim <= 0 || down_up_ratio <= 0 ||
      codebook_size <= 0 || num_quantizers <= 0) {
    return absl::InvalidArgumentError("codec config values must be positive");
  }
  if (kernel_size % 2 == 0) {
    return absl::InvalidArgumentError("kernel_size must be odd");
  }
  if (!std::has_single_bit(static_cast<unsigned>(codebook_size))) {
    return absl::InvalidArgumentError(absl::StrCat(
        "codebook_size ", codebook_size, " is not a power of two"));
  }
  if (codebook_bits() > 16) {
    return absl::InvalidArgumentError("codebook_size above 2^16 unsupported");
  }
  if (num_quantizers > 255 || down_up_ratio > 255) {
    return absl::InvalidArgumentError(
        "num_quantizers and down_up_ratio must fit in one byte");
  }
  return absl::OkStatus();
}

double BitrateKbps(const CodecConfig& codec, const SignalConfig& signal) {
  const double latent_rate = static_cast<double>(signal.sample_rate) /
                             signal.frame_shift / codec.down_up_ratio;
  return latent_rate * codec.codebook_bits() * codec.num_quantizers / 1000.0;
}

Rng ComponentRng(uint64_t seed, Component component, uint64_t generation) {
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32),
                    static_cast<uint32_t>(component),
                    static_cast<uint32_t>(generation)};
  return Rng(seq);
}

Tensor MatrixToTensor(const Matrix& m) {
  return Tensor::FromData({m.rows, m.cols}, m.values);
}

Matrix TensorToMatrix(const Tensor& t) {
  CHECK_EQ(t.rank(), 2);
  Matrix m(t.dim(0), t.dim(1));
  std::copy(t.data().begin(), t.data().end(), m.values.begin());
  return m;
}

// ---------------------------------------------------------------------------
// Encoder

Encoder::Encoder(const CodecConfig& config, int bins, Rng& rng)
    : config_(config), bins_(bins) {
  amplitude_ = MakeBranch("encoder.amplitude", rng);
  phase_ = MakeBranch("encoder.phase", rng);
  reduce_ = LinearLayer(params_, "encoder.reduce", 2 * config.channel_size,
                        config.latent_dim, rng);
}

Encoder::Branch Encoder::MakeBranch(const std::string& name, Rng& rng) {
  const int c = config_.channel_size;
  Branch b;
  b.input = Conv1dLayer(params_, name + ".input", bins_, c, config_.kernel_size, rng);
  b.norm_in = LayerNormLayer(params_, name + ".norm_in", c);
  for (int i = 0; i < config_.num_blocks; ++i) {
    b.blocks.emplace_back(params_, absl::StrCat(name, ".block", i), c,
                          c * config_.expansion_factor, config_.kernel_size, rng);
  }
  b.norm_out = LayerNormLayer(params_, name + ".norm_out", c);
  b.downsample = LinearLayer(params_, name + ".downsample",
                             c * config_.down_up_ratio, c, rng);
  return b;
}

Tensor Encoder::RunBranch(const Branch& branch, const Tensor& x) const {
  Tensor h = branch.norm_in.Forward(branch.input.Forward(x));
  for (const auto& block : branch.blocks) h = block.Forward(h);
  h = branch.norm_out.Forward(h);
  const int64_t frames = h.dim(0);
  const int64_t ratio = config_.down_up_ratio;
  // A [T, C] row-major buffer viewed as [T / r, r * C] holds each stride
  // window contiguously, so the strided convolution is a dense layer.
  h = Reshape(h, {frames / ratio, ratio * config_.channel_size});
  return branch.downsample.Forward(h);
}

Tensor Encoder::Forward(const Tensor& log_amplitude, const Tensor& phase) const {
  CHECK_EQ(log_amplitude.dim(1), bins_);
  CHECK(log_amplitude.shape() == phase.shape());
  CHECK_EQ(log_amplitude.dim(0) % config_.down_up_ratio, 0);
  Tensor a = RunBranch(amplitude_, log_amplitude);
  Tensor p = RunBranch(phase_, phase);
  return reduce_.Forward(ConcatColumns(a, p));
}

// ---------------------------------------------------------------------------
// Decoder

Decoder::Decoder(const CodecConfig& config, int bins, Rng& rng)
    : config_(config), bins_(bins) {
  const int c = config.channel_size;
  restore_ = LinearLayer(params_, "decoder.restore", config.latent_dim, c, rng);
  amplitude_ = MakeBranch("decoder.amplitude", rng);
  phase_ = MakeBranch("decoder.phase", rng);
  amplitude_head_ = LinearLayer(params_, "decoder.amplitude_head", c, bins, rng);
  real_head_ = LinearLayer(params_, "decoder.phase_real_head", c, bins, rng);
  imag_head_ = LinearLayer(params_, "decoder.phase_imag_head", c, bins, rng);
}

Decoder::Branch Decoder::MakeBranch(const std::string& name, Rng& rng) {
  const int c = config_.channel_size;
  Branch b;
  b.upsample = LinearLayer(params_, name + ".upsample", c,
                           c * config_.down_up_ratio, rng);
  b.norm_in = LayerNormLayer(params_, name + ".norm_in", c);
  for (int i = 0; i < config_.num_blocks; ++i) {
    b.blocks.emplace_back(params_, absl::StrCat(name, ".block", i), c,
                          c * config_.expansion_factor, config_.kernel_size, rng);
  }
  b.norm_out = LayerNormLayer(params_, name + ".norm_out", c);
  return b;
}

Tensor Decoder::RunBranch(const Branch& branch, const Tensor& x) const {
  const int64_t latent_frames = x.dim(0);
  Tensor h = branch.upsample.Forward(x);
  h = Reshape(h, {latent_frames * config_.down_up_ratio, config_.channel_size});
  h = branch.norm_in.Forward(h);
  for (const auto& block : branch.blocks) h = block.Forward(h);
  return branch.norm_out.Forward(h);
}

DecoderOutput Decoder::Forward(const Tensor& latent,
                               double phase_map_scale) const {
  CHECK_EQ(latent.rank(), 2);
  CHECK_EQ(latent.dim(1), config_.latent_dim);
  Tensor h = restore_.Forward(latent);
  DecoderOutput out;
  out.log_amplitude = amplitude_head_.Forward(RunBranch(amplitude_, h));
  Tensor p = RunBranch(phase_, h);
  out.real_map = real_head_.Forward(p);
  out.imag_map = imag_head_.Forward(p);
  if (phase_map_scale != 1.0) {
    out.real_map = Scale(out.real_map, phase_map_scale);
    out.imag_map = Scale(out.imag_map, phase_map_scale);
  }
  out.phase = Atan2(out.imag_map, out.real_map);
  return out;
}

// ---------------------------------------------------------------------------
// CodecModel

CodecModel::CodecModel(const SignalConfig& signal, const CodecConfig& codec,
                       uint64_t seed)
    : signal_(signal), codec_(codec) {
  const absl::Status signal_ok = signal.Validate();
  const absl::Status codec_ok = codec.Validate();
  CHECK(signal_ok.ok()) << signal_ok.message();
  CHECK(codec_ok.ok()) << codec_ok.message();
  Rng enc_rng = ComponentRng(seed, Component::kEncoder, 0);
  Rng q_rng = ComponentRng(seed, Component::kQuantizer, 0);
  Rng dec_rng = ComponentRng(seed, Component::kDecoder, 0);
  encoder_ = std::make_unique<Encoder>(codec, signal.bins(), enc_rng);
  quantizer_ = std::make_unique<ResidualVectorQuantizer>(
      codec.num_quantizers, codec.codebook_size, codec.latent_dim, q_rng);
  decoder_ = std::make_unique<Decoder>(codec, signal.bins(), dec_rng);
}

void CodecModel::ReinitializeDecoder(uint64_t seed, uint64_t generation) {
  Rng rng = ComponentRng(seed, Component::kDecoder, generation);
  decoder_ = std::make_unique<Decoder>(codec_, signal_.bins(), rng);
}

absl::StatusOr<LatentSequence> CodecModel::Encode(
    const SpectralPair& pair) const {
  if (pair.bins() != signal_.bins() || pair.phase.cols != signal_.bins() ||
      pair.phase.rows != pair.frames()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "spectral pair has ", pair.bins(), " bins, expected ", signal_.bins()));
  }
  if (pair.frames() == 0 || pair.frames() % codec_.down_up_ratio != 0) {
    return absl::InvalidArgumentError(absl::StrCat(
        "frame count ", pair.frames(), " is not a positive multiple of ",
        codec_.down_up_ratio));
  }
  NoGradGuard no_grad;
  Tensor latent = encoder_->Forward(MatrixToTensor(pair.log_amplitude),
                                    MatrixToTensor(pair.phase));
  return LatentSequence{TensorToMatrix(latent)};
}

absl::StatusOr<SpectralPair> CodecModel::Decode(const LatentSequence& latent,
                                                double phase_map_scale) const {
  if (latent.dim() != codec_.latent_dim) {
    return absl::InvalidArgumentError(absl::StrCat(
        "latent dim ", latent.dim(), " does not match config ",
        codec_.latent_dim));
  }
  if (latent.frames() == 0) {
    return absl::InvalidArgumentError("cannot decode an empty latent sequence");
  }
  NoGradGuard no_grad;
  DecoderOutput out =
      decoder_->Forward(MatrixToTensor(latent.values), phase_map_scale);
  return SpectralPair{TensorToMatrix(out.log_amplitude),
                      TensorToMatrix(out.phase)};
}

absl::StatusOr<EncodedUtterance> CodecModel::EncodeWaveform(
    std::span<const double> waveform) const {
  ASSIGN_OR_RETURN(SpectralPair pair, Analyze(waveform, signal_));
  pair = PadFramesToMultiple(pair, codec_.down_up_ratio);
  ASSIGN_OR_RETURN(LatentSequence latent, Encode(pair));
  ASSIGN_OR_RETURN(QuantizeResult q, Quantize(latent, quantizer_->codebooks()));
  return EncodedUtterance{std::move(q.tokens),
                          static_cast<int64_t>(waveform.size())};
}

absl::StatusOr<std::vector<double>> CodecModel::DecodeTokens(
    const TokenSequence& tokens, int64_t original_samples) const {
  ASSIGN_OR_RETURN(LatentSequence latent,
                   Dequantize(tokens, quantizer_->codebooks()));
  ASSIGN_OR_RETURN(SpectralPair pair, Decode(latent));
  const int64_t frames = FrameCount(original_samples, signal_);
  if (frames > pair.frames()) {
    return absl::InvalidArgumentError(absl::StrCat(
        original_samples, " samples need ", frames, " frames but only ",
        pair.frames(), " were decoded"));
  }
  ASSIGN_OR_RETURN(std::vector<double> wave,
                   Synthesize(TrimFrames(pair, frames), signal_));
  wave.resize(original_samples);
  return wave;
}

}  // namespace apcodec
