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


#include <cstdint>
#include <memory>
#include <random>
#include <vector>

#include "apcodec/bitstream.h"
#include "apcodec/codec_model.h"
#include "apcodec/metrics.h"
#include "apcodec/quantizer.h"
#include "apcodec/spectral_frontend.h"
#include "apcodec/synthetic_audio.h"
#include "benchmark/benchmark.h"

namespace apcodec {
namespace {

std::vector<double> Speech(int64_t samples, int rate) {
  Rng rng(1);
  return SpeechLikeClip(samples, rate, rng);
}

void BM_Analyze(benchmark::State& state) {
  const SignalConfig config;
  const std::vector<double> x = Speech(state.range(0), config.sample_rate);
  for (auto _ : state) {
    auto pair = Analyze(x, config);
    benchmark::DoNotOptimize(pair);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Analyze)->Arg(7960)->Arg(48000);

void BM_Synthesize(benchmark::State& state) {
  const SignalConfig config;
  const auto pair = Analyze(Speech(state.range(0), config.sample_rate), config);
  for (auto _ : state) {
    auto y = Synthesize(*pair, config);
    benchmark::DoNotOptimize(y);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Synthesize)->Arg(7960)->Arg(48000);

// Exhaustive residual quantization of `range(0)` frames with the default
// three 1024-entry codebooks.
void BM_Quantize(benchmark::State& state) {
  const CodecConfig codec;
  Rng rng(2);
  std::normal_distribution<double> normal;
  ResidualVectorQuantizer rvq(codec.num_quantizers, codec.codebook_size,
                              codec.latent_dim, rng);
  Matrix frames(state.range(0), codec.latent_dim);
  for (double& v : frames.values) v = normal(rng);
  const LatentSequence latent{frames};
  for (auto _ : state) {
    auto r = Quantize(latent, rvq.codebooks());
    benchmark::DoNotOptimize(r);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Quantize)->Arg(25)->Arg(150);

void BM_PackUnpack(benchmark::State& state) {
  const SignalConfig signal;
  const CodecConfig codec;
  TokenSequence tokens(state.range(0), codec.num_quantizers);
  std::mt19937 rng(3);
  std::uniform_int_distribution<int32_t> pick(0, codec.codebook_size - 1);
  for (int32_t& v : tokens.indices) v = pick(rng);
  const BitstreamHeader header =
      MakeHeader(signal, codec, tokens.frames, tokens.frames * 320);
  for (auto _ : state) {
    auto bytes = Pack(tokens, header);
    auto back = Unpack(*bytes);
    benchmark::DoNotOptimize(back);
  }
}
BENCHMARK(BM_PackUnpack)->Arg(150);

// Full-size encoder and decoder on a 7960-sample training crop.
class CodecFixture : public benchmark::Fixture {
 public:
  void SetUp(const benchmark::State&) override {
    model_ = std::make_unique<CodecModel>(signal_, codec_, 4);
    auto pair = Analyze(Speech(7960, signal_.sample_rate), signal_);
    pair_ = PadFramesToMultiple(*pair, codec_.down_up_ratio);
    latent_ = *model_->Encode(pair_);
  }
  void TearDown(const benchmark::State&) override { model_.reset(); }

 protected:
  SignalConfig signal_;
  CodecConfig codec_;
  std::unique_ptr<CodecModel> model_;
  SpectralPair pair_;
  LatentSequence latent_;
};

BENCHMARK_DEFINE_F(CodecFixture, Encode)(benchmark::State& state) {
  for (auto _ : state) {
    auto latent = model_->Encode(pair_);
    benchmark::DoNotOptimize(latent);
  }
}
BENCHMARK_REGISTER_F(CodecFixture, Encode)->Unit(benchmark::kMillisecond);

BENCHMARK_DEFINE_F(CodecFixture, Decode)(benchmark::State& state) {
  for (auto _ : state) {
    auto pair = model_->Decode(latent_);
    benchmark::DoNotOptimize(pair);
  }
}
BENCHMARK_REGISTER_F(CodecFixture, Decode)->Unit(benchmark::kMillisecond);

void BM_Lsd(benchmark::State& state) {
  const SignalConfig config;
  const std::vector<double> x = Speech(48000, config.sample_rate);
  std::vector<double> y(x);
  for (double& v : y) v *= 0.9;
  for (auto _ : state) {
    auto lsd = Lsd(x, y, config);
    benchmark::DoNotOptimize(lsd);
  }
}
BENCHMARK(BM_Lsd)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace apcodec

BENCHMARK_MAIN();
