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


// Acceptance suite. Runs every acceptance criterion at its stated tolerance
// and time budget and prints one PASS or FAIL line per criterion. Optional
// arguments select criteria by name substring.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "absl/strings/str_format.h"
#include "apcodec/autograd.h"
#include "apcodec/bitstream.h"
#include "apcodec/checkpoint.h"
#include "apcodec/codec_model.h"
#include "apcodec/discriminators.h"
#include "apcodec/losses.h"
#include "apcodec/metrics.h"
#include "apcodec/quantizer.h"
#include "apcodec/spectral_frontend.h"
#include "apcodec/status_macros.h"
#include "apcodec/staged_training.h"
#include "apcodec/synthetic_audio.h"
#include "test_util.h"

namespace apcodec {
namespace {

using ::apcodec::testing::CheckGradients;
using ::apcodec::testing::GradientCheckConfig;
using ::apcodec::testing::MiniatureConfig;
using ::apcodec::testing::RandomVector;
using ::apcodec::testing::TempDir;

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  double budget_seconds;
  std::function<Outcome()> run;
};

double RelativeL2(const std::vector<double>& x, const std::vector<double>& y) {
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    num += (x[i] - y[i]) * (x[i] - y[i]);
    den += x[i] * x[i];
  }
  return std::sqrt(num / den);
}

Outcome BitrateLaw() {
  const SignalConfig signal;
  CodecConfig codec;
  std::string detail;
  bool pass = true;
  for (const auto& [q, expected] :
       std::vector<std::pair<int, double>>{{3, 4.5}, {4, 6.0}, {8, 12.0}}) {
    codec.num_quantizers = q;
    const double kbps = BitrateKbps(codec, signal);
    pass = pass && kbps == expected;
    detail += absl::StrFormat("Q=%d: %.17g kbps; ", q, kbps);
  }
  detail.resize(detail.size() - 2);
  return {pass, detail};
}

Outcome TransformFidelity() {
  const SignalConfig c;
  Rng rng(101);
  std::vector<std::vector<double>> clips;
  for (int i = 0; i < 20; ++i) clips.push_back(RandomVector(c.sample_rate, rng));
  for (int i = 0; i < 5; ++i) {
    clips.push_back(SpeechLikeClip(c.sample_rate, c.sample_rate, rng));
  }
  double worst = 0.0;
  for (const auto& x : clips) {
    auto pair = Analyze(x, c);
    if (!pair.ok()) return {false, pair.status().ToString()};
    auto y = Synthesize(*pair, c);
    if (!y.ok()) return {false, y.status().ToString()};
    y->resize(x.size());
    worst = std::max(worst, RelativeL2(x, *y));
  }
  return {worst < 1e-4,
          absl::StrFormat("25 clips, worst relative L2 %.3g (%.1f dB)", worst,
                          20.0 * std::log10(worst))};
}

int32_t ScanOracle(const double* x, const Matrix& table) {
  int32_t best = -1;
  double best_dist = std::numeric_limits<double>::infinity();
  for (int64_t k = 0; k < table.rows; ++k) {
    double dist = 0.0;
    for (int64_t d = 0; d < table.cols; ++d) {
      dist += (x[d] - table(k, d)) * (x[d] - table(k, d));
    }
    if (dist < best_dist) {
      best_dist = dist;
      best = static_cast<int32_t>(k);
    }
  }
  return best;
}

Outcome RvqCorrectness() {
  const CodecConfig codec;
  const int dim = codec.latent_dim;
  Rng rng(202);
  std::normal_distribution<double> normal;
  auto random_frames = [&](int64_t n) {
    Matrix m(n, dim);
    for (double& v : m.values) v = normal(rng);
    return m;
  };
  // Codebooks fitted on a disjoint sample of the same distribution.
  ResidualVectorQuantizer rvq(codec.num_quantizers, codec.codebook_size, dim,
                              rng);
  rvq.InitializeFromData(random_frames(4096), QuantizerTrainingOptions(), rng);
  const Codebooks& books = rvq.codebooks();
  const Matrix data = random_frames(1000);
  auto r = Quantize(LatentSequence{data}, books);
  if (!r.ok()) return {false, r.status().ToString()};

  int64_t mismatches = 0;
  std::vector<double> oracle_mse(books.tables.size(), 0.0);
  for (int64_t f = 0; f < data.rows; ++f) {
    std::vector<double> residual(data.values.begin() + f * dim,
                                 data.values.begin() + (f + 1) * dim);
    for (size_t q = 0; q < books.tables.size(); ++q) {
      const int32_t k = ScanOracle(residual.data(), books.tables[q]);
      if (r->tokens.at(f, static_cast<int>(q)) != k) ++mismatches;
      for (int d = 0; d < dim; ++d) {
        residual[d] -= books.tables[q](k, d);
        oracle_mse[q] += residual[d] * residual[d];
      }
    }
  }
  double input_mse = 0.0;
  for (double v : data.values) input_mse += v * v;
  input_mse /= data.values.size();
  bool monotone = true;
  double previous = input_mse;
  std::string mse_text = absl::StrFormat("%.4f", input_mse);
  for (size_t q = 0; q < oracle_mse.size(); ++q) {
    const double mse = oracle_mse[q] / data.values.size();
    monotone = monotone && mse <= previous;
    previous = mse;
    mse_text += absl::StrFormat(" -> %.4f", mse);
  }
  auto deq = Dequantize(r->tokens, books);
  if (!deq.ok()) return {false, deq.status().ToString()};
  const bool exact = deq->values.values == r->quantized.values.values;
  return {mismatches == 0 && monotone && exact,
          absl::StrFormat("1000 frames, %d x %d x %d codebooks, oracle "
                          "mismatches %d, residual MSE %s, dequantize %s",
                          books.tables.size(), codec.codebook_size, dim,
                          mismatches, mse_text,
                          exact ? "bit-exact" : "differs")};
}

Outcome AntiWrapProperties() {
  Rng rng(303);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  std::uniform_int_distribution<int> shift(-20, 20);
  int64_t range_failures = 0, even_failures = 0, period_failures = 0;
  double worst_period = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double x = u(rng);
    const double a = AntiWrap(x);
    if (!(a >= 0.0 && a <= kPi)) ++range_failures;
    if (AntiWrap(-x) != a) ++even_failures;
    const double shifted = AntiWrap(x + 2.0 * kPi * shift(rng));
    const double diff = std::abs(shifted - a);
    worst_period = std::max(worst_period, diff);
    // The shifted argument carries its own rounding; the two agree to the
    // precision of the sum.
    if (diff > 1e-12 * std::max(1.0, std::abs(x) + 40.0 * kPi)) {
      ++period_failures;
    }
  }

  // Phase loss under whole-turn shifts of the prediction.
  const RunConfig config = MiniatureConfig();
  const MelFilterbank mel(config.signal.sample_rate, config.signal.fft_size,
                          config.train.mel_bins, 0.0,
                          config.signal.sample_rate / 2.0);
  double worst_phase = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    SpectralPair target{Matrix(12, config.signal.bins()),
                        Matrix(12, config.signal.bins())};
    target.log_amplitude.values =
        RandomVector(target.log_amplitude.values.size(), rng);
    target.phase.values = RandomVector(target.phase.values.size(), rng, kPi);
    SpectralPair pred = target;
    for (double& p : pred.phase.values) p += 2.0 * kPi * shift(rng);
    auto v = SpectralLosses(pred, target, mel);
    if (!v.ok()) return {false, v.status().ToString()};
    worst_phase = std::max(worst_phase, std::abs(v->phase));
  }
  return {range_failures == 0 && even_failures == 0 && period_failures == 0 &&
              worst_phase < 1e-6,
          absl::StrFormat("1e5 points: range failures %d, evenness failures "
                          "%d, periodicity failures %d (max |diff| %.2g); "
                          "phase loss under +2 pi k shifts max %.2g",
                          range_failures, even_failures, period_failures,
                          worst_period, worst_phase)};
}

Outcome GradientChecks() {
  const RunConfig config = GradientCheckConfig();
  CodecModel model(config.signal, config.codec, 21);
  const Discriminators discriminators(config.discriminator, 21, 0);
  const MelFilterbank mel(config.signal.sample_rate, config.signal.fft_size,
                          config.train.mel_bins, 0.0,
                          config.signal.sample_rate / 2.0);
  Rng rng(22);
  SpectralPair target{Matrix(2, config.signal.bins()),
                      Matrix(2, config.signal.bins())};
  target.log_amplitude.values =
      RandomVector(target.log_amplitude.values.size(), rng, 2.0);
  target.phase.values = RandomVector(target.phase.values.size(), rng, kPi);
  const std::vector<double> real =
      RandomVector(2 * config.signal.frame_shift, rng, 0.5);
  Matrix latents(6, config.codec.latent_dim);
  latents.values = RandomVector(latents.values.size(), rng);
  model.quantizer().InitializeFromData(latents, QuantizerTrainingOptions(),
                                       rng);

  struct Terms {
    SpectralLossTensors spectral;
    Tensor quantization;
    AdversarialLosses adversarial;
  };
  auto run = [&]() {
    const Tensor amplitude = MatrixToTensor(target.log_amplitude);
    const Tensor phase = MatrixToTensor(target.phase);
    const QuantizerTrace trace =
        model.quantizer().Forward(model.encoder().Forward(amplitude, phase));
    Terms t;
    t.quantization = *QuantizationLoss(trace.stage_inputs, trace.stage_outputs);
    const DecoderOutput decoded = model.decoder().Forward(trace.quantized);
    t.spectral = SpectralLossTerms(decoded.log_amplitude, decoded.phase,
                                   amplitude, phase, mel);
    const Tensor magnitude = Exp(decoded.log_amplitude);
    const Tensor wave =
        InverseStft(Mul(magnitude, Cos(decoded.phase)),
                    Mul(magnitude, Sin(decoded.phase)), config.signal);
    const auto real_out = discriminators.Forward(
        Tensor::FromData({static_cast<int64_t>(real.size())}, real));
    const auto fake_out = discriminators.Forward(wave);
    t.adversarial = *AdversarialTerms(*real_out, *fake_out);
    return t;
  };

  // Terms downstream of the quantizer are differentiated with respect to the
  // decoder; the straight-through path has no finite-difference counterpart.
  const std::vector<Tensor> decoder = model.decoder().params().tensors();
  const std::vector<Tensor> encoder = model.encoder().params().tensors();
  const std::vector<Tensor> critic = discriminators.Tensors();
  struct Check {
    std::string name;
    std::function<Tensor(const Terms&)> pick;
    const std::vector<Tensor>* wrt;
  };
  const std::vector<Check> checks = {
      {"amplitude", [](const Terms& t) { return t.spectral.amplitude; }, &decoder},
      {"phase", [](const Terms& t) { return t.spectral.phase; }, &decoder},
      {"mel", [](const Terms& t) { return t.spectral.mel; }, &decoder},
      {"complex", [](const Terms& t) { return t.spectral.complex; }, &decoder},
      {"quantization", [](const Terms& t) { return t.quantization; }, &encoder},
      {"adversarial", [](const Terms& t) { return t.adversarial.generator; }, &decoder},
      {"feature_matching", [](const Terms& t) { return t.adversarial.feature_matching; }, &decoder},
      {"discriminator", [](const Terms& t) { return t.adversarial.discriminator; }, &critic},
  };
  bool pass = true;
  std::string detail;
  for (const Check& check : checks) {
    const auto r =
        CheckGradients([&] { return check.pick(run()); }, *check.wrt, 32);
    pass = pass && r.checked > 0 && r.max_relative_error < 1e-3;
    detail += absl::StrFormat("%s %.1e (%d); ", check.name,
                              r.max_relative_error, r.checked);
  }
  detail.resize(detail.size() - 2);
  return {pass, detail};
}

RunConfig TrainingConfig(int64_t steps) {
  RunConfig c = MiniatureConfig();
  c.train.steps_per_stage = steps;
  c.train.seed = 7;
  return c;
}

Outcome StagedContracts() {
  const std::string dir = TempDir("acceptance_staged");
  const RunConfig config = TrainingConfig(50);
  auto manifest = WriteToyCorpus(dir, 10, 0.5, config.signal.sample_rate, 5);
  if (!manifest.ok()) return {false, manifest.status().ToString()};
  auto corpus = LoadTrainingCorpus(*manifest, config.signal.sample_rate,
                                   config.train.crop_length);
  if (!corpus.ok()) return {false, corpus.status().ToString()};
  auto joint = TrainJoint(config, *corpus);
  if (!joint.ok()) return {false, joint.status().ToString()};
  auto cache = ExportLatents(joint->checkpoint, *manifest);
  if (!cache.ok()) return {false, cache.status().ToString()};
  const std::string frozen = FrozenModuleHash(joint->checkpoint);

  auto start_a = TrainIndividual(joint->checkpoint, *cache, TrainingConfig(0));
  auto start_b = TrainIndividual(joint->checkpoint, *cache, TrainingConfig(0));
  auto trained = TrainIndividual(joint->checkpoint, *cache, config);
  if (!start_a.ok() || !start_b.ok() || !trained.ok()) {
    return {false, "individual stage failed"};
  }
  bool hashes = FrozenModuleHash(trained->checkpoint) == frozen &&
                !trained->freeze_hashes.empty();
  for (const std::string& h : trained->freeze_hashes) {
    hashes = hashes && h == frozen;
  }
  const bool differs =
      start_a->checkpoint.decoder != joint->checkpoint.decoder;
  const bool reproducible =
      start_a->checkpoint.decoder == start_b->checkpoint.decoder;
  int64_t zero_weight = 0;
  for (const StepRecord& r : trained->records) {
    const LossTerm* q = r.generator.Find("quantization");
    if (q != nullptr && q->weight == 0.0) ++zero_weight;
  }
  const bool weights =
      zero_weight == static_cast<int64_t>(trained->records.size()) &&
      trained->records.size() == 50;
  std::filesystem::remove_all(dir);
  return {hashes && differs && reproducible && weights,
          absl::StrFormat("(a) frozen hash %s over %d checks %s; (b) step-0 "
                          "decoder differs %s, reproducible %s; (c) quant "
                          "weight 0 in %d/%d reports",
                          frozen.substr(0, 12), trained->freeze_hashes.size(),
                          hashes ? "stable" : "CHANGED",
                          differs ? "yes" : "no", reproducible ? "yes" : "no",
                          zero_weight, trained->records.size())};
}

double AmplitudePlusMel(const StepRecord& r) {
  return r.generator.Find("amplitude")->value + r.generator.Find("mel")->value;
}

double TailMean(const std::vector<StepRecord>& records, size_t count) {
  const size_t n = std::min(count, records.size());
  double sum = 0.0;
  for (size_t i = records.size() - n; i < records.size(); ++i) {
    sum += AmplitudePlusMel(records[i]);
  }
  return sum / n;
}

// Mean amplitude + mel loss of the checkpoint's reconstruction of every
// training clip, computed on whole utterances without cropping.
absl::StatusOr<double> CorpusAmplitudePlusMel(
    const StageCheckpoint& checkpoint, const TrainingCorpus& corpus) {
  ASSIGN_OR_RETURN(std::unique_ptr<CodecModel> model, BuildModel(checkpoint));
  const RunConfig& c = checkpoint.config;
  const MelFilterbank mel(
      c.signal.sample_rate, c.signal.fft_size, c.train.mel_bins,
      c.train.mel_fmin,
      c.train.mel_fmax > 0.0 ? c.train.mel_fmax : c.signal.sample_rate / 2.0);
  double sum = 0.0;
  for (const std::vector<double>& wave : corpus.waveforms) {
    ASSIGN_OR_RETURN(SpectralPair target, Analyze(wave, c.signal));
    const SpectralPair padded =
        PadFramesToMultiple(target, c.codec.down_up_ratio);
    ASSIGN_OR_RETURN(LatentSequence latent, model->Encode(padded));
    ASSIGN_OR_RETURN(QuantizeResult q,
                     Quantize(latent, model->quantizer().codebooks()));
    ASSIGN_OR_RETURN(SpectralPair decoded, model->Decode(q.quantized));
    ASSIGN_OR_RETURN(SpectralLossValues v,
                     SpectralLosses(TrimFrames(decoded, target.frames()),
                                    target, mel));
    sum += v.amplitude + v.mel;
  }
  return sum / corpus.waveforms.size();
}

Outcome OverfitSmoke() {
  const std::string dir = TempDir("acceptance_overfit");
  const RunConfig config = TrainingConfig(2000);
  auto manifest = WriteToyCorpus(dir, 10, 0.5, config.signal.sample_rate, 9);
  if (!manifest.ok()) return {false, manifest.status().ToString()};
  auto corpus = LoadTrainingCorpus(*manifest, config.signal.sample_rate,
                                   config.train.crop_length);
  if (!corpus.ok()) return {false, corpus.status().ToString()};
  auto joint = TrainJoint(config, *corpus);
  if (!joint.ok()) return {false, joint.status().ToString()};
  const double first = AmplitudePlusMel(joint->records.front());
  const double joint_tail = TailMean(joint->records, 50);

  auto cache = ExportLatents(joint->checkpoint, *manifest);
  if (!cache.ok()) return {false, cache.status().ToString()};
  auto individual = TrainIndividual(joint->checkpoint, *cache, config);
  if (!individual.ok()) return {false, individual.status().ToString()};
  const double individual_tail = TailMean(individual->records, 50);

  auto joint_eval = CorpusAmplitudePlusMel(joint->checkpoint, *corpus);
  auto individual_eval =
      CorpusAmplitudePlusMel(individual->checkpoint, *corpus);
  if (!joint_eval.ok() || !individual_eval.ok()) {
    return {false, "evaluation failed"};
  }
  std::filesystem::remove_all(dir);
  const bool reduced = joint_tail < 0.5 * first;
  const bool held = *individual_eval <= *joint_eval;
  return {reduced && held,
          absl::StrFormat("joint: step-1 %.3f, last-50 mean %.3f (ratio "
                          "%.3f); corpus eval joint %.3f vs individual %.3f; "
                          "individual last-50 mean %.3f",
                          first, joint_tail, joint_tail / first, *joint_eval,
                          *individual_eval, individual_tail)};
}

Outcome BitstreamRoundTrip() {
  std::mt19937 rng(404);
  std::uniform_int_distribution<int> frames(0, 200), q(1, 8), bits(1, 16);
  const SignalConfig signal;
  int failures = 0;
  for (int i = 0; i < 500; ++i) {
    CodecConfig codec;
    codec.num_quantizers = q(rng);
    const int nb = bits(rng);
    codec.codebook_size = 1 << nb;
    const int64_t f = frames(rng);
    TokenSequence tokens(f, codec.num_quantizers);
    std::uniform_int_distribution<int32_t> pick(0, codec.codebook_size - 1);
    for (int32_t& v : tokens.indices) v = pick(rng);
    const BitstreamHeader header =
        MakeHeader(signal, codec, f, f * signal.frame_shift * 8);
    const auto bytes = Pack(tokens, header);
    if (!bytes.ok()) {
      ++failures;
      continue;
    }
    const auto back = Unpack(*bytes);
    if (!back.ok() || back->tokens != tokens || !(back->header == header)) {
      ++failures;
    }
  }
  const CodecConfig codec;
  const int64_t latent_frames =
      (FrameCount(signal.sample_rate, signal) + codec.down_up_ratio - 1) /
      codec.down_up_ratio;
  const BitstreamHeader one_second =
      MakeHeader(signal, codec, latent_frames, signal.sample_rate);
  const size_t payload = PayloadBytes(one_second);
  const size_t expected = (4500 + 7) / 8;
  return {failures == 0 && payload == expected,
          absl::StrFormat("500 shapes, %d failures; 1 s at Q=3: %d latent "
                          "frames, %d payload bytes (4.5 kbps = %d) + %d "
                          "header bytes",
                          failures, latent_frames, payload, expected,
                          kBitstreamHeaderBytes)};
}

Outcome MetricsSanity() {
  const SignalConfig c;
  Rng rng(505);
  double worst_identity = 0.0, worst_awpd = 0.0, worst_double = 0.0;
  const double expected = 20.0 * std::log10(2.0);
  for (int i = 0; i < 10; ++i) {
    const std::vector<double> x = SpeechLikeClip(c.sample_rate / 2, c.sample_rate, rng);
    std::vector<double> doubled(x);
    for (double& v : doubled) v *= 2.0;
    auto same = Lsd(x, x, c);
    auto awpd = Awpd(x, x, c);
    auto twice = Lsd(doubled, x, c);
    if (!same.ok() || !awpd.ok() || !twice.ok()) return {false, "metric error"};
    worst_identity = std::max(worst_identity, std::abs(*same));
    worst_awpd = std::max({worst_awpd, std::abs(awpd->ip), std::abs(awpd->gd),
                           std::abs(awpd->iaf)});
    worst_double = std::max(worst_double, std::abs(*twice - expected));
  }
  return {worst_identity == 0.0 && worst_awpd == 0.0 && worst_double <= 1e-3,
          absl::StrFormat("10 clips: max lsd(x,x) %.3g, max awpd component "
                          "%.3g, max |lsd(2x,x) - 6.0206| %.2g dB",
                          worst_identity, worst_awpd, worst_double)};
}

}  // namespace
}  // namespace apcodec

int main(int argc, char** argv) {
  using apcodec::Criterion;
  const std::vector<Criterion> criteria = {
      {"bitrate_law", 1, apcodec::BitrateLaw},
      {"transform_fidelity", 10, apcodec::TransformFidelity},
      {"rvq_correctness", 30, apcodec::RvqCorrectness},
      {"anti_wrap_properties", 60, apcodec::AntiWrapProperties},
      {"gradient_checks", 60, apcodec::GradientChecks},
      {"staged_training_contracts", 600, apcodec::StagedContracts},
      {"overfit_smoke", 1800, apcodec::OverfitSmoke},
      {"bitstream", 10, apcodec::BitstreamRoundTrip},
      {"metrics_sanity", 60, apcodec::MetricsSanity},
  };
  int failed = 0, ran = 0;
  for (const Criterion& c : criteria) {
    bool selected = argc < 2;
    for (int i = 1; i < argc; ++i) {
      selected = selected || c.name.find(argv[i]) != std::string::npos;
    }
    if (!selected) continue;
    ++ran;
    const auto start = std::chrono::steady_clock::now();
    const apcodec::Outcome outcome = c.run();
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    const bool pass = outcome.pass && seconds <= c.budget_seconds;
    if (!pass) ++failed;
    std::printf("%s %s (%s; %.2f s of %.0f s budget)\n",
                pass ? "PASS" : "FAIL", c.name.c_str(), outcome.detail.c_str(),
                seconds, c.budget_seconds);
    std::fflush(stdout);
  }
  std::printf("%d/%d acceptance criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
