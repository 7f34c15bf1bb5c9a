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

#include "apcodec/staged_training.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <future>
#include <memory>
#include <numeric>
#include <thread>

#include "absl/cleanup/cleanup.h"
#include "absl/strings/str_cat.h"
#include "apcodec/bitstream.h"
#include "apcodec/discriminators.h"
#include "apcodec/file_util.h"
#include "apcodec/optimizer.h"
#include "apcodec/spectral_frontend.h"
#include "apcodec/status_macros.h"
#include "apcodec/wav_io.h"
#include "glog/logging.h"
#include "json.hpp"

namespace apcodec {
namespace {

using json = nlohmann::json;

constexpr char kEncoderModule[] = "encoder";
constexpr char kQuantizerModule[] = "quantizer";

Matrix SliceMatrixRows(const Matrix& m, int64_t start, int64_t count) {
  Matrix out(count, m.cols);
  std::copy_n(m.values.begin() + start * m.cols, count * m.cols,
              out.values.begin());
  return out;
}

QuantizerTrainingOptions QuantizerOptions(const TrainConfig& train) {
  QuantizerTrainingOptions o;
  o.ema_decay = train.ema_decay;
  o.dead_code_window = train.dead_code_window;
  o.kmeans_iterations = train.kmeans_iterations;
  return o;
}

AdamWOptions OptimizerOptions(const TrainConfig& train) {
  AdamWOptions o;
  o.beta1 = train.beta1;
  o.beta2 = train.beta2;
  o.weight_decay = train.weight_decay;
  o.max_grad_norm = train.max_grad_norm;
  return o;
}

double MelFmax(const RunConfig& config) {
  return config.train.mel_fmax > 0.0 ? config.train.mel_fmax
                                     : config.signal.sample_rate / 2.0;
}

// A training example: target spectra, the real waveform segment they were
// computed from, and (individual stage) the cached quantized latent.
struct Example {
  SpectralPair target;
  std::vector<double> real;
  Matrix latent;  // empty in the joint stage
};

// Draws batches of examples. The joint stage crops waveforms; the
// individual stage crops cached latents on latent-frame boundaries.
class ExampleSource {
 public:
  virtual ~ExampleSource() = default;
  virtual int64_t size() const = 0;
  virtual absl::StatusOr<Example> Make(int64_t index, Rng& rng) const = 0;
};

class WaveformCrops : public ExampleSource {
 public:
  WaveformCrops(const TrainingCorpus& corpus, const RunConfig& config)
      : corpus_(corpus), config_(config) {}
  int64_t size() const override { return corpus_.waveforms.size(); }
  absl::StatusOr<Example> Make(int64_t index, Rng& rng) const override {
    const std::vector<double>& wave = corpus_.waveforms[index];
    const int64_t crop = config_.train.crop_length;
    std::uniform_int_distribution<int64_t> pick(0, wave.size() - crop);
    const int64_t start = pick(rng);
    Example ex;
    ex.real.assign(wave.begin() + start, wave.begin() + start + crop);
    ASSIGN_OR_RETURN(SpectralPair pair, Analyze(ex.real, config_.signal));
    ex.target = PadFramesToMultiple(pair, config_.codec.down_up_ratio);
    return ex;
  }

 private:
  const TrainingCorpus& corpus_;
  const RunConfig& config_;
};

class LatentCrops : public ExampleSource {
 public:
  struct Utterance {
    SpectralPair spectra;  // latent_frames * down_up_ratio frames
    Matrix latent;
    std::vector<double> wave;
  };

  LatentCrops(std::vector<Utterance> utterances, const RunConfig& config,
              int64_t window)
      : utterances_(std::move(utterances)), config_(config), window_(window) {}
  int64_t size() const override { return utterances_.size(); }
  absl::StatusOr<Example> Make(int64_t index, Rng& rng) const override {
    const Utterance& u = utterances_[index];
    const int64_t ratio = config_.codec.down_up_ratio;
    const int64_t shift = config_.signal.frame_shift;
    std::uniform_int_distribution<int64_t> pick(0, u.latent.rows - window_);
    const int64_t start = pick(rng);
    Example ex;
    ex.latent = SliceMatrixRows(u.latent, start, window_);
    ex.target.log_amplitude =
        SliceMatrixRows(u.spectra.log_amplitude, start * ratio, window_ * ratio);
    ex.target.phase =
        SliceMatrixRows(u.spectra.phase, start * ratio, window_ * ratio);
    const int64_t begin = start * ratio * shift;
    const int64_t length = window_ * ratio * shift;
    ex.real.assign(length, 0.0);
    const int64_t available =
        std::max<int64_t>(0, std::min<int64_t>(length, u.wave.size() - begin));
    std::copy_n(u.wave.begin() + begin, available, ex.real.begin());
    return ex;
  }

 private:
  std::vector<Utterance> utterances_;
  const RunConfig& config_;
  int64_t window_;
};

// Shuffled passes over the example indices.
class BatchSampler {
 public:
  BatchSampler(int64_t size, Rng& rng) : size_(size), rng_(rng) {}
  std::vector<int64_t> Next(int batch) {
    std::vector<int64_t> out;
    while (static_cast<int>(out.size()) < batch) {
      if (cursor_ >= order_.size()) {
        order_.resize(size_);
        std::iota(order_.begin(), order_.end(), 0);
        std::shuffle(order_.begin(), order_.end(), rng_);
        cursor_ = 0;
      }
      out.push_back(order_[cursor_++]);
    }
    return out;
  }

 private:
  int64_t size_;
  Rng& rng_;
  std::vector<int64_t> order_;
  size_t cursor_ = 0;
};

struct StageSetup {
  std::string tag;
  bool individual = false;
  // Adversarial and feature-matching terms (and discriminator updates).
  bool adversarial = true;
  uint64_t generation = 0;
  std::string frozen_hash;  // individual stage: hash that must not change
};

class StageRunner {
 public:
  StageRunner(const RunConfig& config, const StageSetup& setup,
              CodecModel& model, Discriminators& discriminators)
      : config_(config),
        setup_(setup),
        model_(model),
        discriminators_(discriminators),
        mel_(config.signal.sample_rate, config.signal.fft_size,
             config.train.mel_bins, config.train.mel_fmin, MelFmax(config)),
        generator_opt_(GeneratorTensors(), OptimizerOptions(config.train)),
        discriminator_opt_(discriminators.Tensors(),
                           OptimizerOptions(config.train)),
        data_rng_(ComponentRng(config.train.seed, Component::kData,
                               setup.generation)),
        quantizer_rng_(ComponentRng(config.train.seed,
                                    Component::kQuantizerTraining,
                                    setup.generation)) {}

  absl::StatusOr<StageResult> Run(const ExampleSource& source,
                                  const StageOptions& options) {
    StageResult result;
    std::ofstream log;
    if (!options.loss_log_path.empty()) {
      const auto parent =
          std::filesystem::path(options.loss_log_path).parent_path();
      if (!parent.empty()) std::filesystem::create_directories(parent);
      log.open(options.loss_log_path, std::ios::app);
      if (!log) {
        return absl::UnavailableError(
            absl::StrCat("cannot open loss log ", options.loss_log_path));
      }
    }
    const int batch = config_.train.batch_size;
    const int64_t steps_per_epoch = (source.size() + batch - 1) / batch;
    BatchSampler sampler(source.size(), data_rng_);
    if (setup_.individual) RETURN_IF_ERROR(CheckFrozen(result));

    for (int64_t step = 0; step < config_.train.steps_per_stage; ++step) {
      std::vector<Example> examples;
      for (int64_t index : sampler.Next(batch)) {
        ASSIGN_OR_RETURN(Example ex, source.Make(index, data_rng_));
        examples.push_back(std::move(ex));
      }
      if (!setup_.individual && !model_.quantizer().initialized()) {
        RETURN_IF_ERROR(InitializeQuantizer(examples));
      }
      StepRecord record;
      record.stage_tag = setup_.tag;
      record.step = step + 1;
      record.epoch = step / steps_per_epoch;
      record.learning_rate =
          StageLearningRate(config_.train, step, steps_per_epoch);
      ASSIGN_OR_RETURN(record.generator, Step(examples, record.learning_rate,
                                              &record.discriminator_loss));
      if (setup_.individual &&
          ((step + 1) % config_.train.freeze_check_interval == 0 ||
           step + 1 == config_.train.steps_per_stage)) {
        RETURN_IF_ERROR(CheckFrozen(result));
      }
      if (log.is_open()) log << StepRecordJson(record) << "\n" << std::flush;
      if (options.on_step) options.on_step(record);
      result.records.push_back(std::move(record));
    }

    result.checkpoint =
        CaptureCheckpoint(config_, model_, &discriminators_);
    result.checkpoint.stage_tag = setup_.tag;
    result.checkpoint.steps = config_.train.steps_per_stage;
    result.checkpoint.generator_optimizer = generator_opt_.GetState();
    result.checkpoint.discriminator_optimizer = discriminator_opt_.GetState();
    if (setup_.individual) {
      result.checkpoint.frozen_manifest = {kEncoderModule, kQuantizerModule};
    }
    return result;
  }

 private:
  std::vector<Tensor> GeneratorTensors() const {
    std::vector<Tensor> out;
    if (!setup_.individual) out = model_.encoder().params().tensors();
    for (const Tensor& t : model_.decoder().params().tensors()) {
      out.push_back(t);
    }
    return out;
  }

  absl::Status CheckFrozen(StageResult& result) const {
    std::string hash = FrozenModuleHash(model_);
    if (hash != setup_.frozen_hash) {
      return absl::InternalError(absl::StrCat(
          "frozen encoder/quantizer changed during the individual stage: ",
          hash, " != ", setup_.frozen_hash));
    }
    result.freeze_hashes.push_back(std::move(hash));
    return absl::OkStatus();
  }

  absl::Status InitializeQuantizer(const std::vector<Example>& examples) {
    NoGradGuard no_grad;
    Matrix rows(0, config_.codec.latent_dim);
    for (const Example& ex : examples) {
      ASSIGN_OR_RETURN(LatentSequence latent, model_.Encode(ex.target));
      rows.values.insert(rows.values.end(), latent.values.values.begin(),
                         latent.values.values.end());
      rows.rows += latent.frames();
    }
    model_.quantizer().InitializeFromData(
        rows, QuantizerOptions(config_.train), quantizer_rng_);
    return absl::OkStatus();
  }

  struct Forward {
    DecoderOutput decoded;
    Tensor generated;  // waveform
    Tensor real;
    SpectralLossTensors spectral;
    Tensor quantization;  // undefined in the individual stage
    QuantizerTrace trace;
  };

  absl::StatusOr<Forward> GeneratorForward(const Example& ex) const {
    Forward f;
    const Tensor amplitude = MatrixToTensor(ex.target.log_amplitude);
    const Tensor phase = MatrixToTensor(ex.target.phase);
    Tensor latent;
    if (setup_.individual) {
      latent = MatrixToTensor(ex.latent);
    } else {
      f.trace = model_.quantizer().Forward(model_.encoder().Forward(amplitude, phase));
      ASSIGN_OR_RETURN(f.quantization, QuantizationLoss(f.trace.stage_inputs,
                                                        f.trace.stage_outputs));
      latent = f.trace.quantized;
    }
    f.decoded = model_.decoder().Forward(latent);
    f.spectral = SpectralLossTerms(f.decoded.log_amplitude, f.decoded.phase,
                                   amplitude, phase, mel_);
    const Tensor magnitude = Exp(f.decoded.log_amplitude);
    Tensor wave = InverseStft(Mul(magnitude, Cos(f.decoded.phase)),
                              Mul(magnitude, Sin(f.decoded.phase)),
                              config_.signal);
    const int64_t length = static_cast<int64_t>(ex.real.size());
    if (wave.dim(0) > length) wave = SliceRows(wave, 0, length);
    f.generated = wave;
    f.real = Tensor::FromData({length}, ex.real);
    return f;
  }

  absl::StatusOr<LossReport> Step(const std::vector<Example>& examples,
                                  double lr, double* discriminator_loss) {
    const double inv_batch = 1.0 / examples.size();
    std::vector<Forward> forwards;
    for (const Example& ex : examples) {
      ASSIGN_OR_RETURN(Forward f, GeneratorForward(ex));
      forwards.push_back(std::move(f));
    }

    *discriminator_loss = 0.0;
    if (setup_.adversarial) {
      discriminator_opt_.ZeroGrad();
      for (const Forward& f : forwards) {
        ASSIGN_OR_RETURN(DiscriminatorOutput real,
                         discriminators_.Forward(f.real));
        ASSIGN_OR_RETURN(DiscriminatorOutput fake,
                         discriminators_.Forward(f.generated.Detach()));
        ASSIGN_OR_RETURN(AdversarialLosses adv, AdversarialTerms(real, fake));
        Scale(adv.discriminator, inv_batch).Backward();
        *discriminator_loss += adv.discriminator.item() * inv_batch;
      }
      discriminator_opt_.Step(lr);
    }

    const LossWeights& w = config_.weights;
    const double quant_weight =
        setup_.individual ? 0.0 : w.quantization * config_.train.commitment_weight;
    const double adv_weight = setup_.adversarial ? w.adversarial : 0.0;
    const double fm_weight = setup_.adversarial ? w.feature_matching : 0.0;
    double amp = 0, phase = 0, mel = 0, complex = 0, quant = 0, adv = 0, fm = 0;
    generator_opt_.ZeroGrad();
    const std::vector<Tensor> discriminator_params = discriminators_.Tensors();
    for (Tensor t : discriminator_params) t.set_requires_grad(false);
    absl::Cleanup restore = [&discriminator_params] {
      for (Tensor t : discriminator_params) t.set_requires_grad(true);
    };
    for (const Forward& f : forwards) {
      Tensor total = Add(Add(Scale(f.spectral.amplitude, w.amplitude),
                             Scale(f.spectral.phase, w.phase)),
                         Add(Scale(f.spectral.mel, w.mel),
                             Scale(f.spectral.complex, w.complex)));
      amp += f.spectral.amplitude.item();
      phase += f.spectral.phase.item();
      mel += f.spectral.mel.item();
      complex += f.spectral.complex.item();
      if (!setup_.individual) {
        total = Add(total, Scale(f.quantization, quant_weight));
        quant += f.quantization.item();
      }
      if (setup_.adversarial) {
        DiscriminatorOutput real;
        {
          NoGradGuard no_grad;
          ASSIGN_OR_RETURN(real, discriminators_.Forward(f.real));
        }
        ASSIGN_OR_RETURN(DiscriminatorOutput fake,
                         discriminators_.Forward(f.generated));
        ASSIGN_OR_RETURN(AdversarialLosses a, AdversarialTerms(real, fake));
        total = Add(total, Add(Scale(a.generator, adv_weight),
                               Scale(a.feature_matching, fm_weight)));
        adv += a.generator.item();
        fm += a.feature_matching.item();
      }
      Scale(total, inv_batch).Backward();
    }
    generator_opt_.Step(lr);

    if (!setup_.individual) UpdateCodebooks(forwards);

    LossReport report;
    report.Add("amplitude", w.amplitude, amp * inv_batch);
    report.Add("phase", w.phase, phase * inv_batch);
    report.Add("mel", w.mel, mel * inv_batch);
    report.Add("complex", w.complex, complex * inv_batch);
    report.Add("quantization", quant_weight, quant * inv_batch);
    report.Add("adversarial", adv_weight, adv * inv_batch);
    report.Add("feature_matching", fm_weight, fm * inv_batch);
    return report;
  }

  void UpdateCodebooks(const std::vector<Forward>& forwards) {
    const int stages = config_.codec.num_quantizers;
    const int64_t dim = config_.codec.latent_dim;
    std::vector<Matrix> inputs(stages, Matrix(0, dim));
    std::vector<std::vector<int32_t>> tokens(stages);
    for (const Forward& f : forwards) {
      for (int q = 0; q < stages; ++q) {
        auto values = f.trace.stage_inputs[q].data();
        inputs[q].values.insert(inputs[q].values.end(), values.begin(),
                                values.end());
        inputs[q].rows += f.trace.tokens.frames;
        for (int64_t t = 0; t < f.trace.tokens.frames; ++t) {
          tokens[q].push_back(f.trace.tokens.at(t, q));
        }
      }
    }
    model_.quantizer().UpdateEma(inputs, tokens, QuantizerOptions(config_.train),
                                 quantizer_rng_);
  }

  const RunConfig& config_;
  StageSetup setup_;
  CodecModel& model_;
  Discriminators& discriminators_;
  MelFilterbank mel_;
  AdamW generator_opt_;
  AdamW discriminator_opt_;
  Rng data_rng_;
  Rng quantizer_rng_;
};

absl::StatusOr<StageResult> RunJoint(const RunConfig& config,
                                     const TrainingCorpus& corpus,
                                     const StageCheckpoint* start,
                                     const StageOptions& options) {
  RETURN_IF_ERROR(config.Validate());
  if (corpus.waveforms.empty()) {
    return absl::InvalidArgumentError("training corpus is empty");
  }
  for (const auto& wave : corpus.waveforms) {
    if (static_cast<int64_t>(wave.size()) < config.train.crop_length) {
      return absl::InvalidArgumentError(
          "training corpus holds a clip shorter than crop_length");
    }
  }
  const uint64_t seed = config.train.seed;
  std::unique_ptr<CodecModel> model;
  Discriminators discriminators(config.discriminator, seed, 0);
  StageSetup setup;
  setup.tag = StageTag(/*individual=*/false, options.iteration);
  setup.adversarial = config.train.adversarial_in_joint;
  setup.generation = 2 * static_cast<uint64_t>(options.iteration);
  if (start != nullptr) {
    RETURN_IF_ERROR(CheckCompatible(config, *start));
    ASSIGN_OR_RETURN(model, BuildModel(*start));
    RETURN_IF_ERROR(RestoreDiscriminators(*start, discriminators));
  } else {
    model = std::make_unique<CodecModel>(config.signal, config.codec, seed);
  }
  StageRunner runner(config, setup, *model, discriminators);
  ASSIGN_OR_RETURN(StageResult result,
                   runner.Run(WaveformCrops(corpus, config), options));
  if (start != nullptr) result.checkpoint.parent_hash = FrozenModuleHash(*start);
  return result;
}

}  // namespace

absl::StatusOr<TrainingCorpus> LoadTrainingCorpus(
    const std::vector<ManifestEntry>& manifest, int sample_rate,
    int64_t min_samples) {
  if (manifest.empty()) {
    return absl::InvalidArgumentError("training manifest is empty");
  }
  TrainingCorpus corpus;
  for (const ManifestEntry& entry : manifest) {
    absl::StatusOr<WavData> wav = ReadWavAtRate(entry.path, sample_rate);
    if (!wav.ok()) {
      LOG(WARNING) << "skipping " << entry.id << ": " << wav.status().message();
      continue;
    }
    if (static_cast<int64_t>(wav->samples.size()) < min_samples) {
      LOG(WARNING) << "skipping " << entry.id << ": " << wav->samples.size()
                   << " samples is shorter than the crop length "
                   << min_samples;
      continue;
    }
    corpus.entries.push_back(entry);
    corpus.waveforms.push_back(std::move(wav->samples));
  }
  if (corpus.entries.empty()) {
    return absl::InvalidArgumentError(
        "every manifest entry was skipped; nothing to train on");
  }
  return corpus;
}

std::string StepRecordJson(const StepRecord& record) {
  json terms = json::array();
  for (const LossTerm& t : record.generator.terms) {
    terms.push_back({{"name", t.name}, {"weight", t.weight}, {"value", t.value}});
  }
  return json{{"stage", record.stage_tag},
              {"step", record.step},
              {"epoch", record.epoch},
              {"lr", record.learning_rate},
              {"terms", terms},
              {"total", record.generator.total},
              {"discriminator", record.discriminator_loss}}
      .dump();
}

double StageLearningRate(const TrainConfig& train, int64_t step,
                         int64_t steps_per_epoch) {
  return ExponentialLr(train.initial_lr, train.lr_decay_per_epoch,
                       step / std::max<int64_t>(1, steps_per_epoch));
}

absl::StatusOr<StageResult> TrainJoint(const RunConfig& config,
                                       const TrainingCorpus& corpus,
                                       const StageOptions& options) {
  return RunJoint(config, corpus, nullptr, options);
}

absl::StatusOr<StageResult> FineTuneJoint(const StageCheckpoint& start,
                                          const RunConfig& config,
                                          const TrainingCorpus& corpus,
                                          const StageOptions& options) {
  return RunJoint(config, corpus, &start, options);
}

absl::Status CheckCompatible(const RunConfig& config,
                             const StageCheckpoint& checkpoint) {
  if (!(config.signal == checkpoint.config.signal) ||
      !(config.codec == checkpoint.config.codec)) {
    return absl::FailedPreconditionError(
        "checkpoint signal/codec configuration differs from the run "
        "configuration");
  }
  return absl::OkStatus();
}

absl::StatusOr<LatentCache> ExportLatents(
    const StageCheckpoint& checkpoint,
    const std::vector<ManifestEntry>& manifest) {
  if (IsIndividualTag(checkpoint.stage_tag)) {
    return absl::FailedPreconditionError(absl::StrCat(
        "latents must be exported from a joint-stage checkpoint, got '",
        checkpoint.stage_tag, "'"));
  }
  if (manifest.empty()) {
    return absl::InvalidArgumentError("export manifest is empty");
  }
  ASSIGN_OR_RETURN(std::unique_ptr<CodecModel> model, BuildModel(checkpoint));
  const CodecModel& frozen = *model;
  const int rate = checkpoint.config.signal.sample_rate;
  auto encode_one = [&frozen, rate](const ManifestEntry& entry)
      -> absl::StatusOr<LatentCacheEntry> {
    ASSIGN_OR_RETURN(WavData wav, ReadWavAtRate(entry.path, rate));
    ASSIGN_OR_RETURN(EncodedUtterance enc, frozen.EncodeWaveform(wav.samples));
    return LatentCacheEntry{entry.id, entry.path, enc.original_samples,
                            std::move(enc.tokens)};
  };

  LatentCache cache;
  cache.checkpoint_hash = FrozenModuleHash(checkpoint);
  cache.stage_tag = checkpoint.stage_tag;
  cache.signal = checkpoint.config.signal;
  cache.codec = checkpoint.config.codec;
  const size_t threads =
      std::max<size_t>(1, std::thread::hardware_concurrency());
  for (size_t begin = 0; begin < manifest.size(); begin += threads) {
    const size_t end = std::min(manifest.size(), begin + threads);
    std::vector<std::future<absl::StatusOr<LatentCacheEntry>>> pending;
    for (size_t i = begin; i < end; ++i) {
      pending.push_back(
          std::async(std::launch::async, encode_one, std::cref(manifest[i])));
    }
    for (size_t i = begin; i < end; ++i) {
      absl::StatusOr<LatentCacheEntry> entry = pending[i - begin].get();
      if (!entry.ok()) {
        return absl::Status(entry.status().code(),
                            absl::StrCat(manifest[i].id, ": ",
                                         entry.status().message()));
      }
      cache.entries.push_back(std::move(*entry));
    }
  }
  return cache;
}

absl::Status WriteLatentCache(const LatentCache& cache,
                              const std::string& dir) {
  std::filesystem::create_directories(dir);
  RunConfig shape;
  shape.signal = cache.signal;
  shape.codec = cache.codec;
  json entries = json::array();
  for (const LatentCacheEntry& e : cache.entries) {
    if (e.id.find('/') != std::string::npos || e.id.empty()) {
      return absl::InvalidArgumentError(
          absl::StrCat("utterance id '", e.id, "' is not a valid file name"));
    }
    const std::string file = e.id + ".apc";
    ASSIGN_OR_RETURN(std::vector<uint8_t> bytes,
                     Pack(e.tokens, MakeHeader(cache.signal, cache.codec,
                                               e.tokens.frames,
                                               e.original_samples)));
    RETURN_IF_ERROR(WriteFileAtomically(
        (std::filesystem::path(dir) / file).string(), bytes));
    entries.push_back({{"id", e.id},
                       {"file", file},
                       {"audio_path", e.audio_path},
                       {"original_samples", e.original_samples},
                       {"latent_frames", e.tokens.frames}});
  }
  const json index = {{"checkpoint_hash", cache.checkpoint_hash},
                      {"stage_tag", cache.stage_tag},
                      {"config", ToConfigText(shape)},
                      {"entries", entries}};
  return WriteFileAtomically((std::filesystem::path(dir) / "index.json").string(),
                             index.dump(2) + "\n");
}

absl::StatusOr<LatentCache> ReadLatentCache(const std::string& dir) {
  const std::filesystem::path base(dir);
  ASSIGN_OR_RETURN(std::vector<uint8_t> bytes,
                   ReadFileBytes((base / "index.json").string()));
  const json index = json::parse(bytes.begin(), bytes.end(), nullptr,
                                 /*allow_exceptions=*/false);
  if (index.is_discarded()) {
    return absl::DataLossError("latent cache index is not valid JSON");
  }
  LatentCache cache;
  try {
    cache.checkpoint_hash = index.at("checkpoint_hash").get<std::string>();
    cache.stage_tag = index.at("stage_tag").get<std::string>();
    RunConfig shape;
    RETURN_IF_ERROR(ApplyConfigText(shape, index.at("config").get<std::string>()));
    cache.signal = shape.signal;
    cache.codec = shape.codec;
    for (const auto& e : index.at("entries")) {
      LatentCacheEntry entry;
      entry.id = e.at("id").get<std::string>();
      entry.audio_path = e.at("audio_path").get<std::string>();
      entry.original_samples = e.at("original_samples").get<int64_t>();
      ASSIGN_OR_RETURN(std::vector<uint8_t> stream,
                       ReadFileBytes((base / e.at("file").get<std::string>()).string()));
      ASSIGN_OR_RETURN(UnpackedStream unpacked, Unpack(stream));
      const BitstreamHeader expected =
          MakeHeader(cache.signal, cache.codec, unpacked.tokens.frames,
                     entry.original_samples);
      if (!(unpacked.header == expected) ||
          unpacked.tokens.frames != e.at("latent_frames").get<int64_t>()) {
        return absl::DataLossError(
            absl::StrCat("cache entry ", entry.id, " disagrees with the index"));
      }
      entry.tokens = std::move(unpacked.tokens);
      cache.entries.push_back(std::move(entry));
    }
  } catch (const json::exception& e) {
    return absl::DataLossError(
        absl::StrCat("malformed latent cache index: ", e.what()));
  }
  return cache;
}

absl::StatusOr<StageResult> TrainIndividual(const StageCheckpoint& joint,
                                            const LatentCache& cache,
                                            const RunConfig& config,
                                            const StageOptions& options) {
  RETURN_IF_ERROR(config.Validate());
  RETURN_IF_ERROR(CheckCompatible(config, joint));
  if (IsIndividualTag(joint.stage_tag)) {
    return absl::FailedPreconditionError(
        "the individual stage must start from a joint-stage checkpoint");
  }
  const std::string joint_hash = FrozenModuleHash(joint);
  if (cache.checkpoint_hash != joint_hash) {
    return absl::FailedPreconditionError(absl::StrCat(
        "stale latent cache: produced by ", cache.checkpoint_hash,
        " but the joint checkpoint hashes to ", joint_hash));
  }
  if (!(cache.signal == config.signal) || !(cache.codec == config.codec)) {
    return absl::FailedPreconditionError(
        "latent cache configuration differs from the run configuration");
  }
  if (cache.entries.empty()) {
    return absl::InvalidArgumentError("latent cache is empty");
  }

  ASSIGN_OR_RETURN(std::unique_ptr<CodecModel> model, BuildModel(joint));
  const uint64_t generation = 2 * static_cast<uint64_t>(options.iteration) + 1;
  model->ReinitializeDecoder(config.train.seed, generation);
  Discriminators discriminators(config.discriminator, config.train.seed,
                                generation);

  const int64_t ratio = config.codec.down_up_ratio;
  const int64_t block = ratio * config.signal.frame_shift;
  const int64_t window = (config.train.crop_length + block - 1) / block;
  std::vector<LatentCrops::Utterance> utterances;
  for (const LatentCacheEntry& e : cache.entries) {
    if (e.tokens.frames < window) {
      LOG(WARNING) << "skipping " << e.id << ": " << e.tokens.frames
                   << " latent frames is shorter than the crop window "
                   << window;
      continue;
    }
    ASSIGN_OR_RETURN(WavData wav,
                     ReadWavAtRate(e.audio_path, config.signal.sample_rate));
    if (static_cast<int64_t>(wav.samples.size()) != e.original_samples) {
      return absl::FailedPreconditionError(absl::StrCat(
          "audio for ", e.id, " changed since the latents were exported"));
    }
    ASSIGN_OR_RETURN(SpectralPair pair, Analyze(wav.samples, config.signal));
    pair = PadFramesToMultiple(pair, ratio);
    if (pair.frames() != e.tokens.frames * ratio) {
      return absl::FailedPreconditionError(
          absl::StrCat("cache entry ", e.id, " has the wrong frame count"));
    }
    ASSIGN_OR_RETURN(LatentSequence latent,
                     Dequantize(e.tokens, model->quantizer().codebooks()));
    utterances.push_back(LatentCrops::Utterance{
        std::move(pair), std::move(latent.values), std::move(wav.samples)});
  }
  if (utterances.empty()) {
    return absl::InvalidArgumentError(
        "every cache entry is shorter than the crop window");
  }

  StageSetup setup;
  setup.tag = StageTag(/*individual=*/true, options.iteration);
  setup.individual = true;
  setup.adversarial = true;
  setup.generation = generation;
  setup.frozen_hash = joint_hash;
  StageRunner runner(config, setup, *model, discriminators);
  ASSIGN_OR_RETURN(
      StageResult result,
      runner.Run(LatentCrops(std::move(utterances), config, window), options));
  result.checkpoint.parent_hash = joint_hash;
  return result;
}

absl::StatusOr<std::vector<IterationOutput>> TrainIterative(
    const StageCheckpoint& start, const RunConfig& config,
    const std::vector<ManifestEntry>& manifest, int iterations,
    const std::string& cache_root, const StageOptions& options) {
  if (iterations < 1) {
    return absl::InvalidArgumentError("iterations must be at least 1");
  }
  ASSIGN_OR_RETURN(TrainingCorpus corpus,
                   LoadTrainingCorpus(manifest, config.signal.sample_rate,
                                      config.train.crop_length));
  std::vector<IterationOutput> outputs;
  StageCheckpoint current = start;
  for (int k = 1; k <= iterations; ++k) {
    StageOptions stage_options = options;
    stage_options.iteration = k;
    ASSIGN_OR_RETURN(StageResult joint,
                     FineTuneJoint(current, config, corpus, stage_options));
    ASSIGN_OR_RETURN(LatentCache cache,
                     ExportLatents(joint.checkpoint, corpus.entries));
    if (!cache_root.empty()) {
      const std::string dir =
          (std::filesystem::path(cache_root) / absl::StrCat("iteration-", k))
              .string();
      RETURN_IF_ERROR(WriteLatentCache(cache, dir));
      ASSIGN_OR_RETURN(cache, ReadLatentCache(dir));
    }
    ASSIGN_OR_RETURN(StageResult individual,
                     TrainIndividual(joint.checkpoint, cache, config,
                                     stage_options));
    ASSIGN_OR_RETURN(std::unique_ptr<CodecModel> model,
                     BuildModel(individual.checkpoint));
    ASSIGN_OR_RETURN(CorpusReport report,
                     EvaluateCorpus(corpus.entries, *model, EvaluationOptions{}));
    current = individual.checkpoint;
    outputs.push_back(IterationOutput{std::move(joint.checkpoint),
                                      std::move(individual.checkpoint),
                                      report.aggregate});
  }
  return outputs;
}

}  // namespace apcodec
