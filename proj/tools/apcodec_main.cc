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

// apcodec: command-line front end for training, coding and evaluation.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "apcodec/bitstream.h"
#include "apcodec/checkpoint.h"
#include "apcodec/codec_model.h"
#include "apcodec/config.h"
#include "apcodec/file_util.h"
#include "apcodec/manifest.h"
#include "apcodec/metrics.h"
#include "apcodec/staged_training.h"
#include "apcodec/status_macros.h"
#include "apcodec/synthetic_audio.h"
#include "apcodec/wav_io.h"
#include "glog/logging.h"
#include "json.hpp"

namespace apcodec {
namespace {

struct GlobalFlags {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<uint64_t> seed;
};

// Run configuration from --config/--set/--seed. Without --config the
// checkpoint's own configuration (if any) is the base.
absl::StatusOr<RunConfig> ResolveConfig(const GlobalFlags& flags,
                                        const StageCheckpoint* checkpoint) {
  std::vector<std::string> overrides = flags.overrides;
  if (flags.seed.has_value()) {
    overrides.push_back(absl::StrCat("train.seed=", *flags.seed));
  }
  RunConfig config;
  if (!flags.config_path.empty() || checkpoint == nullptr) {
    ASSIGN_OR_RETURN(config, LoadRunConfig(flags.config_path, overrides));
  } else {
    config = checkpoint->config;
    RETURN_IF_ERROR(ApplyConfigText(config, ""));
    for (const std::string& o : overrides) {
      const size_t eq = o.find('=');
      if (eq == std::string::npos) {
        return absl::InvalidArgumentError(
            absl::StrCat("override '", o, "' is not key=value"));
      }
      RETURN_IF_ERROR(SetConfigValue(config, o.substr(0, eq), o.substr(eq + 1)));
    }
    RETURN_IF_ERROR(config.Validate());
  }
  if (checkpoint != nullptr) RETURN_IF_ERROR(CheckCompatible(config, *checkpoint));
  return config;
}

std::string LossLogPath(const RunConfig& config) {
  return config.loss_log.empty()
             ? (std::filesystem::path(config.output_dir) / "losses.jsonl").string()
             : config.loss_log;
}

std::string OrDefault(const std::string& value, const RunConfig& config,
                      const std::string& name) {
  return value.empty()
             ? (std::filesystem::path(config.output_dir) / name).string()
             : value;
}

absl::Status TrainJointCommand(const GlobalFlags& flags,
                               const std::string& manifest_path,
                               const std::string& out) {
  ASSIGN_OR_RETURN(RunConfig config, ResolveConfig(flags, nullptr));
  ASSIGN_OR_RETURN(std::vector<ManifestEntry> manifest,
                   ReadManifest(manifest_path));
  ASSIGN_OR_RETURN(TrainingCorpus corpus,
                   LoadTrainingCorpus(manifest, config.signal.sample_rate,
                                      config.train.crop_length));
  StageOptions options;
  options.loss_log_path = LossLogPath(config);
  ASSIGN_OR_RETURN(StageResult result, TrainJoint(config, corpus, options));
  const std::string path = OrDefault(out, config, "joint.apck");
  RETURN_IF_ERROR(SaveCheckpoint(result.checkpoint, path));
  std::cout << "wrote " << path << " (" << result.checkpoint.stage_tag
            << ", hash " << FrozenModuleHash(result.checkpoint) << ")\n";
  return absl::OkStatus();
}

absl::Status ExportLatentsCommand(const GlobalFlags& flags,
                                  const std::string& ckpt_path,
                                  const std::string& manifest_path,
                                  const std::string& out) {
  ASSIGN_OR_RETURN(StageCheckpoint ckpt, LoadCheckpoint(ckpt_path));
  ASSIGN_OR_RETURN(RunConfig config, ResolveConfig(flags, &ckpt));
  ASSIGN_OR_RETURN(std::vector<ManifestEntry> manifest,
                   ReadManifest(manifest_path));
  ASSIGN_OR_RETURN(LatentCache cache, ExportLatents(ckpt, manifest));
  const std::string dir = OrDefault(out, config, "latents");
  RETURN_IF_ERROR(WriteLatentCache(cache, dir));
  std::cout << "wrote " << cache.entries.size() << " entries to " << dir
            << " (hash " << cache.checkpoint_hash << ")\n";
  return absl::OkStatus();
}

absl::Status TrainIndividualCommand(const GlobalFlags& flags,
                                    const std::string& ckpt_path,
                                    const std::string& cache_dir,
                                    const std::string& out) {
  ASSIGN_OR_RETURN(StageCheckpoint joint, LoadCheckpoint(ckpt_path));
  ASSIGN_OR_RETURN(RunConfig config, ResolveConfig(flags, &joint));
  ASSIGN_OR_RETURN(LatentCache cache, ReadLatentCache(cache_dir));
  StageOptions options;
  options.loss_log_path = LossLogPath(config);
  ASSIGN_OR_RETURN(StageResult result,
                   TrainIndividual(joint, cache, config, options));
  const std::string path = OrDefault(out, config, "individual.apck");
  RETURN_IF_ERROR(SaveCheckpoint(result.checkpoint, path));
  std::cout << "wrote " << path << " (" << result.checkpoint.stage_tag
            << ", frozen hash " << FrozenModuleHash(result.checkpoint) << ")\n";
  return absl::OkStatus();
}

absl::Status TrainIterativeCommand(const GlobalFlags& flags,
                                   const std::string& ckpt_path,
                                   const std::string& manifest_path,
                                   int iterations, const std::string& out) {
  ASSIGN_OR_RETURN(StageCheckpoint start, LoadCheckpoint(ckpt_path));
  ASSIGN_OR_RETURN(RunConfig config, ResolveConfig(flags, &start));
  ASSIGN_OR_RETURN(std::vector<ManifestEntry> manifest,
                   ReadManifest(manifest_path));
  const std::filesystem::path dir = OrDefault(out, config, "iterative");
  StageOptions options;
  options.loss_log_path = LossLogPath(config);
  ASSIGN_OR_RETURN(std::vector<IterationOutput> outputs,
                   TrainIterative(start, config, manifest, iterations,
                                  (dir / "latents").string(), options));
  std::string report;
  for (const IterationOutput& o : outputs) {
    for (const StageCheckpoint* c : {&o.joint, &o.individual}) {
      const std::string path = (dir / (c->stage_tag + ".apck")).string();
      RETURN_IF_ERROR(SaveCheckpoint(*c, path));
      std::cout << "wrote " << path << "\n";
    }
    nlohmann::json row = {{"stage", o.individual.stage_tag},
                          {"lsd_db", o.metrics.lsd},
                          {"awpd_ip_rad", o.metrics.awpd_ip},
                          {"awpd_gd_s", o.metrics.awpd_gd},
                          {"awpd_iaf_rad_per_s", o.metrics.awpd_iaf},
                          {"bitrate_kbps", o.metrics.bitrate_kbps}};
    absl::StrAppend(&report, row.dump(), "\n");
  }
  RETURN_IF_ERROR(
      WriteFileAtomically((dir / "iterations.jsonl").string(), report));
  std::cout << report;
  return absl::OkStatus();
}

absl::Status EncodeCommand(const GlobalFlags& flags,
                           const std::string& ckpt_path,
                           const std::string& input,
                           const std::string& output) {
  ASSIGN_OR_RETURN(StageCheckpoint ckpt, LoadCheckpoint(ckpt_path));
  ASSIGN_OR_RETURN(RunConfig config, ResolveConfig(flags, &ckpt));
  ASSIGN_OR_RETURN(std::unique_ptr<CodecModel> model, BuildModel(ckpt));
  ASSIGN_OR_RETURN(WavData wav, ReadWavAtRate(input, config.signal.sample_rate));
  ASSIGN_OR_RETURN(EncodedUtterance enc, model->EncodeWaveform(wav.samples));
  ASSIGN_OR_RETURN(std::vector<uint8_t> bytes,
                   Pack(enc.tokens, MakeHeader(config.signal, config.codec,
                                               enc.tokens.frames,
                                               enc.original_samples)));
  return WriteFileAtomically(output, bytes);
}

absl::Status DecodeCommand(const GlobalFlags& flags,
                           const std::string& ckpt_path,
                           const std::string& input,
                           const std::string& output, bool pcm16) {
  ASSIGN_OR_RETURN(StageCheckpoint ckpt, LoadCheckpoint(ckpt_path));
  ASSIGN_OR_RETURN(RunConfig config, ResolveConfig(flags, &ckpt));
  ASSIGN_OR_RETURN(std::unique_ptr<CodecModel> model, BuildModel(ckpt));
  ASSIGN_OR_RETURN(std::vector<uint8_t> bytes, ReadFileBytes(input));
  ASSIGN_OR_RETURN(UnpackedStream stream, Unpack(bytes));
  const BitstreamHeader expected =
      MakeHeader(config.signal, config.codec, stream.header.latent_frames,
                 stream.header.original_samples);
  if (!(stream.header == expected)) {
    return absl::FailedPreconditionError(
        "bitstream was produced with a different codec configuration");
  }
  ASSIGN_OR_RETURN(std::vector<double> wave,
                   model->DecodeTokens(stream.tokens,
                                       stream.header.original_samples));
  return WriteWav(output, WavData{config.signal.sample_rate, std::move(wave)},
                  pcm16 ? WavFormat::kPcm16 : WavFormat::kFloat32);
}

absl::Status EvaluateCommand(const GlobalFlags& flags,
                             const std::string& ckpt_path,
                             const std::string& manifest_path,
                             const std::string& report_dir,
                             const EvaluationOptions& options) {
  ASSIGN_OR_RETURN(StageCheckpoint ckpt, LoadCheckpoint(ckpt_path));
  ASSIGN_OR_RETURN(RunConfig config, ResolveConfig(flags, &ckpt));
  ASSIGN_OR_RETURN(std::vector<ManifestEntry> manifest,
                   ReadManifest(manifest_path));
  ASSIGN_OR_RETURN(std::unique_ptr<CodecModel> model, BuildModel(ckpt));
  ASSIGN_OR_RETURN(CorpusReport report,
                   EvaluateCorpus(manifest, *model, options));
  const std::string dir = OrDefault(report_dir, config, "report");
  RETURN_IF_ERROR(WriteCorpusReport(report, config.signal, dir));
  std::cout << FormatReportTable(report);
  return absl::OkStatus();
}

absl::Status InfoCommand(const std::string& path) {
  ASSIGN_OR_RETURN(std::vector<uint8_t> bytes, ReadFileBytes(path));
  if (bytes.size() >= 4 && std::string(bytes.begin(), bytes.begin() + 4) == "APCK") {
    ASSIGN_OR_RETURN(StageCheckpoint ckpt, DeserializeCheckpoint(bytes));
    std::cout << "checkpoint: " << path << "\n"
              << "stage_tag: " << ckpt.stage_tag << "\n"
              << "steps: " << ckpt.steps << "\n"
              << "frozen_manifest:";
    for (const auto& m : ckpt.frozen_manifest) std::cout << " " << m;
    std::cout << "\nfrozen_hash: " << FrozenModuleHash(ckpt) << "\n"
              << "parent_hash: " << ckpt.parent_hash << "\n"
              << absl::StrFormat("bitrate_kbps: %.6g\n",
                                 BitrateKbps(ckpt.config.codec, ckpt.config.signal));
    return absl::OkStatus();
  }
  ASSIGN_OR_RETURN(UnpackedStream stream, Unpack(bytes));
  const BitstreamHeader& h = stream.header;
  std::cout << "bitstream: " << path << "\n"
            << "version: " << static_cast<int>(h.version) << "\n"
            << "sample_rate: " << h.sample_rate << "\n"
            << "frame_shift: " << h.frame_shift << "\n"
            << "down_up_ratio: " << static_cast<int>(h.down_up_ratio) << "\n"
            << "num_quantizers: " << static_cast<int>(h.num_quantizers) << "\n"
            << "codebook_bits: " << static_cast<int>(h.codebook_bits) << "\n"
            << "latent_frames: " << h.latent_frames << "\n"
            << "original_samples: " << h.original_samples << "\n"
            << "payload_bytes: " << PayloadBytes(h) << "\n"
            << absl::StrFormat("bitrate_kbps: %.6g\n", HeaderBitrateKbps(h));
  return absl::OkStatus();
}

// Per-stage means of every logged loss term.
absl::Status ReportCommand(const std::string& log_path) {
  ASSIGN_OR_RETURN(std::vector<uint8_t> bytes, ReadFileBytes(log_path));
  struct Accum {
    int64_t steps = 0;
    std::map<std::string, std::pair<double, double>> terms;  // weight, sum
    double total = 0.0, discriminator = 0.0, first_total = 0.0, last_total = 0.0;
  };
  std::map<std::string, Accum> stages;
  std::vector<std::string> order;
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.contains("stage") || !rec.contains("terms")) {
      return absl::DataLossError(
          absl::StrCat(log_path, ":", line_no, ": not a loss record"));
    }
    const std::string stage = rec["stage"].get<std::string>();
    if (!stages.contains(stage)) order.push_back(stage);
    Accum& a = stages[stage];
    const double total = rec.value("total", 0.0);
    if (a.steps == 0) a.first_total = total;
    a.last_total = total;
    ++a.steps;
    a.total += total;
    a.discriminator += rec.value("discriminator", 0.0);
    for (const auto& t : rec["terms"]) {
      auto& [weight, sum] = a.terms[t.value("name", std::string("?"))];
      weight = t.value("weight", 0.0);
      sum += t.value("value", 0.0);
    }
  }
  for (const std::string& stage : order) {
    const Accum& a = stages[stage];
    std::cout << absl::StrFormat(
        "%s: %d steps, total %.5g -> %.5g (mean %.5g), discriminator mean %.5g\n",
        stage, a.steps, a.first_total, a.last_total, a.total / a.steps,
        a.discriminator / a.steps);
    for (const auto& [name, ws] : a.terms) {
      std::cout << absl::StrFormat("  %-18s weight %-8.4g mean %.6g\n", name,
                                   ws.first, ws.second / a.steps);
    }
  }
  return absl::OkStatus();
}

int Run(int argc, char** argv) {
  CLI::App app{"Amplitude/phase neural audio codec"};
  app.require_subcommand(1);
  GlobalFlags flags;
  uint64_t seed = 0;
  app.add_option("--config", flags.config_path, "key = value config file");
  app.add_option("--set", flags.overrides, "key=value override (repeatable)")
      ->take_all()
      ->allow_extra_args(false);
  auto* seed_opt = app.add_option("--seed", seed, "seed for every component");

  absl::Status status = absl::OkStatus();
  std::string manifest, ckpt, out, input, output, cache, report_dir;
  int iterations = 1;
  bool pcm16 = false;
  EvaluationOptions eval_options;
  int toy_count = 10;
  double toy_seconds = 1.0;
  int toy_rate = 48000;

  auto* train_joint = app.add_subcommand("train-joint", "joint training stage");
  train_joint->add_option("--manifest", manifest, "training manifest")->required();
  train_joint->add_option("--out", out, "output checkpoint");

  auto* export_latents =
      app.add_subcommand("export-latents", "cache frozen-encoder tokens");
  export_latents->add_option("--ckpt", ckpt, "joint checkpoint")->required();
  export_latents->add_option("--manifest", manifest, "manifest")->required();
  export_latents->add_option("--out", out, "cache directory");

  auto* train_individual =
      app.add_subcommand("train-individual", "individual training stage");
  train_individual->add_option("--ckpt", ckpt, "joint checkpoint")->required();
  train_individual->add_option("--cache", cache, "latent cache directory")
      ->required();
  train_individual->add_option("--out", out, "output checkpoint");

  auto* train_iterative =
      app.add_subcommand("train-iterative", "repeat the staged paradigm");
  train_iterative->add_option("--ckpt", ckpt, "starting checkpoint")->required();
  train_iterative->add_option("--manifest", manifest, "manifest")->required();
  train_iterative->add_option("--iterations", iterations, "iterations")
      ->check(CLI::PositiveNumber);
  train_iterative->add_option("--out", out, "output directory");

  auto* encode = app.add_subcommand("encode", "WAV -> .apc bitstream");
  encode->add_option("--ckpt", ckpt, "checkpoint")->required();
  encode->add_option("input", input, "input WAV")->required();
  encode->add_option("output", output, "output .apc")->required();

  auto* decode = app.add_subcommand("decode", ".apc bitstream -> WAV");
  decode->add_option("--ckpt", ckpt, "checkpoint")->required();
  decode->add_option("input", input, "input .apc")->required();
  decode->add_option("output", output, "output WAV")->required();
  decode->add_flag("--pcm16", pcm16, "write 16-bit PCM instead of float");

  auto* evaluate = app.add_subcommand("evaluate", "objective metrics");
  evaluate->add_option("--ckpt", ckpt, "checkpoint")->required();
  evaluate->add_option("--manifest", manifest, "manifest")->required();
  evaluate->add_option("--report-dir", report_dir, "report directory");
  evaluate->add_option("--decoded-dir", eval_options.decoded_dir,
                       "write decoded audio here");
  evaluate->add_option("--utmos-command", eval_options.utmos_command,
                       "external MOS predictor run on --decoded-dir");
  evaluate->add_option("--threads", eval_options.num_threads, "worker count");

  auto* info = app.add_subcommand("info", "describe a .apc or checkpoint file");
  info->add_option("file", input, "file")->required();

  auto* report = app.add_subcommand("report", "summarize a loss log");
  report->add_option("log", input, "losses.jsonl")->required();

  auto* toy = app.add_subcommand("toy-corpus", "write synthetic clips");
  toy->add_option("--out", out, "output directory")->required();
  toy->add_option("--count", toy_count, "clips")->check(CLI::PositiveNumber);
  toy->add_option("--seconds", toy_seconds, "clip length")
      ->check(CLI::PositiveNumber);
  toy->add_option("--rate", toy_rate, "sample rate")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return e.get_exit_code() == 0 ? 2 : e.get_exit_code();
  }
  if (*seed_opt) flags.seed = seed;

  if (*train_joint) {
    status = TrainJointCommand(flags, manifest, out);
  } else if (*export_latents) {
    status = ExportLatentsCommand(flags, ckpt, manifest, out);
  } else if (*train_individual) {
    status = TrainIndividualCommand(flags, ckpt, cache, out);
  } else if (*train_iterative) {
    status = TrainIterativeCommand(flags, ckpt, manifest, iterations, out);
  } else if (*encode) {
    status = EncodeCommand(flags, ckpt, input, output);
  } else if (*decode) {
    status = DecodeCommand(flags, ckpt, input, output, pcm16);
  } else if (*evaluate) {
    status = EvaluateCommand(flags, ckpt, manifest, report_dir, eval_options);
  } else if (*info) {
    status = InfoCommand(input);
  } else if (*report) {
    status = ReportCommand(input);
  } else if (*toy) {
    absl::StatusOr<std::vector<ManifestEntry>> entries = WriteToyCorpus(
        out, toy_count, toy_seconds, toy_rate, flags.seed.value_or(0));
    status = entries.status();
    if (status.ok()) {
      std::cout << "wrote " << entries->size() << " clips and "
                << (std::filesystem::path(out) / "manifest.tsv").string() << "\n";
    }
  }
  if (!status.ok()) {
    std::cerr << "error: " << status << "\n";
    return 1;
  }
  return 0;
}

}  // namespace
}  // namespace apcodec

int main(int argc, char** argv) {
  google::InitGoogleLogging(argv[0]);
  FLAGS_logtostderr = true;
  return apcodec::Run(argc, argv);
}
