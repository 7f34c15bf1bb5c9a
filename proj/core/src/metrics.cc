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

#include "apcodec/metrics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <future>
#include <numbers>
#include <thread>

#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_split.h"
#include "absl/strings/strip.h"
#include "apcodec/file_util.h"
#include "apcodec/losses.h"
#include "apcodec/status_macros.h"
#include "apcodec/wav_io.h"
#include "glog/logging.h"
#include "json.hpp"

namespace apcodec {
namespace {

using json = nlohmann::json;

absl::Status CheckPair(std::span<const double> reference,
                       std::span<const double> test,
                       const SignalConfig& config) {
  RETURN_IF_ERROR(config.Validate());
  const size_t n = std::min(reference.size(), test.size());
  if (n < static_cast<size_t>(config.frame_length)) {
    return absl::InvalidArgumentError(absl::StrCat(
        "signals of ", n, " samples are shorter than one frame (",
        config.frame_length, ")"));
  }
  if (std::all_of(reference.begin(), reference.begin() + n,
                  [](double v) { return v == 0.0; })) {
    return absl::InvalidArgumentError("reference signal is silent");
  }
  return absl::OkStatus();
}

struct AnalyzedPair {
  SpectralPair reference;
  SpectralPair test;
};

absl::StatusOr<AnalyzedPair> AnalyzeBoth(std::span<const double> reference,
                                         std::span<const double> test,
                                         const SignalConfig& config) {
  RETURN_IF_ERROR(CheckPair(reference, test, config));
  const size_t n = std::min(reference.size(), test.size());
  AnalyzedPair out;
  ASSIGN_OR_RETURN(out.reference, Analyze(reference.first(n), config));
  ASSIGN_OR_RETURN(out.test, Analyze(test.first(n), config));
  return out;
}

absl::Status CheckShapes(const SpectralPair& a, const SpectralPair& b) {
  if (a.frames() != b.frames() || a.bins() != b.bins() || a.frames() == 0 ||
      a.phase.rows != a.frames() || b.phase.rows != b.frames()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "spectra shapes differ or are empty: ", a.frames(), "x", a.bins(),
        " vs ", b.frames(), "x", b.bins()));
  }
  return absl::OkStatus();
}

json ReportJson(const MetricReport& m) {
  return json{{"lsd_db", m.lsd},
              {"awpd_ip_rad", m.awpd_ip},
              {"awpd_gd_s", m.awpd_gd},
              {"awpd_iaf_rad_per_s", m.awpd_iaf},
              {"awpd_gd_rad_per_bin", m.awpd_gd_raw},
              {"awpd_iaf_rad_per_frame", m.awpd_iaf_raw},
              {"bitrate_kbps", m.bitrate_kbps}};
}

struct UtteranceResult {
  absl::StatusOr<UtteranceMetrics> metrics;
  std::vector<double> decoded;
};

UtteranceResult EvaluateOne(const ManifestEntry& entry,
                            const CodecModel& model) {
  UtteranceResult result{absl::UnknownError("not run"), {}};
  const SignalConfig& signal = model.signal_config();
  absl::StatusOr<WavData> wav = ReadWavAtRate(entry.path, signal.sample_rate);
  if (!wav.ok()) {
    result.metrics = wav.status();
    return result;
  }
  const std::vector<double>* wave = &wav->samples;
  absl::StatusOr<EncodedUtterance> encoded = model.EncodeWaveform(*wave);
  if (!encoded.ok()) {
    result.metrics = encoded.status();
    return result;
  }
  absl::StatusOr<std::vector<double>> decoded =
      model.DecodeTokens(encoded->tokens, encoded->original_samples);
  if (!decoded.ok()) {
    result.metrics = decoded.status();
    return result;
  }
  absl::StatusOr<MetricReport> report = EvaluatePair(*wave, *decoded, signal);
  if (!report.ok()) {
    result.metrics = report.status();
    return result;
  }
  report->bitrate_kbps = BitrateKbps(model.codec_config(), signal);
  result.metrics = UtteranceMetrics{entry.id,
                                    static_cast<int64_t>(wave->size()),
                                    *report};
  result.decoded = std::move(*decoded);
  return result;
}

absl::StatusOr<double> RunUtmosHook(const std::string& command,
                                    const std::string& dir) {
  const std::string cmd = absl::StrCat(command, " '", dir, "'");
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) {
    return absl::InternalError(absl::StrCat("cannot run: ", cmd));
  }
  std::string output;
  char buf[256];
  while (fgets(buf, sizeof(buf), pipe) != nullptr) output += buf;
  const int rc = pclose(pipe);
  if (rc != 0) {
    return absl::InternalError(
        absl::StrCat("MOS hook exited with status ", rc, ": ", cmd));
  }
  std::optional<double> last;
  for (absl::string_view tok :
       absl::StrSplit(output, absl::ByAnyChar(" \t\r\n"), absl::SkipEmpty())) {
    double v;
    if (absl::SimpleAtod(tok, &v)) last = v;
  }
  if (!last.has_value()) {
    return absl::InternalError("MOS hook printed no number");
  }
  return *last;
}

}  // namespace

double GroupDelayScale(const SignalConfig& config) {
  return config.fft_size / (2.0 * std::numbers::pi * config.sample_rate);
}

double AngularFrequencyScale(const SignalConfig& config) {
  return static_cast<double>(config.sample_rate) / config.frame_shift;
}

absl::StatusOr<double> LsdFromSpectra(const SpectralPair& reference,
                                      const SpectralPair& test) {
  RETURN_IF_ERROR(CheckShapes(reference, test));
  const double to_db = 20.0 / std::log(10.0);
  double total = 0.0;
  for (int64_t f = 0; f < reference.frames(); ++f) {
    double sq = 0.0;
    for (int64_t k = 0; k < reference.bins(); ++k) {
      const double d =
          to_db * (test.log_amplitude(f, k) - reference.log_amplitude(f, k));
      sq += d * d;
    }
    total += std::sqrt(sq / reference.bins());
  }
  return total / reference.frames();
}

absl::StatusOr<double> Lsd(std::span<const double> reference,
                           std::span<const double> test,
                           const SignalConfig& config) {
  ASSIGN_OR_RETURN(AnalyzedPair pair, AnalyzeBoth(reference, test, config));
  return LsdFromSpectra(pair.reference, pair.test);
}

absl::StatusOr<AwpdResult> AwpdFromSpectra(const SpectralPair& reference,
                                           const SpectralPair& test,
                                           const SignalConfig& config) {
  RETURN_IF_ERROR(CheckShapes(reference, test));
  const int64_t frames = reference.frames();
  const int64_t bins = reference.bins();
  const double log_floor = std::log(config.amplitude_floor);
  std::vector<bool> active(frames);
  for (int64_t f = 0; f < frames; ++f) {
    bool any = false;
    for (int64_t k = 0; k < bins && !any; ++k) {
      any = reference.log_amplitude(f, k) > log_floor;
    }
    active[f] = any;
  }

  double ip = 0.0, gd = 0.0, iaf = 0.0;
  int64_t ip_n = 0, gd_n = 0, iaf_n = 0;
  for (int64_t f = 0; f < frames; ++f) {
    if (!active[f]) continue;
    for (int64_t k = 0; k < bins; ++k) {
      const double err = test.phase(f, k) - reference.phase(f, k);
      ip += AntiWrap(err);
      ++ip_n;
      if (k > 0) {
        const double prev = test.phase(f, k - 1) - reference.phase(f, k - 1);
        gd += AntiWrap(err - prev);
        ++gd_n;
      }
      if (f > 0 && active[f - 1]) {
        const double prev = test.phase(f - 1, k) - reference.phase(f - 1, k);
        iaf += AntiWrap(err - prev);
        ++iaf_n;
      }
    }
  }
  if (ip_n == 0) {
    return absl::InvalidArgumentError(
        "every reference frame is below the amplitude floor");
  }
  AwpdResult r;
  r.ip = ip / ip_n;
  r.gd_raw = gd_n > 0 ? gd / gd_n : 0.0;
  r.iaf_raw = iaf_n > 0 ? iaf / iaf_n : 0.0;
  r.gd = r.gd_raw * GroupDelayScale(config);
  r.iaf = r.iaf_raw * AngularFrequencyScale(config);
  return r;
}

absl::StatusOr<AwpdResult> Awpd(std::span<const double> reference,
                                std::span<const double> test,
                                const SignalConfig& config) {
  ASSIGN_OR_RETURN(AnalyzedPair pair, AnalyzeBoth(reference, test, config));
  return AwpdFromSpectra(pair.reference, pair.test, config);
}

absl::StatusOr<MetricReport> EvaluatePair(std::span<const double> reference,
                                          std::span<const double> test,
                                          const SignalConfig& config) {
  ASSIGN_OR_RETURN(AnalyzedPair pair, AnalyzeBoth(reference, test, config));
  MetricReport m;
  ASSIGN_OR_RETURN(m.lsd, LsdFromSpectra(pair.reference, pair.test));
  ASSIGN_OR_RETURN(AwpdResult a,
                   AwpdFromSpectra(pair.reference, pair.test, config));
  m.awpd_ip = a.ip;
  m.awpd_gd = a.gd;
  m.awpd_iaf = a.iaf;
  m.awpd_gd_raw = a.gd_raw;
  m.awpd_iaf_raw = a.iaf_raw;
  return m;
}

absl::StatusOr<CorpusReport> EvaluateCorpus(
    const std::vector<ManifestEntry>& manifest, const CodecModel& model,
    const EvaluationOptions& options) {
  if (manifest.empty()) {
    return absl::InvalidArgumentError("evaluation manifest is empty");
  }
  const int threads = std::max(
      1, options.num_threads > 0
             ? options.num_threads
             : static_cast<int>(std::thread::hardware_concurrency()));
  std::vector<UtteranceResult> results(manifest.size());
  for (size_t start = 0; start < manifest.size(); start += threads) {
    const size_t end = std::min(manifest.size(), start + threads);
    std::vector<std::future<UtteranceResult>> pending;
    for (size_t i = start; i < end; ++i) {
      pending.push_back(std::async(std::launch::async, EvaluateOne,
                                   std::cref(manifest[i]), std::cref(model)));
    }
    for (size_t i = start; i < end; ++i) {
      results[i] = pending[i - start].get();
    }
  }

  CorpusReport report;
  for (size_t i = 0; i < manifest.size(); ++i) {
    if (!results[i].metrics.ok()) {
      LOG(WARNING) << "skipping " << manifest[i].id << ": "
                   << results[i].metrics.status().message();
      report.skipped.push_back(manifest[i].id);
      continue;
    }
    report.utterances.push_back(*results[i].metrics);
    if (!options.decoded_dir.empty()) {
      std::filesystem::create_directories(options.decoded_dir);
      RETURN_IF_ERROR(WriteWav(
          (std::filesystem::path(options.decoded_dir) / (manifest[i].id + ".wav"))
              .string(),
          WavData{model.signal_config().sample_rate, results[i].decoded},
          WavFormat::kFloat32));
    }
  }
  if (report.utterances.empty()) {
    return absl::InvalidArgumentError("no utterance could be evaluated");
  }
  const double n = static_cast<double>(report.utterances.size());
  for (const UtteranceMetrics& u : report.utterances) {
    report.aggregate.lsd += u.metrics.lsd / n;
    report.aggregate.awpd_ip += u.metrics.awpd_ip / n;
    report.aggregate.awpd_gd += u.metrics.awpd_gd / n;
    report.aggregate.awpd_iaf += u.metrics.awpd_iaf / n;
    report.aggregate.awpd_gd_raw += u.metrics.awpd_gd_raw / n;
    report.aggregate.awpd_iaf_raw += u.metrics.awpd_iaf_raw / n;
  }
  if (report.utterances.size() == 1) {
    report.aggregate = report.utterances.front().metrics;
  }
  report.aggregate.bitrate_kbps =
      BitrateKbps(model.codec_config(), model.signal_config());
  if (!options.utmos_command.empty()) {
    if (options.decoded_dir.empty()) {
      return absl::InvalidArgumentError(
          "the MOS hook needs a decoded-audio directory");
    }
    ASSIGN_OR_RETURN(report.utmos,
                     RunUtmosHook(options.utmos_command, options.decoded_dir));
  }
  return report;
}

absl::Status WriteCorpusReport(const CorpusReport& report,
                               const SignalConfig& config,
                               const std::string& dir) {
  std::filesystem::create_directories(dir);
  const json metadata = {
      {"lsd_variant", "20*log10 magnitude, RMS over bins, mean over frames"},
      {"awpd_gd_scale_s_per_rad", GroupDelayScale(config)},
      {"awpd_iaf_scale_per_s", AngularFrequencyScale(config)},
      {"silence_log_floor", std::log(config.amplitude_floor)},
  };
  std::string lines;
  for (const UtteranceMetrics& u : report.utterances) {
    json rec = ReportJson(u.metrics);
    rec["id"] = u.id;
    rec["samples"] = u.samples;
    absl::StrAppend(&lines, rec.dump(), "\n");
  }
  json agg = ReportJson(report.aggregate);
  agg["id"] = "__aggregate__";
  agg["utterances"] = report.utterances.size();
  absl::StrAppend(&lines, agg.dump(), "\n");

  json summary = {{"aggregate", ReportJson(report.aggregate)},
                  {"utterances", report.utterances.size()},
                  {"skipped", report.skipped},
                  {"metadata", metadata}};
  summary["utmos"] =
      report.utmos.has_value() ? json(*report.utmos) : json(nullptr);
  const std::filesystem::path base(dir);
  RETURN_IF_ERROR(WriteFileAtomically((base / "metrics.jsonl").string(), lines));
  RETURN_IF_ERROR(WriteFileAtomically((base / "summary.json").string(),
                                      summary.dump(2) + "\n"));
  return WriteFileAtomically((base / "summary.txt").string(),
                             FormatReportTable(report));
}

std::string FormatReportTable(const CorpusReport& report) {
  std::string out = absl::StrFormat("%-24s %10s %10s %12s %14s\n", "utterance",
                                    "LSD(dB)", "IP(rad)", "GD(s)",
                                    "IAF(rad/s)");
  auto row = [&out](const std::string& id, const MetricReport& m) {
    absl::StrAppendFormat(&out, "%-24s %10.4f %10.4f %12.4e %14.2f\n", id,
                          m.lsd, m.awpd_ip, m.awpd_gd, m.awpd_iaf);
  };
  for (const UtteranceMetrics& u : report.utterances) row(u.id, u.metrics);
  row("mean", report.aggregate);
  absl::StrAppendFormat(&out, "bitrate: %.4g kbps\n",
                        report.aggregate.bitrate_kbps);
  if (report.utmos.has_value()) {
    absl::StrAppendFormat(&out, "UTMOS: %.4f\n", *report.utmos);
  }
  if (!report.skipped.empty()) {
    absl::StrAppendFormat(&out, "skipped: %d\n",
                          static_cast<int>(report.skipped.size()));
  }
  return out;
}

}  // namespace apcodec
