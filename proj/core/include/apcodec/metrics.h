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

#ifndef APCODEC_METRICS_H_
#define APCODEC_METRICS_H_

// Objective quality metrics: log-spectral distance and the anti-wrapping
// phase distances over instantaneous phase (IP), group delay (GD) and
// instantaneous angular frequency (IAF).

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "apcodec/codec_model.h"
#include "apcodec/manifest.h"
#include "apcodec/spectral_frontend.h"

namespace apcodec {

struct AwpdResult {
  double ip = 0.0;   // radians
  double gd = 0.0;   // seconds
  double iaf = 0.0;  // radians per second
  // The same distances before unit conversion, in radians per bin and
  // radians per frame.
  double gd_raw = 0.0;
  double iaf_raw = 0.0;
};

struct MetricReport {
  double lsd = 0.0;  // dB
  double awpd_ip = 0.0;
  double awpd_gd = 0.0;
  double awpd_iaf = 0.0;
  double awpd_gd_raw = 0.0;
  double awpd_iaf_raw = 0.0;
  double bitrate_kbps = 0.0;
};

// Unit conversions applied to the raw GD and IAF distances.
double GroupDelayScale(const SignalConfig& config);        // fft / (2 pi sr)
double AngularFrequencyScale(const SignalConfig& config);  // sr / shift

// Mean over frames of the per-frame RMS over bins of
// 20 log10(|X_test| / |X_ref|). Both waveforms are trimmed to the shorter
// length, which must cover one frame; an all-zero reference is rejected.
absl::StatusOr<double> Lsd(std::span<const double> reference,
                           std::span<const double> test,
                           const SignalConfig& config);

// Spectral-level LSD over already analyzed log amplitudes.
absl::StatusOr<double> LsdFromSpectra(const SpectralPair& reference,
                                      const SpectralPair& test);

absl::StatusOr<AwpdResult> Awpd(std::span<const double> reference,
                                std::span<const double> test,
                                const SignalConfig& config);

// Spectral-level AWPD. Frames whose reference log amplitude sits at the
// floor in every bin are excluded; an IAF difference needs both frames.
absl::StatusOr<AwpdResult> AwpdFromSpectra(const SpectralPair& reference,
                                           const SpectralPair& test,
                                           const SignalConfig& config);

absl::StatusOr<MetricReport> EvaluatePair(std::span<const double> reference,
                                          std::span<const double> test,
                                          const SignalConfig& config);

struct UtteranceMetrics {
  std::string id;
  int64_t samples = 0;
  MetricReport metrics;
};

struct CorpusReport {
  std::vector<UtteranceMetrics> utterances;
  std::vector<std::string> skipped;
  MetricReport aggregate;  // mean over utterances; bitrate from the config
  std::optional<double> utmos;
};

struct EvaluationOptions {
  // Decoded waveforms are written here when non-empty.
  std::string decoded_dir;
  // Optional external MOS predictor, run as "<command> <decoded_dir>"; the
  // last number it prints is recorded as the corpus score.
  std::string utmos_command;
  int num_threads = 0;  // 0: hardware concurrency
};

// Encodes and decodes every manifest entry and scores it against the
// original. Unreadable entries are skipped with a warning; an empty manifest
// or an all-skipped corpus is an error.
absl::StatusOr<CorpusReport> EvaluateCorpus(
    const std::vector<ManifestEntry>& manifest, const CodecModel& model,
    const EvaluationOptions& options);

// Writes metrics.jsonl (one record per utterance, then the aggregate),
// summary.json and summary.txt into `dir`.
absl::Status WriteCorpusReport(const CorpusReport& report,
                               const SignalConfig& config,
                               const std::string& dir);

std::string FormatReportTable(const CorpusReport& report);

}  // namespace apcodec

#endif  // APCODEC_METRICS_H_
