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

#include "apcodec/config.h"

#include <charconv>
#include <functional>

#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"
#include "absl/strings/str_split.h"
#include "absl/strings/strip.h"
#include "apcodec/file_util.h"
#include "apcodec/status_macros.h"

namespace apcodec {
namespace {

std::string FormatDouble(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

absl::Status ParseError(const std::string& key, const std::string& value) {
  return absl::InvalidArgumentError(
      absl::StrCat("cannot parse value '", value, "' for key ", key));
}

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<absl::Status(RunConfig&, const std::string&)> set;
};

template <typename T>
Field IntField(std::string key, T RunConfig::*group, int T::*member) {
  return Field{
      key,
      [group, member](const RunConfig& c) {
        return absl::StrCat(c.*group.*member);
      },
      [key, group, member](RunConfig& c, const std::string& v) {
        int parsed;
        if (!absl::SimpleAtoi(v, &parsed)) return ParseError(key, v);
        c.*group.*member = parsed;
        return absl::OkStatus();
      }};
}

template <typename T>
Field Int64Field(std::string key, T RunConfig::*group, int64_t T::*member) {
  return Field{
      key,
      [group, member](const RunConfig& c) {
        return absl::StrCat(c.*group.*member);
      },
      [key, group, member](RunConfig& c, const std::string& v) {
        int64_t parsed;
        if (!absl::SimpleAtoi(v, &parsed)) return ParseError(key, v);
        c.*group.*member = parsed;
        return absl::OkStatus();
      }};
}

template <typename T>
Field Uint64Field(std::string key, T RunConfig::*group, uint64_t T::*member) {
  return Field{
      key,
      [group, member](const RunConfig& c) {
        return absl::StrCat(c.*group.*member);
      },
      [key, group, member](RunConfig& c, const std::string& v) {
        uint64_t parsed;
        if (!absl::SimpleAtoi(v, &parsed)) return ParseError(key, v);
        c.*group.*member = parsed;
        return absl::OkStatus();
      }};
}

template <typename T>
Field DoubleField(std::string key, T RunConfig::*group, double T::*member) {
  return Field{
      key,
      [group, member](const RunConfig& c) {
        return FormatDouble(c.*group.*member);
      },
      [key, group, member](RunConfig& c, const std::string& v) {
        double parsed;
        if (!absl::SimpleAtod(v, &parsed)) return ParseError(key, v);
        c.*group.*member = parsed;
        return absl::OkStatus();
      }};
}

template <typename T>
Field BoolField(std::string key, T RunConfig::*group, bool T::*member) {
  return Field{
      key,
      [group, member](const RunConfig& c) {
        return std::string(c.*group.*member ? "true" : "false");
      },
      [key, group, member](RunConfig& c, const std::string& v) {
        bool parsed;
        if (!absl::SimpleAtob(v, &parsed)) return ParseError(key, v);
        c.*group.*member = parsed;
        return absl::OkStatus();
      }};
}

absl::StatusOr<std::vector<int>> ParseIntList(const std::string& key,
                                              const std::string& v) {
  std::vector<int> out;
  for (absl::string_view part : absl::StrSplit(v, ',', absl::SkipWhitespace())) {
    int x;
    if (!absl::SimpleAtoi(absl::StripAsciiWhitespace(part), &x)) {
      return ParseError(key, v);
    }
    out.push_back(x);
  }
  return out;
}

const std::vector<Field>& Fields() {
  static const std::vector<Field>* fields = [] {
    using R = RunConfig;
    auto* f = new std::vector<Field>{
        IntField("signal.sample_rate", &R::signal, &SignalConfig::sample_rate),
        IntField("signal.frame_length", &R::signal, &SignalConfig::frame_length),
        IntField("signal.frame_shift", &R::signal, &SignalConfig::frame_shift),
        IntField("signal.fft_size", &R::signal, &SignalConfig::fft_size),
        DoubleField("signal.amplitude_floor", &R::signal,
                    &SignalConfig::amplitude_floor),
        IntField("codec.num_blocks", &R::codec, &CodecConfig::num_blocks),
        IntField("codec.kernel_size", &R::codec, &CodecConfig::kernel_size),
        IntField("codec.channel_size", &R::codec, &CodecConfig::channel_size),
        IntField("codec.expansion_factor", &R::codec,
                 &CodecConfig::expansion_factor),
        IntField("codec.latent_dim", &R::codec, &CodecConfig::latent_dim),
        IntField("codec.down_up_ratio", &R::codec, &CodecConfig::down_up_ratio),
        IntField("codec.codebook_size", &R::codec, &CodecConfig::codebook_size),
        IntField("codec.num_quantizers", &R::codec,
                 &CodecConfig::num_quantizers),
        Field{"discriminator.periods",
              [](const R& c) { return absl::StrJoin(c.discriminator.periods, ","); },
              [](R& c, const std::string& v) -> absl::Status {
                ASSIGN_OR_RETURN(c.discriminator.periods,
                                 ParseIntList("discriminator.periods", v));
                return absl::OkStatus();
              }},
        Field{"discriminator.mpd_channels",
              [](const R& c) {
                return absl::StrJoin(c.discriminator.mpd_channels, ",");
              },
              [](R& c, const std::string& v) -> absl::Status {
                ASSIGN_OR_RETURN(c.discriminator.mpd_channels,
                                 ParseIntList("discriminator.mpd_channels", v));
                return absl::OkStatus();
              }},
        IntField("discriminator.mpd_kernel", &R::discriminator,
                 &DiscriminatorConfig::mpd_kernel),
        IntField("discriminator.mpd_stride", &R::discriminator,
                 &DiscriminatorConfig::mpd_stride),
        Field{"discriminator.resolutions",
              [](const R& c) {
                std::vector<std::string> parts;
                for (const auto& r : c.discriminator.resolutions) {
                  parts.push_back(absl::StrCat(r.fft_size, ":", r.hop));
                }
                return absl::StrJoin(parts, ",");
              },
              [](R& c, const std::string& v) -> absl::Status {
                std::vector<StftResolution> out;
                for (absl::string_view part :
                     absl::StrSplit(v, ',', absl::SkipWhitespace())) {
                  std::vector<std::string> pair =
                      absl::StrSplit(absl::StripAsciiWhitespace(part), ':');
                  StftResolution r;
                  if (pair.size() != 2 || !absl::SimpleAtoi(pair[0], &r.fft_size) ||
                      !absl::SimpleAtoi(pair[1], &r.hop)) {
                    return ParseError("discriminator.resolutions", v);
                  }
                  out.push_back(r);
                }
                c.discriminator.resolutions = std::move(out);
                return absl::OkStatus();
              }},
        IntField("discriminator.mrd_channels", &R::discriminator,
                 &DiscriminatorConfig::mrd_channels),
        DoubleField("discriminator.leaky_slope", &R::discriminator,
                    &DiscriminatorConfig::leaky_slope),
        DoubleField("loss.w_amp", &R::weights, &LossWeights::amplitude),
        DoubleField("loss.w_phase", &R::weights, &LossWeights::phase),
        DoubleField("loss.w_mel", &R::weights, &LossWeights::mel),
        DoubleField("loss.w_complex", &R::weights, &LossWeights::complex),
        DoubleField("loss.w_quant", &R::weights, &LossWeights::quantization),
        DoubleField("loss.w_adv", &R::weights, &LossWeights::adversarial),
        DoubleField("loss.w_fm", &R::weights, &LossWeights::feature_matching),
        IntField("train.crop_length", &R::train, &TrainConfig::crop_length),
        IntField("train.batch_size", &R::train, &TrainConfig::batch_size),
        DoubleField("train.beta1", &R::train, &TrainConfig::beta1),
        DoubleField("train.beta2", &R::train, &TrainConfig::beta2),
        DoubleField("train.initial_lr", &R::train, &TrainConfig::initial_lr),
        DoubleField("train.lr_decay_per_epoch", &R::train,
                    &TrainConfig::lr_decay_per_epoch),
        DoubleField("train.weight_decay", &R::train, &TrainConfig::weight_decay),
        DoubleField("train.max_grad_norm", &R::train, &TrainConfig::max_grad_norm),
        Int64Field("train.steps_per_stage", &R::train,
                   &TrainConfig::steps_per_stage),
        Uint64Field("train.seed", &R::train, &TrainConfig::seed),
        BoolField("train.adversarial_in_joint", &R::train,
                  &TrainConfig::adversarial_in_joint),
        DoubleField("train.commitment_weight", &R::train,
                    &TrainConfig::commitment_weight),
        DoubleField("train.ema_decay", &R::train, &TrainConfig::ema_decay),
        IntField("train.dead_code_window", &R::train,
                 &TrainConfig::dead_code_window),
        IntField("train.kmeans_iterations", &R::train,
                 &TrainConfig::kmeans_iterations),
        IntField("train.mel_bins", &R::train, &TrainConfig::mel_bins),
        DoubleField("train.mel_fmin", &R::train, &TrainConfig::mel_fmin),
        DoubleField("train.mel_fmax", &R::train, &TrainConfig::mel_fmax),
        IntField("train.freeze_check_interval", &R::train,
                 &TrainConfig::freeze_check_interval),
        Field{"paths.output_dir", [](const R& c) { return c.output_dir; },
              [](R& c, const std::string& v) {
                c.output_dir = v;
                return absl::OkStatus();
              }},
        Field{"paths.loss_log", [](const R& c) { return c.loss_log; },
              [](R& c, const std::string& v) {
                c.loss_log = v;
                return absl::OkStatus();
              }},
    };
    return f;
  }();
  return *fields;
}

const Field* FindField(const std::string& key) {
  for (const Field& f : Fields()) {
    if (f.key == key) return &f;
  }
  return nullptr;
}

}  // namespace

absl::Status TrainConfig::Validate(int frame_shift) const {
  if (crop_length <= 0 || frame_shift <= 0 || crop_length % frame_shift != 0) {
    return absl::InvalidArgumentError(absl::StrCat(
        "crop_length ", crop_length, " must be a positive multiple of ",
        "frame_shift ", frame_shift));
  }
  if (batch_size < 1) {
    return absl::InvalidArgumentError("batch_size must be at least 1");
  }
  if (!(lr_decay_per_epoch > 0.0 && lr_decay_per_epoch <= 1.0)) {
    return absl::InvalidArgumentError("lr_decay_per_epoch must be in (0, 1]");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    return absl::InvalidArgumentError("Adam betas must be in [0, 1)");
  }
  if (!(initial_lr > 0.0) || weight_decay < 0.0 || max_grad_norm < 0.0) {
    return absl::InvalidArgumentError(
        "learning rate must be positive, decay and clip non-negative");
  }
  if (steps_per_stage < 0) {
    return absl::InvalidArgumentError("steps_per_stage must be >= 0");
  }
  if (commitment_weight < 0.0 || !(ema_decay > 0.0 && ema_decay < 1.0) ||
      dead_code_window < 1 || kmeans_iterations < 0) {
    return absl::InvalidArgumentError("invalid quantizer training settings");
  }
  if (mel_bins < 1 || mel_fmin < 0.0 || mel_fmax < 0.0) {
    return absl::InvalidArgumentError("invalid mel settings");
  }
  if (freeze_check_interval < 1) {
    return absl::InvalidArgumentError("freeze_check_interval must be >= 1");
  }
  return absl::OkStatus();
}

absl::Status RunConfig::Validate() const {
  RETURN_IF_ERROR(signal.Validate());
  RETURN_IF_ERROR(codec.Validate());
  RETURN_IF_ERROR(discriminator.Validate());
  RETURN_IF_ERROR(weights.Validate());
  RETURN_IF_ERROR(train.Validate(signal.frame_shift));
  const int64_t block =
      static_cast<int64_t>(signal.frame_shift) * codec.down_up_ratio;
  if (train.crop_length < signal.frame_length || train.crop_length < block) {
    return absl::InvalidArgumentError(absl::StrCat(
        "crop_length ", train.crop_length,
        " is shorter than one frame or one latent frame"));
  }
  if (train.mel_fmax > signal.sample_rate / 2.0) {
    return absl::InvalidArgumentError("mel_fmax exceeds the Nyquist frequency");
  }
  // Training waveforms cover whole analysis frames of the crop.
  const int64_t wave_len = FrameCount(train.crop_length, signal) * signal.frame_shift;
  for (int p : discriminator.periods) {
    if (p > wave_len) {
      return absl::InvalidArgumentError("a period exceeds the crop length");
    }
  }
  for (const auto& r : discriminator.resolutions) {
    if (r.fft_size > wave_len) {
      return absl::InvalidArgumentError(absl::StrCat(
          "discriminator STFT size ", r.fft_size, " exceeds the crop length"));
    }
  }
  return absl::OkStatus();
}

std::vector<std::string> ConfigKeys() {
  std::vector<std::string> keys;
  for (const Field& f : Fields()) keys.push_back(f.key);
  return keys;
}

absl::Status SetConfigValue(RunConfig& config, const std::string& key,
                            const std::string& value) {
  const Field* field = FindField(key);
  if (field == nullptr) {
    return absl::InvalidArgumentError(absl::StrCat("unknown config key: ", key));
  }
  return field->set(config, value);
}

absl::StatusOr<std::string> GetConfigValue(const RunConfig& config,
                                           const std::string& key) {
  const Field* field = FindField(key);
  if (field == nullptr) {
    return absl::InvalidArgumentError(absl::StrCat("unknown config key: ", key));
  }
  return field->get(config);
}

absl::Status ApplyConfigText(RunConfig& config, const std::string& text) {
  int line_no = 0;
  for (absl::string_view line : absl::StrSplit(text, '\n')) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != absl::string_view::npos) line = line.substr(0, hash);
    line = absl::StripAsciiWhitespace(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == absl::string_view::npos) {
      return absl::InvalidArgumentError(
          absl::StrCat("line ", line_no, ": expected key = value"));
    }
    const std::string key(absl::StripAsciiWhitespace(line.substr(0, eq)));
    const std::string value(absl::StripAsciiWhitespace(line.substr(eq + 1)));
    if (absl::Status s = SetConfigValue(config, key, value); !s.ok()) {
      return absl::InvalidArgumentError(
          absl::StrCat("line ", line_no, ": ", s.message()));
    }
  }
  return absl::OkStatus();
}

absl::StatusOr<RunConfig> LoadRunConfig(
    const std::string& path, const std::vector<std::string>& overrides) {
  RunConfig config;
  if (!path.empty()) {
    ASSIGN_OR_RETURN(std::vector<uint8_t> bytes, ReadFileBytes(path));
    RETURN_IF_ERROR(
        ApplyConfigText(config, std::string(bytes.begin(), bytes.end())));
  }
  for (const std::string& o : overrides) {
    const size_t eq = o.find('=');
    if (eq == std::string::npos) {
      return absl::InvalidArgumentError(
          absl::StrCat("override '", o, "' is not key=value"));
    }
    RETURN_IF_ERROR(SetConfigValue(
        config, std::string(absl::StripAsciiWhitespace(o.substr(0, eq))),
        std::string(absl::StripAsciiWhitespace(o.substr(eq + 1)))));
  }
  RETURN_IF_ERROR(config.Validate());
  return config;
}

std::string ToConfigText(const RunConfig& config) {
  std::string out;
  for (const Field& f : Fields()) {
    absl::StrAppend(&out, f.key, " = ", f.get(config), "\n");
  }
  return out;
}

}  // namespace apcodec
