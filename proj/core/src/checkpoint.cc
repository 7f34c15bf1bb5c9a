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

#include "apcodec/checkpoint.h"

#include <bit>
#include <cstring>
#include <map>

#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_split.h"
#include "apcodec/file_util.h"
#include "apcodec/status_macros.h"
#include "json.hpp"
#include "openssl/evp.h"

namespace apcodec {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are stored in host byte order");

using json = nlohmann::json;

constexpr char kMagic[4] = {'A', 'P', 'C', 'K'};

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr);
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void Update(const void* data, size_t size) {
    EVP_DigestUpdate(ctx_, data, size);
  }
  void Update(const std::string& s) {
    const uint64_t n = s.size();
    Update(&n, sizeof(n));
    Update(s.data(), s.size());
  }
  void Update(const std::vector<double>& v) {
    const uint64_t n = v.size();
    Update(&n, sizeof(n));
    Update(v.data(), v.size() * sizeof(double));
  }
  std::string HexDigest() {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_, digest, &len);
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
      out.push_back(kHex[digest[i] >> 4]);
      out.push_back(kHex[digest[i] & 15]);
    }
    return out;
  }

 private:
  EVP_MD_CTX* ctx_;
};

std::string HashFrozen(const SignalConfig& signal, const CodecConfig& codec,
                       const std::vector<ArraySnapshot>& encoder,
                       const Codebooks& books) {
  RunConfig shape_only;
  shape_only.signal = signal;
  shape_only.codec = codec;
  Sha256 sha;
  for (const std::string& key : ConfigKeys()) {
    if (key.starts_with("signal.") || key.starts_with("codec.")) {
      sha.Update(key);
      sha.Update(*GetConfigValue(shape_only, key));
    }
  }
  for (const ArraySnapshot& a : encoder) {
    sha.Update(a.name);
    sha.Update(a.shape.data(), a.shape.size() * sizeof(int64_t));
    sha.Update(a.values);
  }
  for (const Matrix& t : books.tables) {
    sha.Update(&t.rows, sizeof(t.rows));
    sha.Update(&t.cols, sizeof(t.cols));
    sha.Update(t.values);
  }
  return sha.HexDigest();
}

// Accumulates named float64 arrays into one payload.
class PayloadWriter {
 public:
  void Add(const std::string& name, const Shape& shape,
           const std::vector<double>& values) {
    index_.push_back(json{{"name", name},
                          {"shape", shape},
                          {"offset", payload_.size()},
                          {"count", values.size()}});
    payload_.insert(payload_.end(), values.begin(), values.end());
  }
  const json& index() const { return index_; }
  const std::vector<double>& payload() const { return payload_; }

 private:
  json index_ = json::array();
  std::vector<double> payload_;
};

class PayloadReader {
 public:
  PayloadReader(std::map<std::string, ArraySnapshot> arrays)
      : arrays_(std::move(arrays)) {}

  absl::StatusOr<ArraySnapshot> Take(const std::string& name) {
    auto it = arrays_.find(name);
    if (it == arrays_.end()) {
      return absl::DataLossError(absl::StrCat("checkpoint lacks ", name));
    }
    ArraySnapshot a = std::move(it->second);
    arrays_.erase(it);
    return a;
  }
  absl::StatusOr<Matrix> TakeMatrix(const std::string& name) {
    ASSIGN_OR_RETURN(ArraySnapshot a, Take(name));
    if (a.shape.size() != 2) {
      return absl::DataLossError(absl::StrCat(name, " is not a matrix"));
    }
    Matrix m;
    m.rows = a.shape[0];
    m.cols = a.shape[1];
    m.values = std::move(a.values);
    return m;
  }
  std::vector<ArraySnapshot> TakePrefix(const std::string& prefix) {
    std::vector<ArraySnapshot> out;
    for (auto it = arrays_.begin(); it != arrays_.end();) {
      if (it->first.starts_with(prefix)) {
        it->second.name = it->first.substr(prefix.size());
        out.push_back(std::move(it->second));
        it = arrays_.erase(it);
      } else {
        ++it;
      }
    }
    return out;
  }
  bool empty() const { return arrays_.empty(); }

 private:
  std::map<std::string, ArraySnapshot> arrays_;
};

void AddParameters(PayloadWriter& w, const std::string& module,
                   const std::vector<ArraySnapshot>& params, json& order) {
  json names = json::array();
  for (const ArraySnapshot& a : params) {
    w.Add(absl::StrCat(module, "/", a.name), a.shape, a.values);
    names.push_back(a.name);
  }
  order[module] = names;
}

void AddOptimizer(PayloadWriter& w, const std::string& prefix,
                  const AdamW::State& state, json& header) {
  header[prefix + "_steps"] = state.steps;
  header[prefix + "_tensors"] = state.first_moment.size();
  for (size_t i = 0; i < state.first_moment.size(); ++i) {
    const int64_t n = state.first_moment[i].size();
    w.Add(absl::StrCat(prefix, "/m/", i), {n}, state.first_moment[i]);
    w.Add(absl::StrCat(prefix, "/v/", i), {n}, state.second_moment[i]);
  }
}

absl::StatusOr<std::vector<ArraySnapshot>> TakeOrdered(PayloadReader& r,
                                                       const json& order,
                                                       const std::string& module) {
  std::vector<ArraySnapshot> out;
  if (!order.contains(module)) return out;
  for (const auto& name : order[module]) {
    ASSIGN_OR_RETURN(ArraySnapshot a,
                     r.Take(absl::StrCat(module, "/", name.get<std::string>())));
    a.name = name.get<std::string>();
    out.push_back(std::move(a));
  }
  return out;
}

absl::StatusOr<AdamW::State> TakeOptimizer(PayloadReader& r,
                                           const std::string& prefix,
                                           const json& header) {
  AdamW::State state;
  state.steps = header.value(prefix + "_steps", int64_t{0});
  const size_t n = header.value(prefix + "_tensors", size_t{0});
  for (size_t i = 0; i < n; ++i) {
    ASSIGN_OR_RETURN(ArraySnapshot m, r.Take(absl::StrCat(prefix, "/m/", i)));
    ASSIGN_OR_RETURN(ArraySnapshot v, r.Take(absl::StrCat(prefix, "/v/", i)));
    state.first_moment.push_back(std::move(m.values));
    state.second_moment.push_back(std::move(v.values));
  }
  return state;
}

template <typename T>
void AppendRaw(std::vector<uint8_t>& out, const T& value) {
  const auto* p = reinterpret_cast<const uint8_t*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

}  // namespace

std::string StageTag(bool individual, int iteration) {
  const char* stage = individual ? kIndividualTag : kJointTag;
  if (iteration <= 0) return stage;
  return absl::StrCat("iteration-", iteration, "-", stage);
}

bool IsIndividualTag(const std::string& tag) {
  return tag == kIndividualTag || tag.ends_with("-individual");
}

bool IsValidStageTag(const std::string& tag) {
  if (tag == kJointTag || tag == kIndividualTag) return true;
  std::vector<std::string> parts = absl::StrSplit(tag, '-');
  int k;
  return parts.size() == 3 && parts[0] == "iteration" &&
         absl::SimpleAtoi(parts[1], &k) && k >= 1 &&
         (parts[2] == kJointTag || parts[2] == kIndividualTag);
}

std::vector<ArraySnapshot> CaptureParameters(const ParameterList& params) {
  std::vector<ArraySnapshot> out;
  for (const NamedParameter& p : params.entries()) {
    out.push_back(ArraySnapshot{
        p.name, p.tensor.shape(),
        std::vector<double>(p.tensor.data().begin(), p.tensor.data().end())});
  }
  return out;
}

absl::Status RestoreParameters(const std::vector<ArraySnapshot>& snapshot,
                               ParameterList& params) {
  auto& entries = params.mutable_entries();
  if (snapshot.size() != entries.size()) {
    return absl::InvalidArgumentError(
        absl::StrCat("snapshot has ", snapshot.size(), " arrays, model has ",
                     entries.size()));
  }
  for (size_t i = 0; i < entries.size(); ++i) {
    if (snapshot[i].name != entries[i].name ||
        snapshot[i].shape != entries[i].tensor.shape() ||
        static_cast<int64_t>(snapshot[i].values.size()) !=
            entries[i].tensor.numel()) {
      return absl::InvalidArgumentError(
          absl::StrCat("parameter mismatch at ", entries[i].name));
    }
  }
  for (size_t i = 0; i < entries.size(); ++i) {
    std::span<double> dst = entries[i].tensor.mutable_data();
    std::copy(snapshot[i].values.begin(), snapshot[i].values.end(),
              dst.begin());
  }
  return absl::OkStatus();
}

StageCheckpoint CaptureCheckpoint(const RunConfig& config,
                                  const CodecModel& model,
                                  const Discriminators* discriminators) {
  StageCheckpoint ckpt;
  ckpt.config = config;
  ckpt.encoder = CaptureParameters(model.encoder().params());
  ckpt.decoder = CaptureParameters(model.decoder().params());
  ckpt.quantizer = model.quantizer().GetState();
  if (discriminators != nullptr) {
    ckpt.mpd = CaptureParameters(discriminators->mpd().params());
    ckpt.mrd = CaptureParameters(discriminators->mrd().params());
  }
  return ckpt;
}

absl::Status RestoreModel(const StageCheckpoint& checkpoint,
                          CodecModel& model) {
  if (!(model.signal_config() == checkpoint.config.signal) ||
      !(model.codec_config() == checkpoint.config.codec)) {
    return absl::FailedPreconditionError(
        "checkpoint configuration is incompatible with the model");
  }
  RETURN_IF_ERROR(RestoreParameters(checkpoint.encoder, model.encoder().params()));
  RETURN_IF_ERROR(RestoreParameters(checkpoint.decoder, model.decoder().params()));
  return model.quantizer().SetState(checkpoint.quantizer);
}

absl::StatusOr<std::unique_ptr<CodecModel>> BuildModel(
    const StageCheckpoint& checkpoint) {
  RETURN_IF_ERROR(checkpoint.config.signal.Validate());
  RETURN_IF_ERROR(checkpoint.config.codec.Validate());
  auto model = std::make_unique<CodecModel>(checkpoint.config.signal,
                                            checkpoint.config.codec,
                                            checkpoint.config.train.seed);
  RETURN_IF_ERROR(RestoreModel(checkpoint, *model));
  return model;
}

absl::Status RestoreDiscriminators(const StageCheckpoint& checkpoint,
                                   Discriminators& discriminators) {
  RETURN_IF_ERROR(
      RestoreParameters(checkpoint.mpd, discriminators.mpd().params()));
  return RestoreParameters(checkpoint.mrd, discriminators.mrd().params());
}

std::string FrozenModuleHash(const CodecModel& model) {
  return HashFrozen(model.signal_config(), model.codec_config(),
                    CaptureParameters(model.encoder().params()),
                    model.quantizer().codebooks());
}

std::string FrozenModuleHash(const StageCheckpoint& checkpoint) {
  return HashFrozen(checkpoint.config.signal, checkpoint.config.codec,
                    checkpoint.encoder, checkpoint.quantizer.books);
}

std::vector<uint8_t> SerializeCheckpoint(const StageCheckpoint& ckpt) {
  PayloadWriter w;
  json header;
  header["stage_tag"] = ckpt.stage_tag;
  header["frozen_manifest"] = ckpt.frozen_manifest;
  header["training_only"] = {"mpd", "mrd", "generator_optimizer",
                             "discriminator_optimizer"};
  header["config"] = ToConfigText(ckpt.config);
  header["steps"] = ckpt.steps;
  header["parent_hash"] = ckpt.parent_hash;
  header["frozen_hash"] = FrozenModuleHash(ckpt);
  json order;
  AddParameters(w, "encoder", ckpt.encoder, order);
  AddParameters(w, "decoder", ckpt.decoder, order);
  AddParameters(w, "mpd", ckpt.mpd, order);
  AddParameters(w, "mrd", ckpt.mrd, order);
  header["parameters"] = order;

  const auto& q = ckpt.quantizer;
  header["quantizer"] = {{"stages", q.books.tables.size()},
                         {"updates_since_reseed", q.updates_since_reseed},
                         {"initialized", q.initialized}};
  for (size_t s = 0; s < q.books.tables.size(); ++s) {
    const Matrix& t = q.books.tables[s];
    w.Add(absl::StrCat("quantizer/codebook/", s), {t.rows, t.cols}, t.values);
    w.Add(absl::StrCat("quantizer/cluster_size/", s),
          {static_cast<int64_t>(q.cluster_size[s].size())}, q.cluster_size[s]);
    const Matrix& e = q.embed_sum[s];
    w.Add(absl::StrCat("quantizer/embed_sum/", s), {e.rows, e.cols}, e.values);
    w.Add(absl::StrCat("quantizer/usage/", s),
          {static_cast<int64_t>(q.usage[s].size())}, q.usage[s]);
  }
  AddOptimizer(w, "generator_optimizer", ckpt.generator_optimizer, header);
  AddOptimizer(w, "discriminator_optimizer", ckpt.discriminator_optimizer,
               header);
  header["arrays"] = w.index();

  const std::string text = header.dump();
  std::vector<uint8_t> out(kMagic, kMagic + 4);
  AppendRaw(out, kCheckpointVersion);
  AppendRaw(out, static_cast<uint64_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  const auto* p = reinterpret_cast<const uint8_t*>(w.payload().data());
  out.insert(out.end(), p, p + w.payload().size() * sizeof(double));
  return out;
}

absl::StatusOr<StageCheckpoint> DeserializeCheckpoint(
    const std::vector<uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    return absl::InvalidArgumentError("not a checkpoint file (bad magic)");
  }
  if (bytes.size() < 16) return absl::DataLossError("checkpoint is truncated");
  uint32_t version;
  uint64_t header_len;
  std::memcpy(&version, bytes.data() + 4, 4);
  std::memcpy(&header_len, bytes.data() + 8, 8);
  if (version != kCheckpointVersion) {
    return absl::UnimplementedError(
        absl::StrCat("unsupported checkpoint version ", version));
  }
  if (header_len > bytes.size() - 16) {
    return absl::DataLossError("checkpoint header is truncated");
  }
  const json header = json::parse(bytes.begin() + 16,
                                  bytes.begin() + 16 + header_len, nullptr,
                                  /*allow_exceptions=*/false);
  if (header.is_discarded() || !header.is_object()) {
    return absl::DataLossError("checkpoint header is not valid JSON");
  }
  const size_t payload_offset = 16 + header_len;
  const size_t payload_bytes = bytes.size() - payload_offset;
  if (payload_bytes % sizeof(double) != 0) {
    return absl::DataLossError("checkpoint payload is not whole doubles");
  }
  const size_t payload_count = payload_bytes / sizeof(double);

  StageCheckpoint ckpt;
  try {
    std::map<std::string, ArraySnapshot> arrays;
    size_t expected_offset = 0;
    for (const auto& entry : header.at("arrays")) {
      ArraySnapshot a;
      a.name = entry.at("name").get<std::string>();
      a.shape = entry.at("shape").get<Shape>();
      const size_t offset = entry.at("offset").get<size_t>();
      const size_t count = entry.at("count").get<size_t>();
      int64_t numel = 1;
      for (int64_t d : a.shape) numel *= d;
      if (offset != expected_offset || count != static_cast<size_t>(numel) ||
          offset + count > payload_count) {
        return absl::DataLossError(
            absl::StrCat("checkpoint array ", a.name, " is out of bounds"));
      }
      a.values.resize(count);
      std::memcpy(a.values.data(),
                  bytes.data() + payload_offset + offset * sizeof(double),
                  count * sizeof(double));
      expected_offset += count;
      arrays.emplace(a.name, std::move(a));
    }
    if (expected_offset != payload_count) {
      return absl::DataLossError("checkpoint has trailing payload bytes");
    }
    PayloadReader r(std::move(arrays));

    ckpt.stage_tag = header.at("stage_tag").get<std::string>();
    if (!IsValidStageTag(ckpt.stage_tag)) {
      return absl::DataLossError(
          absl::StrCat("unknown stage tag '", ckpt.stage_tag, "'"));
    }
    ckpt.frozen_manifest =
        header.at("frozen_manifest").get<std::vector<std::string>>();
    ckpt.steps = header.at("steps").get<int64_t>();
    ckpt.parent_hash = header.at("parent_hash").get<std::string>();
    absl::Status config_ok = ApplyConfigText(
        ckpt.config, header.at("config").get<std::string>());
    if (!config_ok.ok()) {
      return absl::DataLossError(
          absl::StrCat("checkpoint config: ", config_ok.message()));
    }
    const json& order = header.at("parameters");
    ASSIGN_OR_RETURN(ckpt.encoder, TakeOrdered(r, order, "encoder"));
    ASSIGN_OR_RETURN(ckpt.decoder, TakeOrdered(r, order, "decoder"));
    ASSIGN_OR_RETURN(ckpt.mpd, TakeOrdered(r, order, "mpd"));
    ASSIGN_OR_RETURN(ckpt.mrd, TakeOrdered(r, order, "mrd"));

    const json& qh = header.at("quantizer");
    auto& q = ckpt.quantizer;
    q.updates_since_reseed = qh.at("updates_since_reseed").get<int64_t>();
    q.initialized = qh.at("initialized").get<bool>();
    const size_t stages = qh.at("stages").get<size_t>();
    for (size_t s = 0; s < stages; ++s) {
      ASSIGN_OR_RETURN(Matrix table,
                       r.TakeMatrix(absl::StrCat("quantizer/codebook/", s)));
      q.books.tables.push_back(std::move(table));
      ASSIGN_OR_RETURN(ArraySnapshot cs,
                       r.Take(absl::StrCat("quantizer/cluster_size/", s)));
      q.cluster_size.push_back(std::move(cs.values));
      ASSIGN_OR_RETURN(Matrix es,
                       r.TakeMatrix(absl::StrCat("quantizer/embed_sum/", s)));
      q.embed_sum.push_back(std::move(es));
      ASSIGN_OR_RETURN(ArraySnapshot usage,
                       r.Take(absl::StrCat("quantizer/usage/", s)));
      q.usage.push_back(std::move(usage.values));
    }
    ASSIGN_OR_RETURN(ckpt.generator_optimizer,
                     TakeOptimizer(r, "generator_optimizer", header));
    ASSIGN_OR_RETURN(ckpt.discriminator_optimizer,
                     TakeOptimizer(r, "discriminator_optimizer", header));
    if (!r.empty()) {
      return absl::DataLossError("checkpoint holds unreferenced arrays");
    }
    if (header.at("frozen_hash").get<std::string>() !=
        FrozenModuleHash(ckpt)) {
      return absl::DataLossError("checkpoint encoder/quantizer hash mismatch");
    }
  } catch (const json::exception& e) {
    return absl::DataLossError(
        absl::StrCat("malformed checkpoint header: ", e.what()));
  }
  return ckpt;
}

absl::Status SaveCheckpoint(const StageCheckpoint& checkpoint,
                            const std::string& path) {
  return WriteFileAtomically(path, SerializeCheckpoint(checkpoint));
}

absl::StatusOr<StageCheckpoint> LoadCheckpoint(const std::string& path) {
  ASSIGN_OR_RETURN(std::vector<uint8_t> bytes, ReadFileBytes(path));
  absl::StatusOr<StageCheckpoint> ckpt = DeserializeCheckpoint(bytes);
  if (!ckpt.ok()) {
    return absl::Status(ckpt.status().code(),
                        absl::StrCat(path, ": ", ckpt.status().message()));
  }
  return ckpt;
}

}  // namespace apcodec
