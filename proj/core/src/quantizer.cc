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

#include "apcodec/quantizer.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "absl/strings/str_cat.h"
#include "glog/logging.h"

namespace apcodec {
namespace {

double SquaredDistance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    d += diff * diff;
  }
  return d;
}

// Copies `row` into `dst` with a small relative jitter so reseeded codewords
// never coincide exactly.
void JitteredCopy(std::span<const double> row, std::span<double> dst,
                  Rng& rng) {
  double rms = 0.0;
  for (double v : row) rms += v * v;
  rms = std::sqrt(rms / std::max<size_t>(row.size(), 1)) + 1e-8;
  std::normal_distribution<double> noise(0.0, 1e-3 * rms);
  for (size_t i = 0; i < row.size(); ++i) dst[i] = row[i] + noise(rng);
}

}  // namespace

int32_t NearestCodeword(std::span<const double> vector, const Matrix& table) {
  CHECK_EQ(static_cast<int64_t>(vector.size()), table.cols);
  int32_t best = 0;
  double best_dist = SquaredDistance(vector, table.row(0));
  for (int64_t k = 1; k < table.rows; ++k) {
    const double d = SquaredDistance(vector, table.row(k));
    if (d < best_dist) {
      best_dist = d;
      best = static_cast<int32_t>(k);
    }
  }
  return best;
}

absl::StatusOr<QuantizeResult> Quantize(const LatentSequence& latent,
                                        const Codebooks& books) {
  if (latent.frames() == 0) {
    return absl::InvalidArgumentError("cannot quantize an empty latent sequence");
  }
  if (books.num_quantizers() == 0) {
    return absl::InvalidArgumentError("codebooks are empty");
  }
  if (latent.dim() != books.dim()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "latent dim ", latent.dim(), " does not match codebook dim ",
        books.dim()));
  }
  const int64_t frames = latent.frames();
  const int64_t dim = latent.dim();
  const int stages = books.num_quantizers();
  QuantizeResult result;
  result.tokens = TokenSequence(frames, stages);
  result.quantized.values = Matrix(frames, dim);
  Matrix residual = latent.values;
  for (int q = 0; q < stages; ++q) {
    const Matrix& table = books.tables[q];
    double sum_sq = 0.0;
    for (int64_t f = 0; f < frames; ++f) {
      const int32_t k = NearestCodeword(residual.row(f), table);
      result.tokens.at(f, q) = k;
      auto r = residual.row(f);
      auto c = table.row(k);
      auto out = result.quantized.values.row(f);
      for (int64_t d = 0; d < dim; ++d) {
        out[d] += c[d];
        r[d] -= c[d];
        sum_sq += r[d] * r[d];
      }
    }
    result.residual_norms.push_back(sum_sq / static_cast<double>(frames * dim));
  }
  return result;
}

absl::StatusOr<LatentSequence> Dequantize(const TokenSequence& tokens,
                                          const Codebooks& books) {
  if (tokens.num_quantizers != books.num_quantizers()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "token stream has ", tokens.num_quantizers, " stages, codebooks have ",
        books.num_quantizers()));
  }
  if (static_cast<int64_t>(tokens.indices.size()) !=
      tokens.frames * tokens.num_quantizers) {
    return absl::InvalidArgumentError("token matrix has inconsistent size");
  }
  const int64_t size = books.codebook_size();
  LatentSequence out{Matrix(tokens.frames, books.dim())};
  for (int64_t f = 0; f < tokens.frames; ++f) {
    auto dst = out.values.row(f);
    for (int q = 0; q < tokens.num_quantizers; ++q) {
      const int32_t k = tokens.at(f, q);
      if (k < 0 || k >= size) {
        return absl::DataLossError(absl::StrCat(
            "token ", k, " at frame ", f, " stage ", q,
            " is outside codebook of size ", size));
      }
      auto c = books.tables[q].row(k);
      for (size_t d = 0; d < dst.size(); ++d) dst[d] += c[d];
    }
  }
  return out;
}

ResidualVectorQuantizer::ResidualVectorQuantizer(int num_quantizers,
                                                 int codebook_size, int dim,
                                                 Rng& rng) {
  CHECK_GT(num_quantizers, 0);
  CHECK_GT(codebook_size, 0);
  CHECK_GT(dim, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int q = 0; q < num_quantizers; ++q) {
    Matrix table(codebook_size, dim);
    for (double& v : table.values) v = normal(rng);
    embed_sum_.push_back(table);
    books_.tables.push_back(std::move(table));
    cluster_size_.emplace_back(codebook_size, 1.0);
    usage_.emplace_back(codebook_size, 0.0);
  }
}

QuantizerTrace ResidualVectorQuantizer::Forward(const Tensor& latent) const {
  CHECK_EQ(latent.rank(), 2);
  const int64_t frames = latent.dim(0);
  const int64_t dim = latent.dim(1);
  CHECK_EQ(dim, books_.dim());
  const int stages = books_.num_quantizers();
  QuantizerTrace trace;
  trace.tokens = TokenSequence(frames, stages);
  std::vector<double> total(frames * dim, 0.0);
  Tensor residual = latent;
  for (int q = 0; q < stages; ++q) {
    const Matrix& table = books_.tables[q];
    auto rv = residual.data();
    std::vector<double> chosen(frames * dim);
    double sum_sq = 0.0;
    for (int64_t f = 0; f < frames; ++f) {
      std::span<const double> row = rv.subspan(f * dim, dim);
      const int32_t k = NearestCodeword(row, table);
      trace.tokens.at(f, q) = k;
      auto c = table.row(k);
      for (int64_t d = 0; d < dim; ++d) {
        chosen[f * dim + d] = c[d];
        total[f * dim + d] += c[d];
        const double r = row[d] - c[d];
        sum_sq += r * r;
      }
    }
    trace.residual_norms.push_back(sum_sq / static_cast<double>(frames * dim));
    Tensor codewords = Tensor::FromData({frames, dim}, std::move(chosen));
    trace.stage_inputs.push_back(residual);
    trace.stage_outputs.push_back(codewords);
    residual = Sub(residual, codewords);
  }
  trace.quantized =
      StraightThrough(latent, Tensor::FromData({frames, dim}, std::move(total)));
  return trace;
}

void ResidualVectorQuantizer::InitializeFromData(
    const Matrix& latents, const QuantizerTrainingOptions& options, Rng& rng) {
  CHECK_EQ(latents.cols, books_.dim());
  CHECK_GT(latents.rows, 0);
  const int64_t rows = latents.rows;
  const int64_t dim = latents.cols;
  const int64_t size = books_.codebook_size();
  Matrix residual = latents;
  for (int q = 0; q < books_.num_quantizers(); ++q) {
    Matrix& table = books_.tables[q];
    // Random distinct rows where possible.
    std::vector<int64_t> order(rows);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (int64_t k = 0; k < size; ++k) {
      JitteredCopy(residual.row(order[k % rows]), table.row(k), rng);
    }
    std::vector<int32_t> assign(rows);
    std::vector<double> counts(size);
    Matrix sums(size, dim);
    for (int it = 0; it < options.kmeans_iterations; ++it) {
      std::fill(counts.begin(), counts.end(), 0.0);
      std::fill(sums.values.begin(), sums.values.end(), 0.0);
      for (int64_t r = 0; r < rows; ++r) {
        assign[r] = NearestCodeword(residual.row(r), table);
        counts[assign[r]] += 1.0;
        auto s = sums.row(assign[r]);
        auto v = residual.row(r);
        for (int64_t d = 0; d < dim; ++d) s[d] += v[d];
      }
      std::uniform_int_distribution<int64_t> pick(0, rows - 1);
      for (int64_t k = 0; k < size; ++k) {
        if (counts[k] > 0) {
          auto dst = table.row(k);
          auto s = sums.row(k);
          for (int64_t d = 0; d < dim; ++d) dst[d] = s[d] / counts[k];
        } else {
          JitteredCopy(residual.row(pick(rng)), table.row(k), rng);
        }
      }
    }
    for (int64_t k = 0; k < size; ++k) {
      cluster_size_[q][k] = 1.0;
      auto es = embed_sum_[q].row(k);
      auto c = table.row(k);
      std::copy(c.begin(), c.end(), es.begin());
      usage_[q][k] = 0.0;
    }
    for (int64_t r = 0; r < rows; ++r) {
      const int32_t k = NearestCodeword(residual.row(r), table);
      auto v = residual.row(r);
      auto c = table.row(k);
      for (int64_t d = 0; d < dim; ++d) v[d] -= c[d];
    }
  }
  updates_since_reseed_ = 0;
  initialized_ = true;
}

void ResidualVectorQuantizer::UpdateEma(
    const std::vector<Matrix>& stage_inputs,
    const std::vector<std::vector<int32_t>>& tokens,
    const QuantizerTrainingOptions& options, Rng& rng) {
  const int stages = books_.num_quantizers();
  CHECK_EQ(static_cast<int>(stage_inputs.size()), stages);
  CHECK_EQ(static_cast<int>(tokens.size()), stages);
  const int64_t size = books_.codebook_size();
  const int64_t dim = books_.dim();
  const double decay = options.ema_decay;
  for (int q = 0; q < stages; ++q) {
    const Matrix& rows = stage_inputs[q];
    CHECK_EQ(static_cast<int64_t>(tokens[q].size()), rows.rows);
    std::vector<double> counts(size, 0.0);
    Matrix sums(size, dim);
    for (int64_t r = 0; r < rows.rows; ++r) {
      const int32_t k = tokens[q][r];
      counts[k] += 1.0;
      auto s = sums.row(k);
      auto v = rows.row(r);
      for (int64_t d = 0; d < dim; ++d) s[d] += v[d];
    }
    double total = 0.0;
    for (int64_t k = 0; k < size; ++k) {
      cluster_size_[q][k] = decay * cluster_size_[q][k] + (1.0 - decay) * counts[k];
      total += cluster_size_[q][k];
      usage_[q][k] += counts[k];
      auto es = embed_sum_[q].row(k);
      auto s = sums.row(k);
      for (int64_t d = 0; d < dim; ++d) {
        es[d] = decay * es[d] + (1.0 - decay) * s[d];
      }
    }
    const double eps = options.laplace_epsilon;
    for (int64_t k = 0; k < size; ++k) {
      const double smoothed =
          (cluster_size_[q][k] + eps) / (total + size * eps) * total;
      auto dst = books_.tables[q].row(k);
      auto es = embed_sum_[q].row(k);
      for (int64_t d = 0; d < dim; ++d) dst[d] = es[d] / smoothed;
    }
  }
  if (++updates_since_reseed_ >= options.dead_code_window) {
    for (int q = 0; q < stages; ++q) {
      if (stage_inputs[q].rows > 0) ReseedDeadCodes(q, stage_inputs[q], rng);
      std::fill(usage_[q].begin(), usage_[q].end(), 0.0);
    }
    updates_since_reseed_ = 0;
  }
}

void ResidualVectorQuantizer::ReseedDeadCodes(int stage, const Matrix& rows,
                                              Rng& rng) {
  std::uniform_int_distribution<int64_t> pick(0, rows.rows - 1);
  Matrix& table = books_.tables[stage];
  for (int64_t k = 0; k < table.rows; ++k) {
    if (usage_[stage][k] > 0.0) continue;
    JitteredCopy(rows.row(pick(rng)), table.row(k), rng);
    auto es = embed_sum_[stage].row(k);
    auto c = table.row(k);
    std::copy(c.begin(), c.end(), es.begin());
    cluster_size_[stage][k] = 1.0;
  }
}

ResidualVectorQuantizer::State ResidualVectorQuantizer::GetState() const {
  return State{books_,   cluster_size_,         embed_sum_,
               usage_,   updates_since_reseed_, initialized_};
}

absl::Status ResidualVectorQuantizer::SetState(State state) {
  const auto& ref = books_;
  if (state.books.num_quantizers() != ref.num_quantizers() ||
      state.books.codebook_size() != ref.codebook_size() ||
      state.books.dim() != ref.dim()) {
    return absl::InvalidArgumentError("quantizer state shape mismatch");
  }
  if (state.cluster_size.size() != state.books.tables.size() ||
      state.embed_sum.size() != state.books.tables.size() ||
      state.usage.size() != state.books.tables.size()) {
    return absl::InvalidArgumentError("quantizer EMA state is incomplete");
  }
  const int64_t size = ref.codebook_size();
  for (size_t q = 0; q < state.books.tables.size(); ++q) {
    const Matrix& t = state.books.tables[q];
    if (t.rows != size || t.cols != ref.dim() ||
        static_cast<int64_t>(t.values.size()) != size * ref.dim() ||
        static_cast<int64_t>(state.cluster_size[q].size()) != size ||
        state.embed_sum[q].rows != size || state.embed_sum[q].cols != ref.dim() ||
        static_cast<int64_t>(state.embed_sum[q].values.size()) !=
            size * ref.dim() ||
        static_cast<int64_t>(state.usage[q].size()) != size) {
      return absl::InvalidArgumentError(
          absl::StrCat("quantizer state for stage ", q, " has a wrong shape"));
    }
  }
  books_ = std::move(state.books);
  cluster_size_ = std::move(state.cluster_size);
  embed_sum_ = std::move(state.embed_sum);
  usage_ = std::move(state.usage);
  updates_since_reseed_ = state.updates_since_reseed;
  initialized_ = state.initialized;
  return absl::OkStatus();
}

}  // namespace apcodec
