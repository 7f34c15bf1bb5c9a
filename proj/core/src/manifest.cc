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

#include "apcodec/manifest.h"

#include <charconv>
#include <filesystem>
#include <set>

#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_split.h"
#include "absl/strings/strip.h"
#include "apcodec/file_util.h"
#include "apcodec/status_macros.h"

namespace apcodec {

absl::StatusOr<std::vector<ManifestEntry>> ParseManifest(
    const std::string& text, const std::string& base_dir) {
  std::vector<ManifestEntry> entries;
  std::set<std::string> seen;
  int line_no = 0;
  for (absl::string_view raw : absl::StrSplit(text, '\n')) {
    ++line_no;
    absl::string_view line = absl::StripTrailingAsciiWhitespace(raw);
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> fields = absl::StrSplit(line, '\t');
    if (fields.size() < 2 || fields.size() > 3 || fields[0].empty() ||
        fields[1].empty()) {
      return absl::InvalidArgumentError(absl::StrCat(
          "manifest line ", line_no, ": expected id<TAB>path[<TAB>duration]"));
    }
    ManifestEntry entry;
    entry.id = fields[0];
    std::filesystem::path p(fields[1]);
    if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
    entry.path = p.lexically_normal().string();
    if (fields.size() == 3 &&
        !absl::SimpleAtod(fields[2], &entry.duration_seconds)) {
      return absl::InvalidArgumentError(
          absl::StrCat("manifest line ", line_no, ": bad duration"));
    }
    if (!seen.insert(entry.id).second) {
      return absl::InvalidArgumentError(
          absl::StrCat("manifest line ", line_no, ": duplicate id ", entry.id));
    }
    entries.push_back(std::move(entry));
  }
  return entries;
}

absl::StatusOr<std::vector<ManifestEntry>> ReadManifest(
    const std::string& path) {
  ASSIGN_OR_RETURN(std::vector<uint8_t> bytes, ReadFileBytes(path));
  return ParseManifest(std::string(bytes.begin(), bytes.end()),
                       std::filesystem::path(path).parent_path().string());
}

std::string FormatManifest(const std::vector<ManifestEntry>& entries) {
  std::string out;
  for (const ManifestEntry& e : entries) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), e.duration_seconds);
    absl::StrAppend(&out, e.id, "\t", e.path, "\t",
                    absl::string_view(buf, end - buf), "\n");
  }
  return out;
}

}  // namespace apcodec
