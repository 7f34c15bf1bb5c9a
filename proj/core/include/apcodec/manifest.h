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

#ifndef APCODEC_MANIFEST_H_
#define APCODEC_MANIFEST_H_

#include <string>
#include <vector>

#include "absl/status/statusor.h"

namespace apcodec {

// One utterance of a corpus manifest.
struct ManifestEntry {
  std::string id;
  std::string path;  // absolute, or relative to the working directory
  double duration_seconds = 0.0;
  bool operator==(const ManifestEntry&) const = default;
};

// Parses a tab-separated "id<TAB>path[<TAB>duration]" manifest. Blank lines
// and lines starting with '#' are skipped. Relative paths are resolved
// against the directory containing the manifest. Duplicate ids are errors.
absl::StatusOr<std::vector<ManifestEntry>> ParseManifest(
    const std::string& text, const std::string& base_dir);
absl::StatusOr<std::vector<ManifestEntry>> ReadManifest(
    const std::string& path);

// Inverse of ParseManifest with paths written verbatim.
std::string FormatManifest(const std::vector<ManifestEntry>& entries);

}  // namespace apcodec

#endif  // APCODEC_MANIFEST_H_
