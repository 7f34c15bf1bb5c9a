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

#ifndef APCODEC_FILE_UTIL_H_
#define APCODEC_FILE_UTIL_H_

#include <cstdint>
#include <string>
#include <vector>

#include "absl/status/statusor.h"

namespace apcodec {

absl::StatusOr<std::vector<uint8_t>> ReadFileBytes(const std::string& path);

// Writes to a sibling temporary file, then renames it over `path`, so readers
// never observe a partially written file.
absl::Status WriteFileAtomically(const std::string& path,
                                 const std::vector<uint8_t>& bytes);
absl::Status WriteFileAtomically(const std::string& path,
                                 const std::string& text);

}  // namespace apcodec

#endif  // APCODEC_FILE_UTIL_H_
