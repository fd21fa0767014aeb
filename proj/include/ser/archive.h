// include/ser/archive.h

// Copyright 2026  The SER Engine Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Portable named-tensor container shared by encoder and head checkpoints.
//
// Layout (all integers little-endian):
//   bytes [0, 8)     magic "SERTA1\0\0"
//   bytes [8, 16)    u64 manifest length L
//   bytes [16, 16+L) UTF-8 JSON manifest
//   payload          starts at the first 64-byte boundary after the manifest
//
// The manifest carries "format_version" and "tensor_index", a map from
// tensor name to {"shape": [...], "offset": N}. Offsets are relative to the
// payload start and multiples of 64; each tensor is row-major float32.

#include <filesystem>
#include <map>
#include <string>

#include "json.hpp"
#include "ser/tensor.h"

namespace ser {

inline constexpr char kArchiveMagic[8] = {'S', 'E', 'R', 'T', 'A', '1', '\0', '\0'};
inline constexpr int kArchiveFormatVersion = 1;
inline constexpr std::size_t kArchiveAlignment = 64;

struct TensorArchive {
  /// Manifest fields other than tensor_index / format_version.
  nlohmann::json manifest = nlohmann::json::object();
  std::map<std::string, Tensor> tensors;

  /// Throws ArchiveError naming the tensor when absent or mis-shaped.
  const Tensor& require(const std::string& name, const std::vector<std::size_t>& shape) const;
};

TensorArchive read_archive(const std::filesystem::path& path);
TensorArchive parse_archive(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> serialize_archive(const TensorArchive& archive);
void write_archive(const std::filesystem::path& path, const TensorArchive& archive);

}  // namespace ser
