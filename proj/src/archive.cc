// src/archive.cc

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

#include "ser/archive.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ser/error.h"

namespace ser {

static_assert(std::endian::native == std::endian::little,
              "archive I/O copies float32 payloads verbatim");

namespace {

constexpr std::size_t kHeaderBytes = 16;

std::size_t align_up(std::size_t v) {
  return (v + kArchiveAlignment - 1) / kArchiveAlignment * kArchiveAlignment;
}

}  // namespace

const Tensor& TensorArchive::require(const std::string& name,
                                     const std::vector<std::size_t>& shape) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw ArchiveError("missing tensor '" + name + "'", name);
  if (it->second.shape() != shape)
    throw ArchiveError("tensor '" + name + "': expected shape " + shape_string(shape) +
                           ", found " + shape_string(it->second.shape()),
                       name);
  return it->second;
}

TensorArchive parse_archive(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), "SERTA", 5) != 0)
    throw ArchiveError("not a tensor archive (bad magic)");
  if (std::memcmp(bytes.data(), kArchiveMagic, sizeof kArchiveMagic) != 0)
    throw VersionError("unsupported tensor archive version");
  if (bytes.size() < kHeaderBytes) throw ArchiveError("truncated archive header");

  std::uint64_t manifest_len = 0;
  std::memcpy(&manifest_len, bytes.data() + 8, sizeof manifest_len);
  if (manifest_len > bytes.size() - kHeaderBytes) throw ArchiveError("truncated archive manifest");

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.begin() + kHeaderBytes,
                                     bytes.begin() + kHeaderBytes + static_cast<std::ptrdiff_t>(manifest_len));
  } catch (const nlohmann::json::exception& e) {
    throw ArchiveError(std::string("malformed archive manifest: ") + e.what());
  }
  if (!manifest.is_object()) throw ArchiveError("archive manifest is not a JSON object");
  const auto version = manifest.value("format_version", nlohmann::json());
  if (!version.is_number_integer() || version.get<long long>() != kArchiveFormatVersion)
    throw VersionError("archive format_version " + version.dump() + ", expected " +
                       std::to_string(kArchiveFormatVersion));

  const std::size_t payload = align_up(kHeaderBytes + manifest_len);
  const std::size_t payload_size = bytes.size() > payload ? bytes.size() - payload : 0;

  TensorArchive archive;
  const auto index = manifest.value("tensor_index", nlohmann::json::object());
  if (!index.is_object()) throw ArchiveError("tensor_index is not an object");
  try {
    for (const auto& [name, entry] : index.items()) {
      auto shape = entry.at("shape").get<std::vector<std::size_t>>();
      const auto offset = entry.at("offset").get<std::size_t>();
      std::size_t count = 1;
      for (auto e : shape) {
        if (e == 0) throw ArchiveError("tensor '" + name + "' has a zero extent", name);
        if (count > payload_size / e) throw ArchiveError("tensor '" + name + "' extends past end of file", name);
        count *= e;
      }
      if (offset % kArchiveAlignment != 0)
        throw ArchiveError("tensor '" + name + "' is not 64-byte aligned", name);
      if (offset > payload_size || count * sizeof(float) > payload_size - offset)
        throw ArchiveError("tensor '" + name + "' extends past end of file", name);
      std::vector<float> data(count);
      std::memcpy(data.data(), bytes.data() + payload + offset, count * sizeof(float));
      archive.tensors.emplace(name, Tensor(std::move(shape), std::move(data)));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ArchiveError(std::string("malformed tensor_index: ") + e.what());
  }
  manifest.erase("tensor_index");
  manifest.erase("format_version");
  archive.manifest = std::move(manifest);
  return archive;
}

TensorArchive read_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArchiveError("cannot open archive " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return parse_archive(bytes);
  } catch (const VersionError& e) {
    throw VersionError(path.string() + ": " + e.what());
  } catch (const ArchiveError& e) {
    throw ArchiveError(path.string() + ": " + e.what(), e.tensor_name());
  }
}

std::vector<std::uint8_t> serialize_archive(const TensorArchive& archive) {
  nlohmann::json manifest = archive.manifest;
  manifest["format_version"] = kArchiveFormatVersion;
  nlohmann::json index = nlohmann::json::object();
  std::size_t offset = 0, used = 0;
  for (const auto& [name, tensor] : archive.tensors) {
    index[name] = {{"shape", tensor.shape()}, {"offset", offset}};
    used = offset + tensor.size() * sizeof(float);
    offset = align_up(used);
  }
  manifest["tensor_index"] = index;
  const std::string text = manifest.dump();

  const std::size_t payload = align_up(kHeaderBytes + text.size());
  std::vector<std::uint8_t> out(payload + used, 0);
  std::memcpy(out.data(), kArchiveMagic, sizeof kArchiveMagic);
  const std::uint64_t len = text.size();
  std::memcpy(out.data() + 8, &len, sizeof len);
  std::memcpy(out.data() + kHeaderBytes, text.data(), text.size());
  for (const auto& [name, tensor] : archive.tensors) {
    const auto at = index[name]["offset"].get<std::size_t>();
    std::memcpy(out.data() + payload + at, tensor.raw(), tensor.size() * sizeof(float));
  }
  return out;
}

void write_archive(const std::filesystem::path& path, const TensorArchive& archive) {
  const auto bytes = serialize_archive(archive);
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ArchiveError("cannot write archive " + path.string());
}

}  // namespace ser
