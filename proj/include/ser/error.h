// include/ser/error.h

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

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace ser {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// audio-io
class FormatError : public Error { using Error::Error; };
class UnsupportedError : public Error { using Error::Error; };
class EmptyAudioError : public Error { using Error::Error; };

// tensor-core / encoder
class ShapeError : public Error { using Error::Error; };

class InputTooShortError : public Error {
 public:
  InputTooShortError(const std::string& what, std::size_t min_samples)
      : Error(what), min_samples_(min_samples) {}
  std::size_t min_samples() const { return min_samples_; }

 private:
  std::size_t min_samples_;
};

class ArchiveError : public Error {
 public:
  ArchiveError(const std::string& what, std::string tensor_name = {})
      : Error(what), tensor_name_(std::move(tensor_name)) {}
  const std::string& tensor_name() const { return tensor_name_; }

 private:
  std::string tensor_name_;
};

class VersionError : public Error { using Error::Error; };

// classifier-head / datasets / eval
class LabelError : public Error { using Error::Error; };
class DataError : public Error { using Error::Error; };
class StratifyError : public Error { using Error::Error; };
class EmptyDatasetError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };

}  // namespace ser
