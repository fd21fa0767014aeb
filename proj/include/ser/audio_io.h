// include/ser/audio_io.h

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

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace ser {

/// Mono waveform. Decoded clips hold amplitudes in [-1, 1]; normalize() output
/// is standardized and therefore unbounded.
struct AudioClip {
  std::vector<float> samples;
  int sample_rate = 0;
  std::string source_path;

  double duration_seconds() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

enum class WavEncoding { kPcm16, kFloat32 };

/// Parses a little-endian RIFF/WAVE image (PCM16 or IEEE float32, 1 or 2
/// channels). Stereo is averaged to mono; PCM16 maps to value / 32768.
AudioClip decode_wav(std::span<const std::uint8_t> bytes);

AudioClip read_wav(const std::filesystem::path& path);

/// `interleaved` holds frames of `channels` samples each. PCM16 output is
/// rounded and clipped to the int16 range.
std::vector<std::uint8_t> encode_wav(std::span<const float> interleaved, int channels,
                                     int sample_rate, WavEncoding encoding = WavEncoding::kPcm16);

void write_wav(const std::filesystem::path& path, const AudioClip& clip,
               WavEncoding encoding = WavEncoding::kPcm16);

/// Taps of the windowed-sinc interpolation kernel.
inline constexpr int kResampleTaps = 64;
inline constexpr double kResampleKaiserBeta = 8.6;

/// Band-limited polyphase resampling. Output length is
/// round(len * target / source); identical rates return the input unchanged.
AudioClip resample(const AudioClip& clip, int target_rate);

inline constexpr double kNormalizeEpsilon = 1e-7;

/// Zero mean, unit population variance. Near-constant input maps to zeros.
AudioClip normalize(const AudioClip& clip);

}  // namespace ser
