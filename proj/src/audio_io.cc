// src/audio_io.cc

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

#include "ser/audio_io.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>

#include "ser/error.h"

namespace ser {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

struct WavFormat {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t block_align = 0;
  std::uint16_t bits = 0;
};

}  // namespace

AudioClip decode_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw FormatError("not a RIFF/WAVE file");

  WavFormat fmt;
  bool have_fmt = false;
  const std::uint8_t* data = nullptr;
  std::size_t data_size = 0;
  bool have_data = false;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::size_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t available = bytes.size() - body;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || size > available) throw FormatError("truncated fmt chunk");
      const std::uint8_t* p = bytes.data() + body;
      fmt.format = read_u16(p);
      fmt.channels = read_u16(p + 2);
      fmt.sample_rate = read_u32(p + 4);
      fmt.block_align = read_u16(p + 12);
      fmt.bits = read_u16(p + 14);
      if (fmt.format == kFormatExtensible) {
        if (size < 40) throw FormatError("truncated WAVE_FORMAT_EXTENSIBLE header");
        fmt.format = read_u16(p + 24);  // first two bytes of the sub-format GUID
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      // Truncated files and streaming writers leave an oversized length here.
      data_size = std::min(size, available);
      have_data = true;
      break;
    }
    pos = body + size + (size & 1);
  }
  if (!have_fmt) throw FormatError("missing fmt chunk");
  if (!have_data) throw FormatError("missing data chunk");
  if (fmt.channels < 1 || fmt.sample_rate == 0 || fmt.bits == 0)
    throw FormatError("invalid fmt chunk");
  if (fmt.channels > 2)
    throw UnsupportedError("unsupported channel count " + std::to_string(fmt.channels));

  const bool pcm16 = fmt.format == kFormatPcm && fmt.bits == 16;
  const bool float32 = fmt.format == kFormatFloat && fmt.bits == 32;
  if (!pcm16 && !float32)
    throw UnsupportedError("unsupported encoding: format tag " + std::to_string(fmt.format) +
                           ", " + std::to_string(fmt.bits) + " bits");
  const std::size_t frame_bytes = static_cast<std::size_t>(fmt.channels) * (fmt.bits / 8);
  if (fmt.block_align != frame_bytes) throw FormatError("block alignment disagrees with format");

  const std::size_t frames = data_size / frame_bytes;
  if (frames == 0) throw EmptyAudioError("WAVE data chunk holds no samples");

  AudioClip clip;
  clip.sample_rate = static_cast<int>(fmt.sample_rate);
  clip.samples.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    const std::uint8_t* p = data + f * frame_bytes;
    double sum = 0.0;
    for (std::size_t c = 0; c < fmt.channels; ++c) {
      if (pcm16) {
        sum += static_cast<std::int16_t>(read_u16(p + 2 * c)) / 32768.0;
      } else {
        float v;
        const std::uint32_t raw = read_u32(p + 4 * c);
        std::memcpy(&v, &raw, sizeof v);
        if (!std::isfinite(v)) throw FormatError("non-finite float sample");
        sum += std::clamp(v, -1.0f, 1.0f);
      }
    }
    clip.samples[f] = static_cast<float>(sum / fmt.channels);
  }
  return clip;
}

AudioClip read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    AudioClip clip = decode_wav(bytes);
    clip.source_path = path.string();
    return clip;
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const UnsupportedError& e) {
    throw UnsupportedError(path.string() + ": " + e.what());
  } catch (const EmptyAudioError& e) {
    throw EmptyAudioError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_wav(std::span<const float> interleaved, int channels,
                                     int sample_rate, WavEncoding encoding) {
  const int bits = encoding == WavEncoding::kPcm16 ? 16 : 32;
  const auto block = static_cast<std::uint16_t>(channels * bits / 8);
  const auto data_bytes = static_cast<std::uint32_t>(interleaved.size() * (bits / 8));
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, encoding == WavEncoding::kPcm16 ? kFormatPcm : kFormatFloat);
  put_u16(out, static_cast<std::uint16_t>(channels));
  put_u32(out, static_cast<std::uint32_t>(sample_rate));
  put_u32(out, static_cast<std::uint32_t>(sample_rate) * block);
  put_u16(out, block);
  put_u16(out, static_cast<std::uint16_t>(bits));
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (float v : interleaved) {
    if (encoding == WavEncoding::kPcm16) {
      const double scaled = std::clamp(std::round(v * 32768.0), -32768.0, 32767.0);
      put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
    } else {
      std::uint32_t raw;
      std::memcpy(&raw, &v, sizeof raw);
      put_u32(out, raw);
    }
  }
  return out;
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip, WavEncoding encoding) {
  const auto bytes = encode_wav(clip.samples, 1, clip.sample_rate, encoding);
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("cannot write " + path.string());
}

namespace {

double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  const double q = x * x / 4.0;
  for (int k = 1; k < 64; ++k) {
    term *= q / (static_cast<double>(k) * k);
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return sum;
}

class SincKernel {
 public:
  static constexpr int kHalf = kResampleTaps / 2;

  explicit SincKernel(double cutoff) : cutoff_(cutoff), i0_beta_(bessel_i0(kResampleKaiserBeta)) {}

  // Taps for input offsets j = -kHalf+1 .. kHalf relative to floor(t), where
  // `frac` = t - floor(t). Normalized to unit DC gain.
  void taps(double frac, std::array<double, kResampleTaps>& out) const {
    double total = 0.0;
    for (int i = 0; i < kResampleTaps; ++i) {
      const double x = (i - kHalf + 1) - frac;
      const double r = x / kHalf;
      const double window =
          std::abs(r) >= 1.0 ? 0.0
                             : bessel_i0(kResampleKaiserBeta * std::sqrt(1.0 - r * r)) / i0_beta_;
      const double arg = 2.0 * cutoff_ * x;
      const double sinc = arg == 0.0 ? 1.0 : std::sin(M_PI * arg) / (M_PI * arg);
      out[i] = 2.0 * cutoff_ * sinc * window;
      total += out[i];
    }
    for (double& v : out) v /= total;
  }

 private:
  double cutoff_;
  double i0_beta_;
};

constexpr std::uint64_t kMaxPhaseBank = 4096;

}  // namespace

AudioClip resample(const AudioClip& clip, int target_rate) {
  if (target_rate <= 0 || clip.sample_rate <= 0)
    throw ConfigError("resample: sample rates must be positive");
  if (target_rate == clip.sample_rate) return clip;

  const std::uint64_t g = std::gcd(static_cast<std::uint64_t>(target_rate),
                                   static_cast<std::uint64_t>(clip.sample_rate));
  const std::uint64_t up = static_cast<std::uint64_t>(target_rate) / g;
  const std::uint64_t down = static_cast<std::uint64_t>(clip.sample_rate) / g;
  const std::uint64_t in_len = clip.samples.size();
  const std::uint64_t out_len = (in_len * up + down / 2) / down;

  // Cutoff in cycles per input sample, slightly inside the lower Nyquist.
  constexpr double kRolloff = 0.95;
  const double cutoff = 0.5 * kRolloff * std::min(1.0, static_cast<double>(up) / down);
  const SincKernel kernel(cutoff);

  std::vector<std::array<double, kResampleTaps>> bank;
  if (up <= kMaxPhaseBank) {
    bank.resize(up);
    for (std::uint64_t p = 0; p < up; ++p) kernel.taps(static_cast<double>(p) / up, bank[p]);
  }

  AudioClip out;
  out.sample_rate = target_rate;
  out.source_path = clip.source_path;
  out.samples.resize(out_len);
  const auto last = static_cast<std::int64_t>(in_len) - 1;
  std::array<double, kResampleTaps> scratch;
  for (std::uint64_t n = 0; n < out_len; ++n) {
    const std::uint64_t pos = n * down;
    const auto base = static_cast<std::int64_t>(pos / up);
    const std::uint64_t phase = pos % up;
    const std::array<double, kResampleTaps>* taps = &scratch;
    if (bank.empty())
      kernel.taps(static_cast<double>(phase) / up, scratch);
    else
      taps = &bank[phase];
    double acc = 0.0;
    for (int i = 0; i < kResampleTaps; ++i) {
      // Edges replicate the boundary sample.
      const std::int64_t idx = std::clamp<std::int64_t>(base + i - SincKernel::kHalf + 1, 0, last);
      acc += (*taps)[i] * clip.samples[static_cast<std::size_t>(idx)];
    }
    out.samples[n] = static_cast<float>(acc);
  }
  return out;
}

AudioClip normalize(const AudioClip& clip) {
  AudioClip out = clip;
  if (clip.samples.empty()) return out;
  double mean = 0.0;
  for (float v : clip.samples) mean += v;
  mean /= static_cast<double>(clip.samples.size());
  double var = 0.0;
  for (float v : clip.samples) var += (v - mean) * (v - mean);
  var /= static_cast<double>(clip.samples.size());
  if (var < kNormalizeEpsilon) {
    std::fill(out.samples.begin(), out.samples.end(), 0.0f);
    return out;
  }
  const double inv = 1.0 / std::sqrt(var + kNormalizeEpsilon);
  for (float& v : out.samples) v = static_cast<float>((v - mean) * inv);
  return out;
}

}  // namespace ser
