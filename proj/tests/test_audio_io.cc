// tests/test_audio_io.cc

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

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <numeric>

#include "ser/audio_io.h"
#include "ser/error.h"
#include "ser/random.h"

namespace ser {
namespace {

// Hand-assembled RIFF bytes, independent of encode_wav.
std::vector<std::uint8_t> riff(std::uint16_t format, std::uint16_t channels, std::uint32_t rate,
                               std::uint16_t bits, const std::vector<std::uint8_t>& payload) {
  std::vector<std::uint8_t> b;
  auto put = [&](std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  auto tag = [&](const char* t) { b.insert(b.end(), t, t + 4); };
  tag("RIFF");
  put(36 + payload.size(), 4);
  tag("WAVE");
  tag("fmt ");
  put(16, 4);
  put(format, 2);
  put(channels, 2);
  put(rate, 4);
  put(rate * channels * bits / 8, 4);
  put(channels * bits / 8, 2);
  put(bits, 2);
  tag("data");
  put(payload.size(), 4);
  b.insert(b.end(), payload.begin(), payload.end());
  return b;
}

std::vector<std::uint8_t> pcm16(std::initializer_list<std::int16_t> values) {
  std::vector<std::uint8_t> out;
  for (auto v : values) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>((static_cast<std::uint16_t>(v) >> 8) & 0xff));
  }
  return out;
}

std::vector<std::uint8_t> f32(std::initializer_list<float> values) {
  std::vector<std::uint8_t> out(values.size() * 4);
  std::memcpy(out.data(), std::data(values), out.size());
  return out;
}

AudioClip tone(double freq, int rate, std::size_t n, double amp = 0.5) {
  AudioClip c;
  c.sample_rate = rate;
  c.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) c.samples[i] = static_cast<float>(amp * std::sin(2 * M_PI * freq * i / rate));
  return c;
}

TEST(DecodeWav, Pcm16FullScaleMapping) {
  const auto clip = decode_wav(riff(1, 1, 16000, 16, pcm16({32767, -32768, 0})));
  ASSERT_EQ(clip.samples.size(), 3u);
  EXPECT_FLOAT_EQ(clip.samples[0], 32767.0f / 32768.0f);
  EXPECT_NEAR(clip.samples[0], 0.999969, 1e-6);
  EXPECT_EQ(clip.samples[1], -1.0f);
  EXPECT_EQ(clip.samples[2], 0.0f);
  EXPECT_EQ(clip.sample_rate, 16000);
}

TEST(DecodeWav, StereoAveragesChannels) {
  const auto clip = decode_wav(riff(3, 2, 8000, 32, f32({0.5f, -0.5f, 0.25f, 0.75f})));
  ASSERT_EQ(clip.samples.size(), 2u);
  EXPECT_EQ(clip.samples[0], 0.0f);
  EXPECT_EQ(clip.samples[1], 0.5f);
}

TEST(DecodeWav, EmptyDataChunk) {
  EXPECT_THROW(decode_wav(riff(1, 1, 16000, 16, {})), EmptyAudioError);
}

TEST(DecodeWav, RejectsUnsupportedEncodings) {
  EXPECT_THROW(decode_wav(riff(1, 1, 16000, 8, {1, 2, 3})), UnsupportedError);
  EXPECT_THROW(decode_wav(riff(1, 1, 16000, 24, {1, 2, 3})), UnsupportedError);
  EXPECT_THROW(decode_wav(riff(6, 1, 16000, 8, {1, 2})), UnsupportedError);
  EXPECT_THROW(decode_wav(riff(1, 3, 16000, 16, pcm16({1, 2, 3}))), UnsupportedError);
}

TEST(DecodeWav, RejectsMalformedInput) {
  const std::vector<std::uint8_t> junk = {'R', 'I', 'F', 'X', 0, 0, 0, 0};
  EXPECT_THROW(decode_wav(junk), FormatError);
  EXPECT_THROW(decode_wav(std::vector<std::uint8_t>{}), FormatError);
  auto bytes = riff(1, 1, 16000, 16, pcm16({1, 2, 3}));
  bytes.resize(30);
  EXPECT_THROW(decode_wav(bytes), FormatError);
  EXPECT_THROW(decode_wav(riff(3, 1, 16000, 32, f32({NAN}))), FormatError);
}

TEST(DecodeWav, ErrorsAreTyped) {
  try {
    decode_wav(riff(1, 1, 16000, 16, {}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("no samples"), std::string::npos);
  }
}

TEST(WavRoundTrip, Pcm16WithinOneQuantum) {
  Rng rng(3);
  std::vector<float> samples(5000);
  for (auto& v : samples) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  const auto clip = decode_wav(encode_wav(samples, 1, 22050));
  ASSERT_EQ(clip.samples.size(), samples.size());
  EXPECT_EQ(clip.sample_rate, 22050);
  for (std::size_t i = 0; i < samples.size(); ++i) EXPECT_LE(std::abs(clip.samples[i] - samples[i]), 1.0 / 32768);
}

TEST(WavRoundTrip, Float32IsExact) {
  const std::vector<float> samples = {0.1f, -0.7f, 0.3f, 0.9f};
  const auto clip = decode_wav(encode_wav(samples, 2, 16000, WavEncoding::kFloat32));
  ASSERT_EQ(clip.samples.size(), 2u);
  EXPECT_FLOAT_EQ(clip.samples[0], (0.1f - 0.7f) / 2);
  EXPECT_FLOAT_EQ(clip.samples[1], (0.3f + 0.9f) / 2);
}

TEST(WavRoundTrip, FileRoundTripAndMissingFile) {
  const auto path = std::filesystem::temp_directory_path() / "ser_audio_roundtrip.wav";
  const auto clip = tone(440, 16000, 1600);
  write_wav(path, clip);
  const auto back = read_wav(path);
  EXPECT_EQ(back.samples.size(), clip.samples.size());
  EXPECT_EQ(back.source_path, path.string());
  std::filesystem::remove(path);
  EXPECT_THROW(read_wav(path), FormatError);
}

TEST(DecodedClip, AmplitudesBounded) {
  const auto clip = decode_wav(riff(3, 1, 16000, 32, f32({1.5f, -2.0f, 0.5f})));
  for (float v : clip.samples) EXPECT_LE(std::abs(v), 1.0f);
}

TEST(Resample, SameRateIsIdentity) {
  const auto clip = tone(300, 16000, 777);
  EXPECT_EQ(resample(clip, 16000).samples, clip.samples);
}

TEST(Resample, EightToSixteenKilohertzTone) {
  const auto in = tone(440, 8000, 8000);
  const auto out = resample(in, 16000);
  EXPECT_NEAR(static_cast<double>(out.samples.size()), 16000.0, 1.0);
  EXPECT_NEAR(out.duration_seconds(), 1.0, 1.0 / 16000);
  // Away from the edges the output must be the same band-limited sinusoid
  // sampled at the new rate.
  double worst = 0.0;
  for (std::size_t n = 200; n + 200 < out.samples.size(); ++n)
    worst = std::max(worst, std::abs(out.samples[n] - 0.5 * std::sin(2 * M_PI * 440 * n / 16000.0)));
  EXPECT_LT(worst, 2e-3);
  // Spectral check: all the energy stays at 440 Hz.
  double re = 0.0, im = 0.0, energy = 0.0;
  for (std::size_t n = 0; n < out.samples.size(); ++n) {
    re += out.samples[n] * std::cos(2 * M_PI * 440 * n / 16000.0);
    im += out.samples[n] * std::sin(2 * M_PI * 440 * n / 16000.0);
    energy += out.samples[n] * out.samples[n];
  }
  const double at_tone = 2.0 * (re * re + im * im) / out.samples.size();
  EXPECT_GT(at_tone / energy, 0.999);
}

TEST(Resample, DownsamplingAttenuatesAboveNewNyquist) {
  const auto passed = resample(tone(1000, 44100, 44100), 16000);
  const auto blocked = resample(tone(12000, 44100, 44100), 16000);
  auto rms = [](const AudioClip& c) {
    double s = 0.0;
    for (std::size_t n = 500; n + 500 < c.samples.size(); ++n) s += c.samples[n] * c.samples[n];
    return std::sqrt(s / (c.samples.size() - 1000));
  };
  EXPECT_NEAR(rms(passed), 0.5 / std::sqrt(2.0), 5e-3);
  EXPECT_LT(rms(blocked), 1e-2);
}

TEST(Resample, PreservesDc) {
  AudioClip dc;
  dc.sample_rate = 22050;
  dc.samples.assign(5000, 0.3f);
  for (int rate : {8000, 16000, 44100, 48000}) {
    const auto out = resample(dc, rate);
    for (float v : out.samples) EXPECT_NEAR(v, 0.3f, 1e-3);
  }
}

TEST(Resample, LengthAndDurationLaw) {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const int rates[] = {8000, 11025, 16000, 22050, 44100, 48000};
    AudioClip c;
    c.sample_rate = rates[rng.below(6)];
    const int target = rates[rng.below(6)];
    c.samples.assign(100 + rng.below(3000), 0.1f);
    const auto out = resample(c, target);
    const double want = static_cast<double>(c.samples.size()) * target / c.sample_rate;
    EXPECT_LE(std::abs(static_cast<double>(out.samples.size()) - std::round(want)), 1.0);
    EXPECT_LE(std::abs(out.duration_seconds() - c.duration_seconds()), 1.0 / target);
  }
}

TEST(Resample, OddRatiosStayFinite) {
  AudioClip c = tone(200, 44101, 9000);
  const auto out = resample(c, 16000);
  for (float v : out.samples) EXPECT_TRUE(std::isfinite(v));
  EXPECT_THROW(resample(c, 0), Error);
}

TEST(Normalize, ConstantInputBecomesZeros) {
  AudioClip c;
  c.sample_rate = 16000;
  c.samples = {1, 1, 1, 1};
  EXPECT_EQ(normalize(c).samples, (std::vector<float>{0, 0, 0, 0}));
}

TEST(Normalize, AlreadyStandardInputUnchanged) {
  AudioClip c;
  c.sample_rate = 16000;
  c.samples = {-1, 1, -1, 1};
  const auto out = normalize(c);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(out.samples[i], c.samples[i], 1e-6);
}

TEST(Normalize, ZeroMeanUnitVarianceAndIdempotent) {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    AudioClip c;
    c.sample_rate = 16000;
    c.samples.resize(50 + rng.below(4000));
    const double offset = rng.uniform(-0.5, 0.5), scale = rng.uniform(0.06, 1.0);
    for (auto& v : c.samples) v = static_cast<float>(offset + scale * rng.uniform(-1, 1));
    const auto out = normalize(c);
    double mean = 0.0, var = 0.0;
    for (float v : out.samples) mean += v;
    mean /= out.samples.size();
    for (float v : out.samples) var += (v - mean) * (v - mean);
    var /= out.samples.size();
    EXPECT_LT(std::abs(mean), 1e-6);
    EXPECT_NEAR(var, 1.0, 1e-4);
    const auto twice = normalize(out);
    for (std::size_t i = 0; i < out.samples.size(); ++i) EXPECT_NEAR(twice.samples[i], out.samples[i], 1e-4);
  }
}

TEST(Normalize, QuietInputVarianceShrinksByEpsilon) {
  AudioClip c;
  c.sample_rate = 16000;
  for (int i = 0; i < 1000; ++i) c.samples.push_back(i % 2 ? 1e-3f : -1e-3f);
  const auto out = normalize(c);
  double var = 0.0;
  for (float v : out.samples) var += double(v) * v;
  var /= out.samples.size();
  EXPECT_NEAR(var, 1e-6 / (1e-6 + kNormalizeEpsilon), 1e-6);
}

}  // namespace
}  // namespace ser
