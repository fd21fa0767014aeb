// tests/test_encoder.cc

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

#include <fstream>
#include <thread>

#include "criteria.h"
#include "oracles.h"
#include "ser/encoder.h"
#include "ser/error.h"
#include "ser/random.h"

namespace ser {
namespace {

namespace fs = std::filesystem;

EncoderModel wav2vec2() { return EncoderModel::load(criteria::fixture_dir() / "wav2vec2_tiny.serta"); }
EncoderModel hubert() { return EncoderModel::load(criteria::fixture_dir() / "hubert_tiny.serta"); }

AudioClip noise(std::size_t n, std::uint64_t seed, int rate = 16000) {
  Rng rng(seed);
  AudioClip c;
  c.sample_rate = rate;
  c.samples.resize(n);
  for (auto& v : c.samples) v = static_cast<float>(rng.uniform(-0.5, 0.5));
  return c;
}

TEST(EncoderManifest, FixtureFieldsAndRoundTrip) {
  const auto model = wav2vec2();
  const auto& m = model.manifest();
  EXPECT_EQ(m.hidden_dim, 32u);
  EXPECT_EQ(m.num_layers, 2u);
  EXPECT_EQ(m.num_heads, 4u);
  EXPECT_EQ(m.latent_dim(), 16u);
  EXPECT_EQ(m.receptive_field(), 400u);
  EXPECT_EQ(m.conv_norm_mode, ConvNormMode::kGroupNormFirstLayer);
  EXPECT_FALSE(m.pre_norm);
  const auto back = EncoderManifest::from_json(m.to_json());
  EXPECT_EQ(back.to_json(), m.to_json());
  EXPECT_TRUE(hubert().manifest().pre_norm);
  EXPECT_EQ(model.checkpoint_hash().size(), 64u);
}

TEST(EncoderManifest, RejectsIncompleteManifest) {
  auto j = wav2vec2().manifest().to_json();
  j.erase("hidden_dim");
  EXPECT_THROW(EncoderManifest::from_json(j), ArchiveError);
  auto k = wav2vec2().manifest().to_json();
  k["model_family"] = "conformer";
  EXPECT_THROW(EncoderManifest::from_json(k), ArchiveError);
}

TEST(EncoderManifest, CanonicalStackFrameCounts) {
  const auto model = wav2vec2();
  const auto& m = model.manifest();
  EXPECT_EQ(m.frames_for(16000), 49u);
  EXPECT_EQ(m.frames_for(48000), 149u);
  EXPECT_EQ(m.frames_for(400), 1u);
  EXPECT_EQ(m.frames_for(399), 0u);
}

TEST(Encoder, ParityWithReferenceForwardPass) {
  const auto outcome = criteria::fixture_parity();
  EXPECT_TRUE(outcome.passed()) << outcome.detail;
}

TEST(Encoder, MinimumLengthGivesOneFrame) {
  const auto model = wav2vec2();
  EXPECT_EQ(model.conv_feature_encoder(noise(400, 1)).frames(), 1u);
  EXPECT_EQ(model.extract(noise(400, 1)).frames(), 1u);
}

TEST(Encoder, TooShortClipReportsMinimum) {
  const auto model = wav2vec2();
  for (std::size_t n : {100u, 399u}) {
    try {
      model.conv_feature_encoder(noise(n, 2));
      FAIL();
    } catch (const InputTooShortError& e) {
      EXPECT_EQ(e.min_samples(), 400u);
    }
  }
  EXPECT_THROW(model.extract(noise(100, 2)), InputTooShortError);
}

TEST(Encoder, ThreeSecondClip) {
  const auto out = wav2vec2().extract(noise(48000, 3));
  EXPECT_EQ(out.frames(), 149u);
  EXPECT_EQ(out.dim(), 32u);
}

TEST(Encoder, ExtractIsDeterministic) {
  const auto model = hubert();
  const auto clip = noise(20000, 4);
  const auto a = model.extract(clip), b = model.extract(clip);
  EXPECT_TRUE(std::equal(a.values.data().begin(), a.values.data().end(), b.values.data().begin()));
}

TEST(Encoder, ResamplesForeignRatesBeforeEncoding) {
  const auto model = wav2vec2();
  const auto clip = noise(4000, 5, 8000);
  EXPECT_THROW(model.conv_feature_encoder(clip), ConfigError);
  const auto out = model.extract(clip);
  EXPECT_EQ(out.frames(), model.manifest().frames_for(8000));
}

TEST(Encoder, ConvStageIsTimeLocalWithPerFrameNorm) {
  const auto model = hubert();
  ASSERT_EQ(model.manifest().conv_norm_mode, ConvNormMode::kLayerNormAll);
  const auto clip = noise(16000, 6);
  auto padded = clip;
  padded.samples.resize(clip.samples.size() + 8000, 0.0f);
  const auto a = model.conv_feature_encoder(clip).values;
  const auto b = model.conv_feature_encoder(padded).values;
  ASSERT_GT(b.rows(), a.rows());
  double worst = 0.0;
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) worst = std::max(worst, double(std::abs(a.at(r, c) - b.at(r, c))));
  EXPECT_LE(worst, 1e-5);
}

TEST(Encoder, AttentionRowsSumToOne) {
  for (const auto& model : {wav2vec2(), hubert()}) {
    const auto latent = model.conv_feature_encoder(noise(16000, 7));
    std::size_t calls = 0;
    double worst = 0.0;
    const auto out = model.transformer_context(latent, [&](std::size_t, std::size_t, const Tensor& probs) {
      ++calls;
      EXPECT_EQ(probs.rows(), latent.frames());
      EXPECT_EQ(probs.cols(), latent.frames());
      for (std::size_t r = 0; r < probs.rows(); ++r) {
        double s = 0.0;
        for (float v : probs.row(r)) s += v;
        worst = std::max(worst, std::abs(s - 1.0));
      }
    });
    EXPECT_EQ(calls, model.manifest().num_layers * model.manifest().num_heads);
    EXPECT_LE(worst, 1e-5);
    EXPECT_EQ(out.frames(), latent.frames());
  }
}

TEST(Encoder, ZeroWeightModelCollapsesToIdenticalRows) {
  const auto source = read_archive(criteria::fixture_dir() / "wav2vec2_tiny.serta");
  TensorArchive zero;
  zero.manifest = source.manifest;
  for (const auto& [name, t] : source.tensors) {
    const bool gamma = name.find("norm.weight") != std::string::npos;
    zero.tensors.emplace(name, Tensor::filled(t.shape(), gamma ? 1.0f : 0.0f));
  }
  const auto model = EncoderModel::from_archive(std::move(zero));
  for (std::uint64_t seed : {8u, 9u}) {
    const auto out = model.extract(noise(12000, seed)).values;
    for (std::size_t r = 1; r < out.rows(); ++r)
      for (std::size_t c = 0; c < out.cols(); ++c) EXPECT_EQ(out.at(r, c), out.at(0, c));
  }
}

TEST(Encoder, MissingAttentionTensorIsNamed) {
  auto archive = read_archive(criteria::fixture_dir() / "wav2vec2_tiny.serta");
  const std::string victim = "encoder.layers.1.attention.k_proj.weight";
  ASSERT_EQ(archive.tensors.erase(victim), 1u);
  try {
    EncoderModel::from_archive(std::move(archive));
    FAIL();
  } catch (const ArchiveError& e) {
    EXPECT_EQ(e.tensor_name(), victim);
    EXPECT_NE(std::string(e.what()).find(victim), std::string::npos);
  }
}

TEST(Encoder, NonFiniteWeightsRejected) {
  auto archive = read_archive(criteria::fixture_dir() / "hubert_tiny.serta");
  archive.tensors.at("encoder.layer_norm.bias")[3] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(EncoderModel::from_archive(std::move(archive)), ArchiveError);
}

TEST(Encoder, TruncatedCheckpointFailsCleanly) {
  const auto src = criteria::fixture_dir() / "wav2vec2_tiny.serta";
  const auto size = fs::file_size(src);
  std::ifstream in(src, std::ios::binary);
  std::vector<char> bytes(size);
  in.read(bytes.data(), static_cast<std::streamsize>(size));
  const auto path = fs::temp_directory_path() / "ser_truncated.serta";
  for (std::size_t keep : {std::size_t{4}, std::size_t{20}, size / 3, size - 1}) {
    std::ofstream(path, std::ios::binary | std::ios::trunc).write(bytes.data(), static_cast<std::streamsize>(keep));
    try {
      EncoderModel::load(path);
      FAIL() << keep;
    } catch (const ArchiveError& e) {
      EXPECT_NE(std::string(e.what()).find(path.string()), std::string::npos);
    } catch (const VersionError&) {
    }
  }
  fs::remove(path);
}

TEST(Encoder, LongClipsAreChunked) {
  const auto model = wav2vec2();
  const std::size_t n = 65 * 16000;
  const auto out = model.extract(noise(n, 10));
  EXPECT_EQ(out.frames(), 2 * model.manifest().frames_for(480000) + model.manifest().frames_for(80000));
  EXPECT_EQ(out.frames(), model.frames_for_samples(n));
}

TEST(Encoder, FrameCountLawOverRandomLengths) {
  const auto outcome = criteria::frame_count_law(120, 12);
  EXPECT_TRUE(outcome.passed()) << outcome.detail;
}

TEST(Encoder, ConcurrentExtractionMatchesSerial) {
  const auto model = hubert();
  std::vector<AudioClip> clips;
  for (std::uint64_t s = 0; s < 4; ++s) clips.push_back(noise(8000 + 1000 * s, 20 + s));
  std::vector<FeatureMatrix> serial, parallel(clips.size());
  for (const auto& c : clips) serial.push_back(model.extract(c));
  {
    std::vector<std::jthread> threads;
    for (std::size_t i = 0; i < clips.size(); ++i)
      threads.emplace_back([&, i] { parallel[i] = model.extract(clips[i]); });
  }
  for (std::size_t i = 0; i < clips.size(); ++i)
    EXPECT_TRUE(std::equal(serial[i].values.data().begin(), serial[i].values.data().end(),
                           parallel[i].values.data().begin()));
}

}  // namespace
}  // namespace ser
