/*
Copyright 2026 The csfp Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS-IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#include <fstream>
#include <random>

#include "csfp/binary.hpp"
#include "csfp/features.hpp"
#include "csfp/image_io.hpp"
#include "csfp/tnsr.hpp"
#include "gtest/gtest.h"
#include "json.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace csfp {
namespace {

LayerSpec conv_layer(std::string name, Tensor w, Tensor b, std::size_t stride, std::size_t pad) {
  Conv2dParams p;
  p.out_ch = w.dim(0);
  p.in_ch = w.dim(1);
  p.kh = w.dim(2);
  p.kw = w.dim(3);
  p.stride = stride;
  p.padding = pad;
  p.weights = std::move(w);
  p.bias = std::move(b);
  return LayerSpec{LayerKind::kConv2d, std::move(name), std::move(p)};
}

LayerSpec plain_layer(LayerKind kind, std::string name) {
  return LayerSpec{kind, std::move(name), std::nullopt};
}

WeightBundle single_conv(std::size_t in_ch, Tensor w, Tensor b, std::size_t stride = 1,
                         std::size_t pad = 0) {
  WeightBundle bundle;
  bundle.input_channels = in_ch;
  bundle.layers.push_back(conv_layer("conv", std::move(w), std::move(b), stride, pad));
  return bundle;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

template <typename F>
void expect_code(Errc code, F&& fn) {
  try {
    fn();
    ADD_FAILURE() << "no exception, expected " << errc_name(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

TEST(Conv2d, IdentityKernel) {
  std::mt19937_64 rng(1);
  Tensor w({1, 1, 3, 3});
  w[4] = 1.0;
  const Tensor x = oracle::random_tensor({1, 7, 5}, rng);
  const FeatureStack out = forward_tensor(single_conv(1, w, Tensor({1}), 1, 1), x, "conv");
  EXPECT_EQ(out.tensor, x);
}

TEST(Conv2d, MatchesQuadrupleLoop) {
  std::mt19937_64 rng(2);
  struct Case {
    std::size_t ic, oc, h, w, k, stride, pad;
  };
  for (const Case& c : {Case{3, 4, 9, 11, 3, 1, 1}, Case{2, 3, 10, 7, 3, 2, 1},
                        Case{1, 2, 6, 6, 5, 1, 0}, Case{4, 1, 5, 8, 1, 3, 0},
                        Case{2, 2, 4, 4, 3, 2, 2}}) {
    const Tensor x = oracle::random_tensor({c.ic, c.h, c.w}, rng, -1, 1);
    const Tensor w = oracle::random_tensor({c.oc, c.ic, c.k, c.k}, rng, -1, 1);
    const Tensor b = oracle::random_tensor({c.oc}, rng, -1, 1);
    const Tensor ours = detail::conv2d(x, *conv_layer("c", w, b, c.stride, c.pad).conv);
    const Tensor ref = oracle::conv2d(x, w, b, c.stride, c.pad);
    ASSERT_EQ(ours.dims(), ref.dims());
    EXPECT_LT(max_abs_diff(ours, ref), 1e-12);
  }
}

TEST(Conv2d, LinearInTheInputWithoutBias) {
  std::mt19937_64 rng(3);
  const Tensor w = oracle::random_tensor({2, 3, 3, 3}, rng, -1, 1);
  const WeightBundle bundle = single_conv(3, w, Tensor({2}), 1, 1);
  const Tensor a = oracle::random_tensor({3, 8, 8}, rng, -1, 1);
  const Tensor b = oracle::random_tensor({3, 8, 8}, rng, -1, 1);
  Tensor mix({3, 8, 8});
  for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = 2.0 * a[i] - 0.5 * b[i];
  const Tensor fa = forward_tensor(bundle, a, "conv").tensor;
  const Tensor fb = forward_tensor(bundle, b, "conv").tensor;
  const Tensor fm = forward_tensor(bundle, mix, "conv").tensor;
  for (std::size_t i = 0; i < fm.size(); ++i) EXPECT_NEAR(fm[i], 2.0 * fa[i] - 0.5 * fb[i], 1e-12);
}

TEST(Relu, ClampsNegatives) {
  Tensor t({4}, std::vector<double>{-1.0, 0.0, 2.5, -0.0});
  detail::relu_inplace(t);
  EXPECT_EQ(t, Tensor({4}, std::vector<double>{0.0, 0.0, 2.5, 0.0}));
}

TEST(MaxPool, FloorsOddSizes) {
  Tensor t({1, 3, 5});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i);
  const Tensor p = detail::maxpool2(t);
  ASSERT_EQ(p.dims(), (std::vector<std::size_t>{1, 1, 2}));
  EXPECT_EQ(p[0], 6.0);
  EXPECT_EQ(p[1], 8.0);
  expect_code(Errc::kInvalidDims, [] { detail::maxpool2(Tensor({1, 1, 4})); });
}

TEST(Forward, StopsAtRequestedLayer) {
  std::mt19937_64 rng(4);
  WeightBundle bundle;
  bundle.layers.push_back(conv_layer("c1", oracle::random_tensor({4, 3, 3, 3}, rng, -1, 1),
                                     oracle::random_tensor({4}, rng, -1, 1), 1, 1));
  bundle.layers.push_back(plain_layer(LayerKind::kRelu, "r1"));
  bundle.layers.push_back(plain_layer(LayerKind::kMaxPool2, "p1"));
  const PlanarImage img(oracle::random_tensor({3, 10, 12}, rng), ColorSpace::kRgb);
  const FeatureStack c1 = forward(bundle, img, "c1");
  EXPECT_LT(c1.tensor.min(), 0.0);
  EXPECT_EQ(c1.layer_name, "c1");
  const FeatureStack r1 = forward(bundle, img, "r1");
  EXPECT_GE(r1.tensor.min(), 0.0);
  EXPECT_EQ(forward(bundle, img, "p1").tensor.dims(), (std::vector<std::size_t>{4, 5, 6}));
  expect_code(Errc::kUnknownLayer, [&] { forward(bundle, img, "fc9"); });
}

TEST(Forward, ChannelHandling) {
  std::mt19937_64 rng(5);
  Tensor w({1, 3, 1, 1}, 1.0);
  WeightBundle rgb = single_conv(3, w, Tensor({1}));
  const PlanarImage gray(oracle::random_tensor({1, 4, 4}, rng), ColorSpace::kLuma);
  // Luma is replicated across the three inputs.
  const FeatureStack f = forward(rgb, gray, "conv");
  for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(f.tensor[i], 3.0 * gray.tensor()[i], 1e-15);

  WeightBundle mono = single_conv(1, Tensor({1, 1, 1, 1}, 1.0), Tensor({1}));
  const PlanarImage color(oracle::random_tensor({3, 4, 4}, rng), ColorSpace::kRgb);
  expect_code(Errc::kChannelMismatch, [&] { forward(mono, color, "conv"); });
}

TEST(Forward, InputNormalization) {
  WeightBundle bundle = single_conv(3, Tensor({3, 3, 1, 1}, std::vector<double>{1, 0, 0, 0, 1, 0, 0, 0, 1}),
                                    Tensor({3}));
  bundle.mean = {0.5, 0.25, 0.0};
  bundle.scale = {2.0, 4.0, -1.0};
  const PlanarImage img(Tensor({3, 1, 1}, std::vector<double>{1.0, 0.5, 0.25}), ColorSpace::kRgb);
  const Tensor x = forward(bundle, img, "conv").tensor;
  EXPECT_DOUBLE_EQ(x[0], 1.0);
  EXPECT_DOUBLE_EQ(x[1], 1.0);
  EXPECT_DOUBLE_EQ(x[2], -0.25);
}

TEST(WeightBundle, ChainErrorNamesTheLayer) {
  WeightBundle bundle;
  bundle.layers.push_back(conv_layer("a", Tensor({4, 3, 3, 3}), Tensor({4}), 1, 1));
  bundle.layers.push_back(conv_layer("b", Tensor({2, 5, 3, 3}), Tensor({2}), 1, 1));
  try {
    bundle.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kChainError);
    EXPECT_NE(std::string(e.what()).find("b"), std::string::npos);
  }
}

TEST(Cnnw, RoundTripAndLayout) {
  std::mt19937_64 rng(6);
  WeightBundle bundle;
  bundle.mean = {0.25, 0.5, 0.75};
  bundle.scale = {2.0, 4.0, 8.0};
  Tensor w = oracle::random_tensor({2, 3, 3, 3}, rng, -1, 1);
  for (double& v : w.data()) v = static_cast<float>(v);
  bundle.layers.push_back(conv_layer("conv1", w, Tensor({2}, 0.125), 2, 1));
  bundle.layers.push_back(plain_layer(LayerKind::kRelu, "relu1"));
  bundle.layers.push_back(plain_layer(LayerKind::kMaxPool2, "pool1"));
  const Bytes b = encode_weights(bundle);
  EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "CNNW");
  EXPECT_EQ(b[4], 1);
  EXPECT_EQ(b[5], 3);
  EXPECT_EQ(b[6], 3);
  EXPECT_EQ(b[7], 0);
  // header 8 + norm 24 + conv (2 + 5 + 8 + 54*4 + 2*4) + relu (2 + 5) + pool (2 + 5)
  EXPECT_EQ(b.size(), 8u + 24 + (2 + 5 + 8 + 54 * 4 + 8) + 7 + 7);
  const WeightBundle back = decode_weights(b);
  EXPECT_EQ(encode_weights(back), b);
  EXPECT_EQ(back.layers[0].conv->weights, w);
  EXPECT_EQ(back.layers[0].conv->stride, 2u);
  EXPECT_EQ(list_layers(back), list_layers(bundle));
}

TEST(Cnnw, TruncationAndCorruption) {
  const Bytes b = read_file(testing_paths::fixture("golden2.cnnw"));
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t cut = rng() % b.size();
    expect_code(Errc::kFormat, [&] { decode_weights(std::span(b.data(), cut)); });
  }
  Bytes extra = b;
  extra.push_back(0);
  expect_code(Errc::kFormat, [&] { decode_weights(extra); });
  Bytes magic = b;
  magic[1] = 'X';
  expect_code(Errc::kFormat, [&] { decode_weights(magic); });
  Bytes version = b;
  version[4] = 2;
  expect_code(Errc::kFormat, [&] { decode_weights(version); });
  expect_code(Errc::kIo, [] { load_weights("/nonexistent/w.cnnw"); });
}

TEST(Cnnw, ChainErrorOnLoad) {
  WeightBundle bundle;
  bundle.layers.push_back(conv_layer("a", Tensor({4, 3, 1, 1}), Tensor({4}), 1, 0));
  bundle.layers.push_back(conv_layer("b", Tensor({2, 4, 1, 1}), Tensor({2}), 1, 0));
  Bytes b = encode_weights(bundle);
  // Patch b's in_ch field (u16 after its out_ch) from 4 to 6.
  const std::size_t b_conv = 8 + 24 + (2 + 1 + 8 + 12 * 4 + 16) + 2 + 1;
  ASSERT_EQ(b[b_conv + 2], 4);
  b[b_conv + 2] = 6;
  // Weight count changes with in_ch, so pad the buffer to keep the length right.
  b.insert(b.end() - 8, 2 * 2 * 4, 0);
  expect_code(Errc::kChainError, [&] { decode_weights(b); });
}

struct Golden {
  std::string network;
  nlohmann::json manifest;
};

Golden read_manifest(const std::string& network) {
  std::ifstream in(testing_paths::fixture(network + ".manifest.json"));
  return {network, nlohmann::json::parse(in)};
}

TEST(GoldenFixtures, LayerListingMatchesExport) {
  for (const char* net : {"golden2", "vgg_tiny"}) {
    const Golden g = read_manifest(net);
    const WeightBundle bundle = load_weights(testing_paths::fixture(g.network + ".cnnw"));
    const auto layers = list_layers(bundle);
    ASSERT_EQ(layers.size(), g.manifest["layer_count"].get<std::size_t>()) << net;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& want = g.manifest["layers"][i];
      EXPECT_EQ(layers[i].name, want["name"].get<std::string>());
      EXPECT_EQ(layer_kind_name(layers[i].kind), want["kind"].get<std::string>());
    }
  }
  EXPECT_EQ(read_manifest("vgg_tiny").manifest["layer_count"], 9);
}

TEST(GoldenFixtures, ActivationsMatchIndependentReference) {
  for (const char* net : {"golden2", "vgg_tiny"}) {
    const Golden g = read_manifest(net);
    const WeightBundle bundle = load_weights(testing_paths::fixture(g.network + ".cnnw"));
    for (const auto& ref : g.manifest["references"]) {
      const PlanarImage img = load_image(testing_paths::fixture(ref["input"].get<std::string>()));
      const FeatureStack ours = forward(bundle, img, ref["tap"].get<std::string>());
      const Tensor want = read_tnsr(testing_paths::fixture(ref["reference"].get<std::string>()));
      ASSERT_EQ(ours.tensor.dims(), want.dims()) << ref["reference"];
      double worst = 0.0;
      for (std::size_t i = 0; i < want.size(); ++i) {
        worst = std::max(worst, std::abs(ours.tensor[i] - want[i]) / std::max(1.0, std::abs(want[i])));
      }
      EXPECT_LE(worst, 1e-4) << ref["reference"];
    }
  }
}

}  // namespace
}  // namespace csfp
