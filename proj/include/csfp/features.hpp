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

// Plain convolutional feature extractor (conv / relu / 2x2 max-pool chains)
// and the CNNW weight file format:
//
//   "CNNW" | u8 version=1 | u8 input_channels | u16 layer_count
//   | 3 x f32 channel mean | 3 x f32 channel scale     (unused slots zero)
//   then per layer:
//   u8 kind (0=CONV2D, 1=RELU, 2=MAXPOOL2) | u8 name_len | name bytes
//   CONV2D only: u16 out_ch | u16 in_ch | u8 kh | u8 kw | u8 stride
//                | u8 padding | f32 weights (out,in,kh,kw) | f32 bias (out)
//
// Input pixels are normalized per channel as (x - mean) * scale before the
// first layer.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "csfp/binary.hpp"
#include "csfp/error.hpp"
#include "csfp/tensor.hpp"

namespace csfp {

enum class LayerKind : std::uint8_t { kConv2d = 0, kRelu = 1, kMaxPool2 = 2 };

constexpr std::string_view layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::kConv2d: return "CONV2D";
    case LayerKind::kRelu: return "RELU";
    case LayerKind::kMaxPool2: return "MAXPOOL2";
  }
  return "UNKNOWN";
}

struct Conv2dParams {
  std::size_t out_ch = 0;
  std::size_t in_ch = 0;
  std::size_t kh = 0;
  std::size_t kw = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;
  Tensor weights;  // (out_ch, in_ch, kh, kw)
  Tensor bias;     // (out_ch)
};

struct LayerSpec {
  LayerKind kind = LayerKind::kRelu;
  std::string name;
  std::optional<Conv2dParams> conv;  // set iff kind == kConv2d
};

struct WeightBundle {
  std::size_t input_channels = 3;
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  std::array<double, 3> scale{1.0, 1.0, 1.0};
  std::vector<LayerSpec> layers;

  // Checks channel chaining, weight shapes and name uniqueness.
  void validate() const {
    if (input_channels != 1 && input_channels != 3) {
      throw Error(Errc::kFormat, "input_channels must be 1 or 3");
    }
    for (std::size_t c = 0; c < input_channels; ++c) {
      if (!std::isfinite(mean[c]) || !std::isfinite(scale[c]) || scale[c] == 0.0) {
        throw Error(Errc::kFormat, "invalid input normalization");
      }
    }
    std::set<std::string> names;
    std::size_t channels = input_channels;
    for (const LayerSpec& layer : layers) {
      if (layer.name.empty() || layer.name.size() > 255) {
        throw Error(Errc::kFormat, "layer name must have 1..255 bytes");
      }
      if (!names.insert(layer.name).second) {
        throw Error(Errc::kFormat, "duplicate layer name " + layer.name);
      }
      if (layer.kind == LayerKind::kConv2d) {
        if (!layer.conv) throw Error(Errc::kFormat, layer.name + ": missing conv params");
        const Conv2dParams& p = *layer.conv;
        if (p.out_ch == 0 || p.kh == 0 || p.kw == 0 || p.stride == 0) {
          throw Error(Errc::kFormat, layer.name + ": zero conv dimension");
        }
        if (p.weights.dims() != std::vector<std::size_t>{p.out_ch, p.in_ch, p.kh, p.kw} ||
            p.bias.dims() != std::vector<std::size_t>{p.out_ch}) {
          throw Error(Errc::kFormat, layer.name + ": weight dims inconsistent");
        }
        if (p.in_ch != channels) {
          throw Error(Errc::kChainError,
                      layer.name + ": expects " + std::to_string(p.in_ch) +
                          " input channels, chain provides " + std::to_string(channels));
        }
        channels = p.out_ch;
      } else if (layer.conv) {
        throw Error(Errc::kFormat, layer.name + ": conv params on non-conv layer");
      }
    }
  }
};

struct FeatureStack {
  Tensor tensor;  // (M, H, W)
  std::string layer_name;

  std::size_t maps() const { return tensor.dim(0); }
  std::size_t height() const { return tensor.dim(1); }
  std::size_t width() const { return tensor.dim(2); }
};

inline constexpr std::uint8_t kCnnwVersion = 1;

inline Bytes encode_weights(const WeightBundle& bundle) {
  bundle.validate();
  if (bundle.layers.size() > 0xffff) throw Error(Errc::kFormat, "too many layers");
  ByteWriter w;
  w.raw("CNNW");
  w.u8(kCnnwVersion);
  w.u8(static_cast<std::uint8_t>(bundle.input_channels));
  w.u16(static_cast<std::uint16_t>(bundle.layers.size()));
  for (std::size_t c = 0; c < 3; ++c) {
    w.f32(c < bundle.input_channels ? static_cast<float>(bundle.mean[c]) : 0.0f);
  }
  for (std::size_t c = 0; c < 3; ++c) {
    w.f32(c < bundle.input_channels ? static_cast<float>(bundle.scale[c]) : 0.0f);
  }
  for (const LayerSpec& layer : bundle.layers) {
    w.u8(static_cast<std::uint8_t>(layer.kind));
    w.u8(static_cast<std::uint8_t>(layer.name.size()));
    w.raw(layer.name);
    if (layer.kind != LayerKind::kConv2d) continue;
    const Conv2dParams& p = *layer.conv;
    if (p.out_ch > 0xffff || p.in_ch > 0xffff || p.kh > 0xff || p.kw > 0xff ||
        p.stride > 0xff || p.padding > 0xff) {
      throw Error(Errc::kFormat, layer.name + ": conv shape exceeds CNNW field width");
    }
    w.u16(static_cast<std::uint16_t>(p.out_ch));
    w.u16(static_cast<std::uint16_t>(p.in_ch));
    w.u8(static_cast<std::uint8_t>(p.kh));
    w.u8(static_cast<std::uint8_t>(p.kw));
    w.u8(static_cast<std::uint8_t>(p.stride));
    w.u8(static_cast<std::uint8_t>(p.padding));
    for (double v : p.weights.data()) w.f32(static_cast<float>(v));
    for (double v : p.bias.data()) w.f32(static_cast<float>(v));
  }
  return w.take();
}

inline WeightBundle decode_weights(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.str(4) != "CNNW") throw Error(Errc::kFormat, "bad CNNW magic");
  if (r.u8() != kCnnwVersion) throw Error(Errc::kFormat, "unsupported CNNW version");
  WeightBundle bundle;
  bundle.input_channels = r.u8();
  const std::size_t count = r.u16();
  for (auto& m : bundle.mean) m = r.f32();
  for (auto& s : bundle.scale) s = r.f32();
  bundle.layers.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    LayerSpec layer;
    const std::uint8_t kind = r.u8();
    if (kind > 2) throw Error(Errc::kFormat, "unknown layer kind " + std::to_string(kind));
    layer.kind = static_cast<LayerKind>(kind);
    layer.name = r.str(r.u8());
    if (layer.kind == LayerKind::kConv2d) {
      Conv2dParams p;
      p.out_ch = r.u16();
      p.in_ch = r.u16();
      p.kh = r.u8();
      p.kw = r.u8();
      p.stride = r.u8();
      p.padding = r.u8();
      if (p.out_ch == 0 || p.in_ch == 0 || p.kh == 0 || p.kw == 0 || p.stride == 0) {
        throw Error(Errc::kFormat, layer.name + ": zero conv dimension");
      }
      const std::size_t nw = p.out_ch * p.in_ch * p.kh * p.kw;
      if (r.remaining() < (nw + p.out_ch) * 4) {
        throw Error(Errc::kFormat, layer.name + ": truncated weights");
      }
      std::vector<double> w(nw), b(p.out_ch);
      for (auto& v : w) v = r.f32();
      for (auto& v : b) v = r.f32();
      try {
        p.weights = Tensor({p.out_ch, p.in_ch, p.kh, p.kw}, std::move(w));
        p.bias = Tensor({p.out_ch}, std::move(b));
      } catch (const Error& e) {
        throw Error(Errc::kFormat, layer.name + ": " + e.what());
      }
      layer.conv = std::move(p);
    }
    bundle.layers.push_back(std::move(layer));
  }
  if (r.remaining() != 0) throw Error(Errc::kFormat, "trailing bytes after last layer");
  bundle.validate();
  return bundle;
}

inline WeightBundle load_weights(const std::filesystem::path& path) {
  return decode_weights(read_file(path));
}

inline void save_weights(const std::filesystem::path& path, const WeightBundle& bundle) {
  write_file(path, encode_weights(bundle));
}

struct LayerInfo {
  std::string name;
  LayerKind kind;
  std::size_t out_channels;

  friend bool operator==(const LayerInfo&, const LayerInfo&) = default;
};

inline std::vector<LayerInfo> list_layers(const WeightBundle& bundle) {
  std::vector<LayerInfo> out;
  std::size_t channels = bundle.input_channels;
  for (const LayerSpec& layer : bundle.layers) {
    if (layer.kind == LayerKind::kConv2d) channels = layer.conv->out_ch;
    out.push_back({layer.name, layer.kind, channels});
  }
  return out;
}

namespace detail {

// Cross-correlation with zero padding. For each (output channel, input
// channel, kernel tap) a whole output row is accumulated at once so the
// innermost loop runs over contiguous memory.
inline Tensor conv2d(const Tensor& in, const Conv2dParams& p) {
  const std::size_t c_in = in.dim(0), h = in.dim(1), w = in.dim(2);
  const std::size_t padded_h = h + 2 * p.padding, padded_w = w + 2 * p.padding;
  if (padded_h < p.kh || padded_w < p.kw) {
    throw Error(Errc::kInvalidDims, "input smaller than convolution kernel");
  }
  const std::size_t out_h = (padded_h - p.kh) / p.stride + 1;
  const std::size_t out_w = (padded_w - p.kw) / p.stride + 1;

  // Zero-padded copy of the input.
  std::vector<double> padded(c_in * padded_h * padded_w, 0.0);
  for (std::size_t c = 0; c < c_in; ++c) {
    for (std::size_t r = 0; r < h; ++r) {
      const double* src = &in.data()[(c * h + r) * w];
      std::copy(src, src + w,
                &padded[(c * padded_h + r + p.padding) * padded_w + p.padding]);
    }
  }

  Tensor out({p.out_ch, out_h, out_w});
  const auto wt = p.weights.data();
  std::vector<double> row(out_w);
  for (std::size_t oc = 0; oc < p.out_ch; ++oc) {
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      std::fill(row.begin(), row.end(), p.bias[oc]);
      for (std::size_t ic = 0; ic < c_in; ++ic) {
        for (std::size_t ky = 0; ky < p.kh; ++ky) {
          const double* src =
              &padded[(ic * padded_h + oy * p.stride + ky) * padded_w];
          const double* k = &wt[((oc * c_in + ic) * p.kh + ky) * p.kw];
          for (std::size_t kx = 0; kx < p.kw; ++kx) {
            const double weight = k[kx];
            if (weight == 0.0) continue;
            const double* s = src + kx;
            if (p.stride == 1) {
              for (std::size_t ox = 0; ox < out_w; ++ox) row[ox] += weight * s[ox];
            } else {
              for (std::size_t ox = 0; ox < out_w; ++ox) {
                row[ox] += weight * s[ox * p.stride];
              }
            }
          }
        }
      }
      std::copy(row.begin(), row.end(), &out.data()[(oc * out_h + oy) * out_w]);
    }
  }
  return out;
}

inline void relu_inplace(Tensor& t) {
  for (double& v : t.data()) v = std::max(v, 0.0);
}

// 2x2 window, stride 2; trailing odd row/column dropped.
inline Tensor maxpool2(const Tensor& in) {
  const std::size_t c = in.dim(0), h = in.dim(1), w = in.dim(2);
  const std::size_t oh = h / 2, ow = w / 2;
  if (oh == 0 || ow == 0) {
    throw Error(Errc::kInvalidDims, "feature map too small for 2x2 pooling");
  }
  Tensor out({c, oh, ow});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t r = 0; r < oh; ++r) {
      for (std::size_t col = 0; col < ow; ++col) {
        out.at(ch, r, col) = std::max(
            std::max(in.at(ch, 2 * r, 2 * col), in.at(ch, 2 * r, 2 * col + 1)),
            std::max(in.at(ch, 2 * r + 1, 2 * col), in.at(ch, 2 * r + 1, 2 * col + 1)));
      }
    }
  }
  return out;
}

}  // namespace detail

// Normalized network input. A single-channel image is replicated when the
// network expects three channels.
inline Tensor network_input(const WeightBundle& bundle, const PlanarImage& img) {
  const std::size_t h = img.height(), w = img.width();
  const std::size_t plane = h * w;
  const auto src = img.tensor().data();
  const std::size_t want = bundle.input_channels;
  if (img.channels() != want && !(img.channels() == 1 && want == 3)) {
    throw Error(Errc::kChannelMismatch,
                "image has " + std::to_string(img.channels()) +
                    " channels, network expects " + std::to_string(want));
  }
  Tensor x({want, h, w});
  for (std::size_t c = 0; c < want; ++c) {
    const std::size_t sc = img.channels() == 1 ? 0 : c;
    for (std::size_t i = 0; i < plane; ++i) {
      x[c * plane + i] = (src[sc * plane + i] - bundle.mean[c]) * bundle.scale[c];
    }
  }
  return x;
}

// Runs the bundle from its first layer through `layer_name` inclusive.
inline FeatureStack forward_tensor(const WeightBundle& bundle, Tensor x,
                                   std::string_view layer_name) {
  const auto it = std::find_if(bundle.layers.begin(), bundle.layers.end(),
                               [&](const LayerSpec& l) { return l.name == layer_name; });
  if (it == bundle.layers.end()) {
    throw Error(Errc::kUnknownLayer, "no layer named " + std::string(layer_name));
  }
  if (x.rank() != 3 || x.dim(0) != bundle.input_channels) {
    throw Error(Errc::kChannelMismatch, "input does not match network channels");
  }
  for (auto l = bundle.layers.begin();; ++l) {
    switch (l->kind) {
      case LayerKind::kConv2d: x = detail::conv2d(x, *l->conv); break;
      case LayerKind::kRelu: detail::relu_inplace(x); break;
      case LayerKind::kMaxPool2: x = detail::maxpool2(x); break;
    }
    if (l == it) break;
  }
  return FeatureStack{std::move(x), std::string(layer_name)};
}

inline FeatureStack forward(const WeightBundle& bundle, const PlanarImage& img,
                            std::string_view layer_name) {
  return forward_tensor(bundle, network_input(bundle, img), layer_name);
}

}  // namespace csfp
