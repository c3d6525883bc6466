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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "csfp/error.hpp"

namespace csfp {

// Dense row-major array of doubles, outermost dimension first. For images
// the order is (channels, height, width).
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0)
      : dims_(std::move(dims)) {
    check_dims(dims_);
    if (!std::isfinite(fill)) {
      throw Error(Errc::kInvalidValue, "tensor fill value is not finite");
    }
    data_.assign(element_count(dims_), fill);
  }

  Tensor(std::vector<std::size_t> dims, std::vector<double> data)
      : dims_(std::move(dims)), data_(std::move(data)) {
    check_dims(dims_);
    if (element_count(dims_) != data_.size()) {
      throw Error(Errc::kInvalidDims,
                  "tensor data length does not match product of dims");
    }
    for (double v : data_) {
      if (!std::isfinite(v)) {
        throw Error(Errc::kInvalidValue, "tensor contains a non-finite value");
      }
    }
  }

  const std::vector<std::size_t>& dims() const noexcept { return dims_; }
  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t dim(std::size_t axis) const { return dims_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Rank-2 access.
  double& at(std::size_t r, std::size_t c) { return data_[r * dims_[1] + c]; }
  double at(std::size_t r, std::size_t c) const {
    return data_[r * dims_[1] + c];
  }

  // Rank-3 access.
  double& at(std::size_t ch, std::size_t r, std::size_t c) {
    return data_[(ch * dims_[1] + r) * dims_[2] + c];
  }
  double at(std::size_t ch, std::size_t r, std::size_t c) const {
    return data_[(ch * dims_[1] + r) * dims_[2] + c];
  }

  double min() const {
    return empty() ? 0.0 : *std::min_element(data_.begin(), data_.end());
  }
  double max() const {
    return empty() ? 0.0 : *std::max_element(data_.begin(), data_.end());
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

  static std::size_t element_count(const std::vector<std::size_t>& dims) {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                           std::multiplies<>());
  }

 private:
  static void check_dims(const std::vector<std::size_t>& dims) {
    if (dims.empty()) {
      throw Error(Errc::kInvalidDims, "tensor must have at least one dim");
    }
    for (std::size_t d : dims) {
      if (d == 0) throw Error(Errc::kInvalidDims, "tensor dim is zero");
    }
  }

  std::vector<std::size_t> dims_;
  std::vector<double> data_;
};

enum class ColorSpace { kRgb, kLuma };

// (C,H,W) image with values in [0,1]. C is 3 for RGB and 1 for LUMA.
class PlanarImage {
 public:
  PlanarImage(Tensor tensor, ColorSpace colorspace)
      : tensor_(std::move(tensor)), colorspace_(colorspace) {
    if (tensor_.rank() != 3) {
      throw Error(Errc::kInvalidDims, "image tensor must be (C,H,W)");
    }
    const std::size_t want = colorspace_ == ColorSpace::kLuma ? 1 : 3;
    if (tensor_.dim(0) != want) {
      throw Error(Errc::kInvalidDims,
                  "channel count does not match the image colorspace");
    }
    for (double v : tensor_.data()) {
      if (v < 0.0 || v > 1.0) {
        throw Error(Errc::kInvalidValue, "image value outside [0,1]");
      }
    }
  }

  const Tensor& tensor() const noexcept { return tensor_; }
  ColorSpace colorspace() const noexcept { return colorspace_; }
  std::size_t channels() const { return tensor_.dim(0); }
  std::size_t height() const { return tensor_.dim(1); }
  std::size_t width() const { return tensor_.dim(2); }

  friend bool operator==(const PlanarImage&, const PlanarImage&) = default;

 private:
  Tensor tensor_;
  ColorSpace colorspace_;
};

// Clamps every value into [0,1] and wraps the result as an image.
inline PlanarImage clamp_to_image(Tensor t, ColorSpace cs) {
  for (double& v : t.data()) v = std::clamp(v, 0.0, 1.0);
  return PlanarImage(std::move(t), cs);
}

inline constexpr double kLumaR = 0.299;
inline constexpr double kLumaG = 0.587;
inline constexpr double kLumaB = 0.114;

// BT.601 full-range luma. LUMA inputs are returned unchanged.
inline PlanarImage to_luma(const PlanarImage& img) {
  if (img.colorspace() == ColorSpace::kLuma) return img;
  const std::size_t h = img.height(), w = img.width();
  const Tensor& src = img.tensor();
  Tensor y({1, h, w});
  const std::size_t plane = h * w;
  for (std::size_t i = 0; i < plane; ++i) {
    const double v = kLumaR * src[i] + kLumaG * src[plane + i] +
                     kLumaB * src[2 * plane + i];
    y[i] = std::clamp(v, 0.0, 1.0);
  }
  return PlanarImage(std::move(y), ColorSpace::kLuma);
}

// The (H,W) plane of a single-channel image.
inline Tensor luma_plane(const PlanarImage& img) {
  const PlanarImage y = to_luma(img);
  const auto d = y.tensor().data();
  return Tensor({y.height(), y.width()}, std::vector<double>(d.begin(), d.end()));
}

// Bilinear resampling of an (H,W) tensor with half-pixel-centre alignment:
// output pixel j samples source coordinate (j + 0.5) * in / out - 0.5,
// clamped to the valid range.
inline Tensor resize_bilinear(const Tensor& t, std::size_t out_h,
                              std::size_t out_w) {
  if (t.rank() != 2) {
    throw Error(Errc::kInvalidDims, "resize_bilinear expects an (H,W) tensor");
  }
  if (out_h == 0 || out_w == 0) {
    throw Error(Errc::kInvalidDims, "resize target has a zero dimension");
  }
  const std::size_t in_h = t.dim(0), in_w = t.dim(1);
  if (in_h == out_h && in_w == out_w) return t;

  struct Tap {
    std::size_t i0, i1;
    double frac;
  };
  auto taps = [](std::size_t in, std::size_t out) {
    std::vector<Tap> result(out);
    const double ratio = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t j = 0; j < out; ++j) {
      double src = (static_cast<double>(j) + 0.5) * ratio - 0.5;
      src = std::clamp(src, 0.0, static_cast<double>(in - 1));
      const auto i0 = static_cast<std::size_t>(std::floor(src));
      const std::size_t i1 = std::min(i0 + 1, in - 1);
      result[j] = {i0, i1, src - static_cast<double>(i0)};
    }
    return result;
  };
  const auto rows = taps(in_h, out_h);
  const auto cols = taps(in_w, out_w);

  auto lerp = [](double a, double b, double f) {
    return std::clamp(a + f * (b - a), std::min(a, b), std::max(a, b));
  };

  Tensor out({out_h, out_w});
  for (std::size_t r = 0; r < out_h; ++r) {
    const Tap& ry = rows[r];
    for (std::size_t c = 0; c < out_w; ++c) {
      const Tap& cx = cols[c];
      const double top = lerp(t.at(ry.i0, cx.i0), t.at(ry.i0, cx.i1), cx.frac);
      const double bot = lerp(t.at(ry.i1, cx.i0), t.at(ry.i1, cx.i1), cx.frac);
      out.at(r, c) = lerp(top, bot, ry.frac);
    }
  }
  return out;
}

// Sum whose result does not depend on the order of the inputs: the values
// are sorted before accumulation.
inline double order_free_sum(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double s = 0.0;
  for (double v : values) s += v;
  return s;
}

}  // namespace csfp
