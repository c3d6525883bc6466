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

// Distortion metrics on the luma plane: PSNR and mean SSIM.

#pragma once

#include <cmath>
#include <vector>

#include "csfp/error.hpp"
#include "csfp/tensor.hpp"

namespace csfp {

struct SsimConfig {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

namespace detail {

inline std::pair<Tensor, Tensor> luma_pair(const PlanarImage& a, const PlanarImage& b) {
  if (a.tensor().dims() != b.tensor().dims()) {
    throw Error(Errc::kDimMismatch, "images differ in shape");
  }
  return {luma_plane(a), luma_plane(b)};
}

}  // namespace detail

// 10 log10(1 / MSE) for [0,1] luma. Identical images have no finite PSNR.
inline double psnr(const PlanarImage& a, const PlanarImage& b) {
  const auto [ya, yb] = detail::luma_pair(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < ya.size(); ++i) {
    const double d = ya[i] - yb[i];
    s += d * d;
  }
  const double mse = s / static_cast<double>(ya.size());
  if (mse == 0.0) throw Error(Errc::kIdenticalImages, "PSNR is infinite for identical images");
  return 10.0 * std::log10(1.0 / mse);
}

inline std::vector<double> gaussian_window(std::size_t size, double sigma) {
  std::vector<double> w(size);
  const double centre = (static_cast<double>(size) - 1.0) / 2.0;
  double total = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double x = static_cast<double>(i) - centre;
    w[i] = std::exp(-x * x / (2.0 * sigma * sigma));
    total += w[i];
  }
  for (double& v : w) v /= total;
  return w;
}

// Mean of the local SSIM index over every window that fits entirely inside
// the image (no padding).
inline double ssim(const PlanarImage& a, const PlanarImage& b, const SsimConfig& cfg = {}) {
  if (cfg.k1 <= 0.0 || cfg.k2 <= 0.0 || cfg.window == 0 || cfg.sigma <= 0.0) {
    throw Error(Errc::kInvalidValue, "invalid SSIM configuration");
  }
  const auto [x, y] = detail::luma_pair(a, b);
  const std::size_t h = x.dim(0), w = x.dim(1), k = cfg.window;
  if (h < k || w < k) throw Error(Errc::kTooSmall, "image smaller than SSIM window");

  const std::vector<double> g = gaussian_window(k, cfg.sigma);
  const double c1 = (cfg.k1 * cfg.dynamic_range) * (cfg.k1 * cfg.dynamic_range);
  const double c2 = (cfg.k2 * cfg.dynamic_range) * (cfg.k2 * cfg.dynamic_range);

  // Separable weighted moments: filter rows, then columns, valid region only.
  const std::size_t oh = h - k + 1, ow = w - k + 1;
  auto filter = [&](auto&& value) {
    Tensor rows({h, ow});
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < ow; ++c) {
        double s = 0.0;
        for (std::size_t t = 0; t < k; ++t) s += g[t] * value(r, c + t);
        rows.at(r, c) = s;
      }
    }
    Tensor out({oh, ow});
    for (std::size_t r = 0; r < oh; ++r) {
      for (std::size_t c = 0; c < ow; ++c) {
        double s = 0.0;
        for (std::size_t t = 0; t < k; ++t) s += g[t] * rows.at(r + t, c);
        out.at(r, c) = s;
      }
    }
    return out;
  };
  const Tensor mx = filter([&](std::size_t r, std::size_t c) { return x.at(r, c); });
  const Tensor my = filter([&](std::size_t r, std::size_t c) { return y.at(r, c); });
  const Tensor mxx = filter([&](std::size_t r, std::size_t c) { return x.at(r, c) * x.at(r, c); });
  const Tensor myy = filter([&](std::size_t r, std::size_t c) { return y.at(r, c) * y.at(r, c); });
  const Tensor mxy = filter([&](std::size_t r, std::size_t c) { return x.at(r, c) * y.at(r, c); });

  double total = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double ux = mx[i], uy = my[i];
    const double vx = mxx[i] - ux * ux;
    const double vy = myy[i] - uy * uy;
    const double cov = mxy[i] - ux * uy;
    total += ((2.0 * ux * uy + c1) * (2.0 * cov + c2)) /
             ((ux * ux + uy * uy + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(mx.size());
}

}  // namespace csfp
