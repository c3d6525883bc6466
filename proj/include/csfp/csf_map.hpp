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

// Contrast-sensitivity attention maps.
//
// The ground-truth luma plane is taken to the frequency domain, every DFT bin
// is assigned a spatial frequency in cycles per degree of visual angle for a
// given display dot pitch and viewing distance, bins outside a band around
// the peak of the human contrast sensitivity curve are discarded, and the
// band-limited image is transformed back. The magnitude of that
// reconstruction, scaled so its largest element is 1, is the attention map.
//
// Transform conventions:
//   forward  F[u,v] = 1/(MN) * sum_{m,n} I[m,n] exp(-j2pi(um/M + vn/N))
//   inverse  T[m,n] =          sum_{u,v} F[u,v] exp(+j2pi(um/M + vn/N))
// u indexes rows (size M) and v indexes columns (size N).

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <utility>
#include <vector>

#include "csfp/error.hpp"
#include "csfp/tensor.hpp"

namespace csfp {

struct ViewingGeometry {
  double dot_pitch_mm = 0.25;
  double distance_mm = 550.0;

  void validate() const {
    if (!(dot_pitch_mm > 0.0) || !std::isfinite(dot_pitch_mm) ||
        !(distance_mm > 0.0) || !std::isfinite(distance_mm)) {
      throw Error(Errc::kInvalidValue,
                  "dot pitch and viewing distance must be positive");
    }
  }

  // Degrees-to-cycles factor: cycles/degree = factor * cycles/mm.
  double cycles_per_mm_to_cpd() const {
    const double d = distance_mm;
    return std::numbers::pi / (180.0 * std::asin(1.0 / std::sqrt(1.0 + d * d)));
  }
};

struct CsfBand {
  double s_low_cpd = 2.0;
  double s_high_cpd = 23.0;

  void validate() const {
    if (!(s_low_cpd >= 0.0) || !(s_low_cpd < s_high_cpd) ||
        std::isnan(s_high_cpd)) {
      throw Error(Errc::kInvalidValue, "band requires 0 <= s_low < s_high");
    }
  }
  bool contains(double s) const { return s_low_cpd <= s && s <= s_high_cpd; }
};

// kFolded treats bin k and bin M-k as the same physical frequency; kLiteral
// uses (u-1)/(dot_pitch*M) for every bin and therefore breaks Hermitian
// symmetry above Nyquist. kLiteral exists for comparison runs only.
enum class FrequencyFolding { kFolded, kLiteral };

struct Spectrum {
  Tensor real;
  Tensor imag;

  std::size_t rows() const { return real.dim(0); }
  std::size_t cols() const { return real.dim(1); }
};

// Nonnegative (H,W) weighting whose maximum is exactly 1.
class AttentionMap {
 public:
  explicit AttentionMap(Tensor map) : map_(std::move(map)) {
    if (map_.rank() != 2) {
      throw Error(Errc::kInvalidDims, "attention map must be (H,W)");
    }
    for (double v : map_.data()) {
      if (v < 0.0 || v > 1.0) {
        throw Error(Errc::kInvalidValue, "attention map value outside [0,1]");
      }
    }
    if (map_.max() != 1.0) {
      throw Error(Errc::kInvalidValue, "attention map maximum is not 1");
    }
  }

  static AttentionMap uniform(std::size_t h, std::size_t w) {
    return AttentionMap(Tensor({h, w}, 1.0));
  }

  const Tensor& tensor() const noexcept { return map_; }
  std::size_t height() const { return map_.dim(0); }
  std::size_t width() const { return map_.dim(1); }

 private:
  Tensor map_;
};

namespace detail {

using Complex = std::complex<double>;

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// exp(sign * j2pi k/n) for k in [0,n).
inline std::vector<Complex> twiddles(std::size_t n, double sign) {
  std::vector<Complex> w(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double angle = sign * 2.0 * std::numbers::pi *
                         static_cast<double>(k) / static_cast<double>(n);
    w[k] = {std::cos(angle), std::sin(angle)};
  }
  return w;
}

// Unnormalized 1-D transform with kernel exp(sign * j2pi kn/N). Radix-2 for
// power-of-two lengths, direct summation otherwise.
class Transform1d {
 public:
  Transform1d(std::size_t n, double sign) : n_(n), w_(twiddles(n, sign)) {
    if (is_power_of_two(n_)) {
      rev_.resize(n_);
      std::size_t bits = 0;
      while ((std::size_t{1} << bits) < n_) ++bits;
      for (std::size_t i = 0; i < n_; ++i) {
        std::size_t r = 0;
        for (std::size_t b = 0; b < bits; ++b) r |= ((i >> b) & 1) << (bits - 1 - b);
        rev_[i] = r;
      }
    }
  }

  // Transforms `n` samples spaced `stride` apart in place.
  void apply(Complex* data, std::size_t stride, std::vector<Complex>& scratch) const {
    scratch.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) scratch[i] = data[i * stride];
    if (!rev_.empty()) {
      radix2(scratch);
    } else {
      direct(scratch);
    }
    for (std::size_t i = 0; i < n_; ++i) data[i * stride] = scratch[i];
  }

 private:
  void radix2(std::vector<Complex>& a) const {
    for (std::size_t i = 0; i < n_; ++i) {
      if (i < rev_[i]) std::swap(a[i], a[rev_[i]]);
    }
    for (std::size_t len = 2; len <= n_; len <<= 1) {
      const std::size_t half = len / 2;
      const std::size_t step = n_ / len;
      for (std::size_t start = 0; start < n_; start += len) {
        for (std::size_t k = 0; k < half; ++k) {
          const Complex t = w_[k * step] * a[start + k + half];
          const Complex u = a[start + k];
          a[start + k] = u + t;
          a[start + k + half] = u - t;
        }
      }
    }
  }

  void direct(std::vector<Complex>& a) const {
    std::vector<Complex> out(n_);
    for (std::size_t k = 0; k < n_; ++k) {
      Complex acc = 0.0;
      std::size_t idx = 0;
      for (std::size_t j = 0; j < n_; ++j) {
        acc += a[j] * w_[idx];
        idx += k;
        if (idx >= n_) idx -= n_;
      }
      out[k] = acc;
    }
    a.swap(out);
  }

  std::size_t n_;
  std::vector<Complex> w_;
  std::vector<std::size_t> rev_;
};

inline void transform2d(std::vector<Complex>& grid, std::size_t rows,
                        std::size_t cols, double sign) {
  std::vector<Complex> scratch;
  const Transform1d along_cols(cols, sign);
  for (std::size_t r = 0; r < rows; ++r) along_cols.apply(&grid[r * cols], 1, scratch);
  const Transform1d along_rows(rows, sign);
  for (std::size_t c = 0; c < cols; ++c) along_rows.apply(&grid[c], cols, scratch);
}

inline void check_plane(const Tensor& t, const char* what) {
  if (t.rank() != 2) throw Error(Errc::kInvalidDims, std::string(what) + " must be (M,N)");
}

// Full complex inverse; dft2/idft2 and the residue check share it.
inline std::vector<Complex> inverse_complex(const Spectrum& spec) {
  check_plane(spec.real, "spectrum");
  if (spec.real.dims() != spec.imag.dims()) {
    throw Error(Errc::kInvalidDims, "spectrum real/imag dims differ");
  }
  const std::size_t m = spec.rows(), n = spec.cols();
  std::vector<Complex> grid(m * n);
  for (std::size_t i = 0; i < m * n; ++i) grid[i] = {spec.real[i], spec.imag[i]};
  transform2d(grid, m, n, +1.0);
  return grid;
}

// Per-axis spatial frequency in cycles/mm for a 0-based bin index.
inline double axis_frequency(std::size_t k, std::size_t len, double pitch,
                             FrequencyFolding folding) {
  const std::size_t folded =
      folding == FrequencyFolding::kFolded ? std::min(k, len - k) : k;
  return static_cast<double>(folded) / (pitch * static_cast<double>(len));
}

}  // namespace detail

// Forward 2-D DFT with the 1/(MN) factor on the forward side.
inline Spectrum dft2(const Tensor& img) {
  detail::check_plane(img, "dft2 input");
  const std::size_t m = img.dim(0), n = img.dim(1);
  std::vector<detail::Complex> grid(m * n);
  for (std::size_t i = 0; i < m * n; ++i) grid[i] = img[i];
  detail::transform2d(grid, m, n, -1.0);
  const double scale = 1.0 / (static_cast<double>(m) * static_cast<double>(n));
  Spectrum spec{Tensor({m, n}), Tensor({m, n})};
  for (std::size_t i = 0; i < m * n; ++i) {
    spec.real[i] = grid[i].real() * scale;
    spec.imag[i] = grid[i].imag() * scale;
  }
  return spec;
}

struct InverseResult {
  Tensor real;
  double max_abs_imag = 0.0;
};

// Inverse 2-D DFT (no normalization factor), keeping the imaginary residue.
inline InverseResult idft2_with_residue(const Spectrum& spec) {
  const auto grid = detail::inverse_complex(spec);
  InverseResult out{Tensor({spec.rows(), spec.cols()}), 0.0};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out.real[i] = grid[i].real();
    out.max_abs_imag = std::max(out.max_abs_imag, std::abs(grid[i].imag()));
  }
  return out;
}

// Inverse 2-D DFT; returns the real part.
inline Tensor idft2(const Spectrum& spec) { return idft2_with_residue(spec).real; }

// Spatial frequency of bin (u,v) in cycles per degree. u and v are 1-based,
// 1 <= u <= M and 1 <= v <= N.
inline double cycles_per_degree(std::size_t u, std::size_t v, std::size_t m,
                                std::size_t n, const ViewingGeometry& geom,
                                FrequencyFolding folding = FrequencyFolding::kFolded) {
  if (u < 1 || u > m || v < 1 || v > n) {
    throw Error(Errc::kIndexOutOfRange, "frequency index outside [1,M]x[1,N]");
  }
  geom.validate();
  const double fu = detail::axis_frequency(u - 1, m, geom.dot_pitch_mm, folding);
  const double fv = detail::axis_frequency(v - 1, n, geom.dot_pitch_mm, folding);
  return geom.cycles_per_mm_to_cpd() * std::sqrt(fu * fu + fv * fv);
}

// Table of cycles_per_degree over every bin, row-major (M,N).
inline Tensor frequency_grid(std::size_t m, std::size_t n, const ViewingGeometry& geom,
                             FrequencyFolding folding = FrequencyFolding::kFolded) {
  geom.validate();
  const double k = geom.cycles_per_mm_to_cpd();
  Tensor s({m, n});
  for (std::size_t u = 0; u < m; ++u) {
    const double fu = detail::axis_frequency(u, m, geom.dot_pitch_mm, folding);
    for (std::size_t v = 0; v < n; ++v) {
      const double fv = detail::axis_frequency(v, n, geom.dot_pitch_mm, folding);
      s.at(u, v) = k * std::sqrt(fu * fu + fv * fv);
    }
  }
  return s;
}

// Ideal band-pass: bins whose frequency lies in [s_low, s_high] are kept,
// everything else is set to zero.
inline Spectrum bandpass(const Spectrum& spec, const CsfBand& band,
                         const ViewingGeometry& geom,
                         FrequencyFolding folding = FrequencyFolding::kFolded) {
  band.validate();
  const Tensor s = frequency_grid(spec.rows(), spec.cols(), geom, folding);
  Spectrum out = spec;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!band.contains(s[i])) {
      out.real[i] = 0.0;
      out.imag[i] = 0.0;
    }
  }
  return out;
}

struct MapOptions {
  CsfBand band;
  ViewingGeometry geometry;
  FrequencyFolding folding = FrequencyFolding::kFolded;
};

// Signed band-limited reconstruction of the luma plane, before the
// magnitude and max-normalization steps.
inline Tensor band_limited_reconstruction(const PlanarImage& gt, const MapOptions& opt) {
  const Tensor y = luma_plane(gt);
  return idft2(bandpass(dft2(y), opt.band, opt.geometry, opt.folding));
}

// Reconstructions whose peak is below this fraction of the luma peak are
// treated as identically zero (pure round-off from the transform pair).
inline constexpr double kDegenerateRelativeTolerance = 1e-10;

// Attention map of a ground-truth image. Throws DegenerateInput when the
// band holds no energy (for example a constant image).
inline AttentionMap generate_map(const PlanarImage& gt, const MapOptions& opt = {}) {
  opt.band.validate();
  opt.geometry.validate();
  Tensor t = band_limited_reconstruction(gt, opt);
  const double luma_peak = luma_plane(gt).max();
  double peak = 0.0;
  for (double& v : t.data()) {
    v = std::abs(v);
    peak = std::max(peak, v);
  }
  if (!(peak > kDegenerateRelativeTolerance * luma_peak) || peak == 0.0) {
    throw Error(Errc::kDegenerateInput,
                "band-limited reconstruction is identically zero");
  }
  for (double& v : t.data()) v /= peak;
  return AttentionMap(std::move(t));
}

// Bilinear resize to (h,w) followed by renormalization to a unit maximum.
inline AttentionMap resize_map(const AttentionMap& map, std::size_t h, std::size_t w) {
  Tensor t = resize_bilinear(map.tensor(), h, w);
  const double peak = t.max();
  if (!(peak > 0.0)) {
    throw Error(Errc::kDegenerateInput, "resized attention map is all zero");
  }
  if (peak != 1.0) {
    for (double& v : t.data()) v /= peak;
  }
  return AttentionMap(std::move(t));
}

// 8-bit friendly view of a map for visualization.
inline PlanarImage map_to_image(const AttentionMap& map) {
  const auto d = map.tensor().data();
  return PlanarImage(Tensor({1, map.height(), map.width()},
                            std::vector<double>(d.begin(), d.end())),
                     ColorSpace::kLuma);
}

}  // namespace csfp
