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

// Feature-space losses and their attention-weighted variants.
//
//   perceptual   l_p     = 1/(MHW) sum_m || x_m - y_m ||^2
//   attentive    l_p^att = 1/(MHW) sum_m || mu (.) (x_m - y_m) ||^2
//   contextual   l_cx    = -log( 1/N sum_j max_i A_ij )
//                A_ij    = exp(1 - d~_ij/h) / sum_l exp(1 - d~_il/h)
//                d~_ij   = d_ij / (min_k d_ik + eps)
//   attentive    l_cx^att = l_cx(mu (.) x, mu (.) y)
//   combined     L = alpha * l2 + (1 - alpha) * loss
//
// i runs over the spatial positions of x (the output image features), j and
// l over the positions of y (the ground-truth features). mu is one map
// broadcast over every feature channel.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "csfp/csf_map.hpp"
#include "csfp/csv.hpp"
#include "csfp/error.hpp"
#include "csfp/features.hpp"
#include "csfp/tensor.hpp"

namespace csfp {

enum class DistanceKind { kCosine, kL2 };

struct LossConfig {
  double alpha = 0.5;
  double cx_bandwidth_h = 0.5;
  double cx_epsilon = 1e-5;
  DistanceKind distance_kind = DistanceKind::kCosine;
  // Contextual terms are evaluated on a centre crop of at most this many
  // rows and columns of the feature maps; cost grows as (H*W)^2.
  std::size_t cx_max_side = 64;

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
      throw Error(Errc::kInvalidValue, "alpha must lie in [0,1]");
    }
    if (!(cx_bandwidth_h > 0.0) || !(cx_epsilon > 0.0)) {
      throw Error(Errc::kInvalidValue, "h and epsilon must be positive");
    }
    if (cx_max_side == 0) throw Error(Errc::kInvalidValue, "cx_max_side must be >= 1");
  }
};

enum class LossKind { kP, kPAtt, kCx, kCxAtt };

constexpr std::string_view loss_kind_name(LossKind k) {
  switch (k) {
    case LossKind::kP: return "P";
    case LossKind::kPAtt: return "P_ATT";
    case LossKind::kCx: return "CX";
    case LossKind::kCxAtt: return "CX_ATT";
  }
  return "?";
}

inline LossKind parse_loss_kind(std::string_view s) {
  for (LossKind k : {LossKind::kP, LossKind::kPAtt, LossKind::kCx, LossKind::kCxAtt}) {
    if (s == loss_kind_name(k)) return k;
  }
  throw Error(Errc::kInvalidValue, "unknown loss kind '" + std::string(s) + "'");
}

struct LossReport {
  double l2 = 0.0;
  double l_p = 0.0;
  double l_p_att = 0.0;
  double l_cx = 0.0;
  double l_cx_att = 0.0;
  double combined = 0.0;
  std::string layer_name;
  LossKind kind = LossKind::kP;
  double alpha = 0.0;
  // Set when the attention map was degenerate and replaced by a uniform map.
  bool fallback = false;

  double selected() const {
    switch (kind) {
      case LossKind::kP: return l_p;
      case LossKind::kPAtt: return l_p_att;
      case LossKind::kCx: return l_cx;
      case LossKind::kCxAtt: return l_cx_att;
    }
    return l_p;
  }
};

inline std::vector<std::string> loss_csv_header() {
  return {"image_id", "layer", "alpha", "kind", "l2", "l_p", "l_p_att",
          "l_cx", "l_cx_att", "combined", "fallback_flag"};
}

inline std::vector<std::string> loss_csv_fields(const LossReport& r,
                                                std::string_view image_id) {
  return {std::string(image_id), r.layer_name, format_double(r.alpha),
          std::string(loss_kind_name(r.kind)), format_double(r.l2),
          format_double(r.l_p), format_double(r.l_p_att), format_double(r.l_cx),
          format_double(r.l_cx_att), format_double(r.combined), r.fallback ? "1" : "0"};
}

// Mean squared error over every pixel and channel.
inline double l2_loss(const PlanarImage& a, const PlanarImage& b) {
  if (a.tensor().dims() != b.tensor().dims()) {
    throw Error(Errc::kDimMismatch, "l2_loss: image dims differ");
  }
  const auto x = a.tensor().data();
  const auto y = b.tensor().data();
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    s += d * d;
  }
  return s / static_cast<double>(x.size());
}

namespace detail {

inline void check_stack(const FeatureStack& s) {
  if (s.tensor.rank() != 3) throw Error(Errc::kDimMismatch, "feature stack must be (M,H,W)");
}

inline void check_same_stacks(const FeatureStack& x, const FeatureStack& y) {
  check_stack(x);
  check_stack(y);
  if (x.tensor.dims() != y.tensor.dims()) {
    throw Error(Errc::kDimMismatch, "feature stacks differ in shape");
  }
}

inline void check_map(const FeatureStack& x, const AttentionMap& map) {
  if (map.height() != x.height() || map.width() != x.width()) {
    throw Error(Errc::kDimMismatch, "attention map does not match feature map size");
  }
}

// Shared kernel so the unweighted and weighted forms accumulate identically.
inline double squared_feature_distance(const FeatureStack& x, const FeatureStack& y,
                                       const Tensor* map) {
  const std::size_t m = x.maps(), plane = x.height() * x.width();
  const auto a = x.tensor.data();
  const auto b = y.tensor.data();
  double s = 0.0;
  for (std::size_t c = 0; c < m; ++c) {
    for (std::size_t p = 0; p < plane; ++p) {
      double d = a[c * plane + p] - b[c * plane + p];
      if (map != nullptr) d *= (*map)[p];
      s += d * d;
    }
  }
  return s / static_cast<double>(m * plane);
}

}  // namespace detail

inline double perceptual_loss(const FeatureStack& x, const FeatureStack& y) {
  detail::check_same_stacks(x, y);
  return detail::squared_feature_distance(x, y, nullptr);
}

inline double attentive_perceptual_loss(const FeatureStack& x, const FeatureStack& y,
                                        const AttentionMap& map) {
  detail::check_same_stacks(x, y);
  detail::check_map(x, map);
  return detail::squared_feature_distance(x, y, &map.tensor());
}

// mu (.) stack, with mu broadcast over channels.
inline FeatureStack weight_stack(const FeatureStack& s, const AttentionMap& map) {
  detail::check_stack(s);
  detail::check_map(s, map);
  FeatureStack out = s;
  const std::size_t plane = s.height() * s.width();
  const Tensor& mu = map.tensor();
  for (std::size_t c = 0; c < s.maps(); ++c) {
    for (std::size_t p = 0; p < plane; ++p) out.tensor[c * plane + p] *= mu[p];
  }
  return out;
}

namespace detail {

// Position-major copy: row p holds the M channel values at spatial position p.
inline std::vector<double> positions(const FeatureStack& s) {
  const std::size_t m = s.maps(), plane = s.height() * s.width();
  std::vector<double> out(plane * m);
  for (std::size_t c = 0; c < m; ++c) {
    for (std::size_t p = 0; p < plane; ++p) out[p * m + c] = s.tensor[c * plane + p];
  }
  return out;
}

}  // namespace detail

// Contextual loss. Every reduction over spatial positions is done with an
// order-independent sum, so permuting positions leaves the result unchanged
// bit for bit.
inline double contextual_loss(const FeatureStack& x, const FeatureStack& y,
                              const LossConfig& cfg) {
  detail::check_stack(x);
  detail::check_stack(y);
  if (x.maps() != y.maps()) throw Error(Errc::kDimMismatch, "channel counts differ");
  if (!(cfg.cx_bandwidth_h > 0.0) || !(cfg.cx_epsilon > 0.0)) {
    throw Error(Errc::kInvalidValue, "h and epsilon must be positive");
  }
  const std::size_t m = x.maps();
  const std::size_t nx = x.height() * x.width();
  const std::size_t ny = y.height() * y.width();
  if (m == 0 || nx == 0 || ny == 0) throw Error(Errc::kEmptyStack, "empty feature stack");

  std::vector<double> xs = detail::positions(x);
  std::vector<double> ys = detail::positions(y);

  if (cfg.distance_kind == DistanceKind::kCosine) {
    // Centre both sets on the mean of y, then scale each position to unit
    // length; a zero vector stays zero.
    std::vector<double> mean(m);
    std::vector<double> column(ny);
    for (std::size_t c = 0; c < m; ++c) {
      for (std::size_t j = 0; j < ny; ++j) column[j] = ys[j * m + c];
      mean[c] = order_free_sum(column) / static_cast<double>(ny);
    }
    auto centre_and_normalize = [&](std::vector<double>& v, std::size_t n) {
      for (std::size_t p = 0; p < n; ++p) {
        double* row = &v[p * m];
        double norm2 = 0.0;
        for (std::size_t c = 0; c < m; ++c) {
          row[c] -= mean[c];
          norm2 += row[c] * row[c];
        }
        const double norm = std::sqrt(norm2);
        if (norm > 0.0) {
          for (std::size_t c = 0; c < m; ++c) row[c] /= norm;
        }
      }
    };
    centre_and_normalize(xs, nx);
    centre_and_normalize(ys, ny);
  }

  auto distance = [&](std::size_t i, std::size_t j) {
    const double* a = &xs[i * m];
    const double* b = &ys[j * m];
    double acc = 0.0;
    if (cfg.distance_kind == DistanceKind::kCosine) {
      for (std::size_t c = 0; c < m; ++c) acc += a[c] * b[c];
      return std::max(0.0, 1.0 - acc);
    }
    for (std::size_t c = 0; c < m; ++c) {
      const double d = a[c] - b[c];
      acc += d * d;
    }
    return std::sqrt(acc);
  };

  const double h = cfg.cx_bandwidth_h;
  std::vector<double> col_max(ny, 0.0);
  std::vector<double> row(ny), weights(ny);
  for (std::size_t i = 0; i < nx; ++i) {
    double dmin = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < ny; ++j) {
      row[j] = distance(i, j);
      dmin = std::min(dmin, row[j]);
    }
    const double denom = dmin + cfg.cx_epsilon;
    const double rel_min = dmin / denom;
    // exp(1 - d~/h) normalized over the row equals exp(-(d~ - d~min)/h)
    // normalized; the shifted form cannot overflow or underflow to all zeros.
    for (std::size_t j = 0; j < ny; ++j) {
      weights[j] = std::exp(-(row[j] / denom - rel_min) / h);
    }
    const double z = order_free_sum(weights);
    for (std::size_t j = 0; j < ny; ++j) {
      col_max[j] = std::max(col_max[j], weights[j] / z);
    }
  }
  const double mean_best = order_free_sum(col_max) / static_cast<double>(ny);
  return std::max(0.0, -std::log(mean_best));
}

inline double attentive_contextual_loss(const FeatureStack& x, const FeatureStack& y,
                                        const AttentionMap& map, const LossConfig& cfg) {
  return contextual_loss(weight_stack(x, map), weight_stack(y, map), cfg);
}

// Centre crop of every channel to at most max_side x max_side.
inline FeatureStack centre_crop(const FeatureStack& s, std::size_t max_side) {
  const std::size_t h = std::min(s.height(), max_side);
  const std::size_t w = std::min(s.width(), max_side);
  if (h == s.height() && w == s.width()) return s;
  const std::size_t r0 = (s.height() - h) / 2, c0 = (s.width() - w) / 2;
  Tensor t({s.maps(), h, w});
  for (std::size_t c = 0; c < s.maps(); ++c) {
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t col = 0; col < w; ++col) {
        t.at(c, r, col) = s.tensor.at(c, r0 + r, c0 + col);
      }
    }
  }
  return FeatureStack{std::move(t), s.layer_name};
}

inline AttentionMap centre_crop(const AttentionMap& map, std::size_t max_side) {
  FeatureStack as_stack{Tensor({1, map.height(), map.width()},
                               std::vector<double>(map.tensor().data().begin(),
                                                   map.tensor().data().end())),
                        ""};
  const FeatureStack cropped = centre_crop(as_stack, max_side);
  Tensor t({cropped.height(), cropped.width()},
           std::vector<double>(cropped.tensor.data().begin(), cropped.tensor.data().end()));
  const double peak = t.max();
  if (!(peak > 0.0)) return AttentionMap::uniform(t.dim(0), t.dim(1));
  for (double& v : t.data()) v /= peak;
  return AttentionMap(std::move(t));
}

struct AttentionOptions {
  MapOptions map;
  // Replaces the CSF map by mu = 1 everywhere.
  bool uniform = false;
};

struct ResolvedMap {
  AttentionMap map;
  bool fallback = false;
};

// Attention map of the ground truth at feature resolution (h,w). A
// degenerate map falls back to mu = 1 with the fallback flag set.
inline ResolvedMap attention_for_layer(const PlanarImage& gt, std::size_t h, std::size_t w,
                                       const AttentionOptions& opt) {
  if (opt.uniform) return {AttentionMap::uniform(h, w), false};
  try {
    return {resize_map(generate_map(gt, opt.map), h, w), false};
  } catch (const Error& e) {
    if (e.code() != Errc::kDegenerateInput) throw;
    return {AttentionMap::uniform(h, w), true};
  }
}

// Evaluates every loss of the family for one (ground truth, output) pair and
// combines the one selected by `kind` with the pixel l2 term.
inline LossReport combined_loss(const PlanarImage& gt, const PlanarImage& out,
                                const WeightBundle& bundle, std::string_view layer,
                                const LossConfig& cfg, LossKind kind,
                                const AttentionOptions& att = {}) {
  cfg.validate();
  if (gt.tensor().dims() != out.tensor().dims()) {
    throw Error(Errc::kDimMismatch, "ground truth and output differ in shape");
  }
  LossReport r;
  r.layer_name = std::string(layer);
  r.kind = kind;
  r.alpha = cfg.alpha;
  r.l2 = l2_loss(gt, out);

  const FeatureStack fx = forward(bundle, out, layer);
  const FeatureStack fy = forward(bundle, gt, layer);
  const ResolvedMap mu = attention_for_layer(gt, fx.height(), fx.width(), att);
  r.fallback = mu.fallback;

  r.l_p = perceptual_loss(fx, fy);
  r.l_p_att = attentive_perceptual_loss(fx, fy, mu.map);

  const FeatureStack cx = centre_crop(fx, cfg.cx_max_side);
  const FeatureStack cy = centre_crop(fy, cfg.cx_max_side);
  r.l_cx = contextual_loss(cx, cy, cfg);
  r.l_cx_att = attentive_contextual_loss(cx, cy, centre_crop(mu.map, cfg.cx_max_side), cfg);

  r.combined = cfg.alpha * r.l2 + (1.0 - cfg.alpha) * r.selected();
  return r;
}

}  // namespace csfp
