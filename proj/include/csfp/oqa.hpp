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

// Objective quality assessment: map objective scores onto subjective scores
// with a 5-parameter logistic-plus-linear curve, then report RMSE and
// Pearson LCC of the mapped scores and Spearman SROCC of the raw scores.
//
//   q(x) = b1 * (1/2 - 1/(1 + exp(b2 (x - b3)))) + b4 x + b5

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "csfp/csv.hpp"
#include "csfp/distort.hpp"
#include "csfp/error.hpp"
#include "csfp/features.hpp"
#include "csfp/image_io.hpp"
#include "csfp/losses.hpp"
#include "csfp/parallel.hpp"

namespace csfp {

struct OqaRecord {
  std::string image_id;
  double objective = 0.0;
  double subjective = 0.0;
};

struct FitModel {
  std::array<double, 5> params{};

  double operator()(double x) const {
    const auto& b = params;
    return b[0] * (0.5 - 1.0 / (1.0 + std::exp(b[1] * (x - b[2])))) + b[3] * x + b[4];
  }
};

struct FitOptions {
  double diameter_tolerance = 1e-9;
  std::size_t max_iterations = 10000;
};

namespace detail {

inline double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double sse(const FitModel& m, const std::vector<OqaRecord>& records) {
  double s = 0.0;
  for (const auto& r : records) {
    const double d = m(r.objective) - r.subjective;
    s += d * d;
  }
  return std::isfinite(s) ? s : std::numeric_limits<double>::infinity();
}

template <std::size_t N>
struct Simplex {
  std::array<std::array<double, N>, N + 1> points{};
  std::array<double, N + 1> values{};
};

// Nelder-Mead with the standard coefficients (reflection 1, expansion 2,
// contraction 1/2, shrink 1/2). Stops when the largest vertex distance from
// the best vertex falls below `tol` or after `max_iter` iterations.
template <std::size_t N, typename F>
std::array<double, N> nelder_mead(F&& f, std::array<double, N> start,
                                  const std::array<double, N>& steps, double tol,
                                  std::size_t max_iter, std::size_t* iterations) {
  Simplex<N> s;
  s.points[0] = start;
  for (std::size_t i = 0; i < N; ++i) {
    s.points[i + 1] = start;
    s.points[i + 1][i] += steps[i];
  }
  for (std::size_t i = 0; i <= N; ++i) s.values[i] = f(s.points[i]);

  std::array<std::size_t, N + 1> order;
  auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return s.values[a] < s.values[b]; });
    Simplex<N> sorted;
    for (std::size_t i = 0; i <= N; ++i) {
      sorted.points[i] = s.points[order[i]];
      sorted.values[i] = s.values[order[i]];
    }
    s = sorted;
  };
  auto diameter = [&] {
    double d = 0.0;
    for (std::size_t i = 1; i <= N; ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k < N; ++k) {
        const double t = s.points[i][k] - s.points[0][k];
        acc += t * t;
      }
      d = std::max(d, std::sqrt(acc));
    }
    return d;
  };
  auto along = [](const std::array<double, N>& c, const std::array<double, N>& p, double t) {
    std::array<double, N> out;
    for (std::size_t k = 0; k < N; ++k) out[k] = c[k] + t * (p[k] - c[k]);
    return out;
  };

  std::size_t it = 0;
  for (; it < max_iter; ++it) {
    sort_simplex();
    if (diameter() < tol) break;
    std::array<double, N> centroid{};
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t k = 0; k < N; ++k) centroid[k] += s.points[i][k];
    }
    for (double& c : centroid) c /= static_cast<double>(N);

    const auto& worst = s.points[N];
    const auto reflected = along(centroid, worst, -1.0);
    const double fr = f(reflected);
    if (fr < s.values[0]) {
      const auto expanded = along(centroid, worst, -2.0);
      const double fe = f(expanded);
      if (fe < fr) {
        s.points[N] = expanded;
        s.values[N] = fe;
      } else {
        s.points[N] = reflected;
        s.values[N] = fr;
      }
      continue;
    }
    if (fr < s.values[N - 1]) {
      s.points[N] = reflected;
      s.values[N] = fr;
      continue;
    }
    const bool outside = fr < s.values[N];
    const auto contracted = outside ? along(centroid, worst, -0.5) : along(centroid, worst, 0.5);
    const double fc = f(contracted);
    if (fc < (outside ? fr : s.values[N])) {
      s.points[N] = contracted;
      s.values[N] = fc;
      continue;
    }
    for (std::size_t i = 1; i <= N; ++i) {
      s.points[i] = along(s.points[0], s.points[i], 0.5);
      s.values[i] = f(s.points[i]);
    }
  }
  sort_simplex();
  if (iterations != nullptr) *iterations = it;
  return s.points[0];
}

// Levenberg-Marquardt refinement of the logistic parameters using the
// analytic Jacobian. Only steps that lower the residual are taken.
inline std::array<double, 5> refine_logistic(const std::vector<OqaRecord>& records,
                                             std::array<double, 5> b, std::size_t max_iter) {
  double current = sse(FitModel{b}, records);
  double lambda = 1e-3;
  for (std::size_t it = 0; it < max_iter && current > 0.0; ++it) {
    std::array<std::array<double, 5>, 5> jtj{};
    std::array<double, 5> jtr{};
    for (const auto& r : records) {
      const double x = r.objective;
      const double sig = 1.0 / (1.0 + std::exp(b[1] * (x - b[2])));
      const double slope = sig * (1.0 - sig);
      const std::array<double, 5> g{0.5 - sig, b[0] * slope * (x - b[2]), -b[0] * slope * b[1],
                                    x, 1.0};
      const double res = r.subjective - FitModel{b}(x);
      for (std::size_t i = 0; i < 5; ++i) {
        jtr[i] += g[i] * res;
        for (std::size_t j = 0; j < 5; ++j) jtj[i][j] += g[i] * g[j];
      }
    }
    double scale = 0.0;
    for (std::size_t i = 0; i < 5; ++i) scale = std::max(scale, jtj[i][i]);
    if (!(scale > 0.0) || !std::isfinite(scale)) break;

    bool accepted = false;
    while (lambda < 1e12) {
      // Solve (JtJ + lambda diag) d = Jtr by Gaussian elimination.
      std::array<std::array<double, 6>, 5> a{};
      for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t j = 0; j < 5; ++j) a[i][j] = jtj[i][j];
        a[i][i] += lambda * std::max(jtj[i][i], 1e-12 * scale);
        a[i][5] = jtr[i];
      }
      bool singular = false;
      for (std::size_t c = 0; c < 5 && !singular; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < 5; ++r) {
          if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
        }
        if (!(std::abs(a[piv][c]) > 0.0)) {
          singular = true;
          break;
        }
        std::swap(a[c], a[piv]);
        for (std::size_t r = c + 1; r < 5; ++r) {
          const double f = a[r][c] / a[c][c];
          for (std::size_t k = c; k < 6; ++k) a[r][k] -= f * a[c][k];
        }
      }
      if (singular) {
        lambda *= 10.0;
        continue;
      }
      std::array<double, 5> d{};
      for (std::size_t i = 5; i-- > 0;) {
        double acc = a[i][5];
        for (std::size_t k = i + 1; k < 5; ++k) acc -= a[i][k] * d[k];
        d[i] = acc / a[i][i];
      }
      std::array<double, 5> trial = b;
      for (std::size_t i = 0; i < 5; ++i) trial[i] += d[i];
      const double value = sse(FitModel{trial}, records);
      if (value < current) {
        const bool tiny = current - value <= 1e-15 * current;
        b = trial;
        current = value;
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = !tiny;
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted) break;
  }
  return b;
}

}  // namespace detail

// Least-squares fit of the logistic mapping. Starts from
// b1 = range(subjective), b2 = 1/std(objective), b3 = mean(objective),
// b4 = 0, b5 = mean(subjective), and restarts the simplex from the best
// point until a restart no longer improves the residual. The better of the
// simplex result and the straight least-squares line is then polished with
// Levenberg-Marquardt steps.
inline FitModel fit_curve(const std::vector<OqaRecord>& records, const FitOptions& opt = {}) {
  if (records.size() < 6) throw Error(Errc::kTooFew, "curve fitting needs at least 6 records");
  std::vector<double> obj, subj;
  for (const auto& r : records) {
    if (!std::isfinite(r.objective) || !std::isfinite(r.subjective)) {
      throw Error(Errc::kInvalidValue, "non-finite score for " + r.image_id);
    }
    obj.push_back(r.objective);
    subj.push_back(r.subjective);
  }
  const auto [omin, omax] = std::minmax_element(obj.begin(), obj.end());
  if (*omin == *omax) throw Error(Errc::kDegenerateData, "objective scores are all equal");
  const auto [smin, smax] = std::minmax_element(subj.begin(), subj.end());

  const double omean = detail::mean_of(obj);
  double ovar = 0.0;
  for (double v : obj) ovar += (v - omean) * (v - omean);
  const double ostd = std::sqrt(ovar / static_cast<double>(obj.size()));

  std::array<double, 5> beta{*smax - *smin, 1.0 / ostd, omean, 0.0, detail::mean_of(subj)};
  auto objective = [&](const std::array<double, 5>& b) {
    return detail::sse(FitModel{b}, records);
  };
  // Step sizes follow the scale of each parameter's natural unit.
  const double srange = std::max(*smax - *smin, 1e-12);
  const double orange = *omax - *omin;
  double best = objective(beta);
  std::size_t budget = opt.max_iterations;
  while (budget > 0) {
    const std::array<double, 5> steps{0.1 * srange, 0.1 * beta[1] + 0.1 / ostd,
                                      0.1 * orange, 0.1 * srange / orange, 0.1 * srange};
    std::size_t used = 0;
    const auto next = detail::nelder_mead<5>(objective, beta, steps, opt.diameter_tolerance,
                                             budget, &used);
    budget -= std::min(budget, std::max<std::size_t>(used, 1));
    const double value = objective(next);
    const bool improved = value < best * (1.0 - 1e-12) || (best > 0.0 && value == 0.0);
    if (value <= best) {
      beta = next;
      best = value;
    }
    if (!improved) break;
  }
  // The straight least-squares line is the model's b1 = 0 limit; the simplex
  // can stall in the flat b2 -> 0 valley that leads to it.
  const double smean = detail::mean_of(subj);
  double sxy = 0.0;
  for (std::size_t i = 0; i < obj.size(); ++i) sxy += (obj[i] - omean) * (subj[i] - smean);
  const double slope = sxy / ovar;
  const std::array<double, 5> line{0.0, 1.0 / ostd, omean, slope, smean - slope * omean};
  if (objective(line) < best) beta = line;
  return FitModel{detail::refine_logistic(records, beta, 200)};
}

inline void require_records(const std::vector<OqaRecord>& records, std::size_t n) {
  if (records.size() < n) throw Error(Errc::kTooFew, "not enough records");
}

inline double rmse(const FitModel& model, const std::vector<OqaRecord>& records) {
  require_records(records, 2);
  return std::sqrt(detail::sse(model, records) / static_cast<double>(records.size()));
}

// Pearson correlation; 0 when either side has zero variance.
inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double ma = detail::mean_of(a), mb = detail::mean_of(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

inline double lcc(const FitModel& model, const std::vector<OqaRecord>& records) {
  require_records(records, 2);
  std::vector<double> pred, subj;
  for (const auto& r : records) {
    pred.push_back(model(r.objective));
    subj.push_back(r.subjective);
  }
  return pearson(pred, subj);
}

// 1-based ranks; tied values share the average of their positions.
inline std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double rank = (static_cast<double>(i + j) + 2.0) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

inline double srocc(const std::vector<OqaRecord>& records) {
  require_records(records, 2);
  std::vector<double> obj, subj;
  for (const auto& r : records) {
    obj.push_back(r.objective);
    subj.push_back(r.subjective);
  }
  return pearson(average_ranks(obj), average_ranks(subj));
}

enum class OqaMetric { kLp, kLpAtt, kLcx, kLcxAtt };

constexpr std::string_view oqa_metric_name(OqaMetric m) {
  switch (m) {
    case OqaMetric::kLp: return "l_p";
    case OqaMetric::kLpAtt: return "l_p_att";
    case OqaMetric::kLcx: return "l_cx";
    case OqaMetric::kLcxAtt: return "l_cx_att";
  }
  return "?";
}

inline OqaMetric parse_oqa_metric(std::string_view s) {
  for (OqaMetric m : {OqaMetric::kLp, OqaMetric::kLpAtt, OqaMetric::kLcx, OqaMetric::kLcxAtt}) {
    if (s == oqa_metric_name(m)) return m;
  }
  throw Error(Errc::kInvalidValue, "unknown metric '" + std::string(s) + "'");
}

struct OqaSummary {
  std::string metric;
  std::string layer;
  std::size_t count = 0;
  double rmse = 0.0;
  double lcc = 0.0;
  double srocc = 0.0;
  FitModel model;
};

struct OqaResult {
  std::vector<OqaRecord> records;
  std::vector<double> predicted;
  OqaSummary summary;

  CsvTable scores_table() const {
    CsvTable t;
    t.header = {"image_id", "objective", "subjective", "predicted"};
    for (std::size_t i = 0; i < records.size(); ++i) {
      t.rows.push_back({records[i].image_id, format_double(records[i].objective),
                        format_double(records[i].subjective), format_double(predicted[i])});
    }
    return t;
  }

  CsvTable summary_table() const {
    CsvTable t;
    t.header = {"metric", "layer", "n", "rmse", "lcc", "srocc", "b1", "b2", "b3", "b4", "b5"};
    std::vector<std::string> row{summary.metric, summary.layer, std::to_string(summary.count),
                                 format_double(summary.rmse), format_double(summary.lcc),
                                 format_double(summary.srocc)};
    for (double b : summary.model.params) row.push_back(format_double(b));
    t.rows.push_back(std::move(row));
    return t;
  }
};

// Objective score of one (reference, distorted) pair.
inline double objective_score(const PlanarImage& ref, const PlanarImage& dist,
                              const WeightBundle& bundle, std::string_view layer,
                              OqaMetric metric, const LossConfig& cfg,
                              const AttentionOptions& att) {
  if (ref.tensor().dims() != dist.tensor().dims()) {
    throw Error(Errc::kDimMismatch, "reference and distorted image differ in shape");
  }
  const FeatureStack fx = forward(bundle, dist, layer);
  const FeatureStack fy = forward(bundle, ref, layer);
  switch (metric) {
    case OqaMetric::kLp: return perceptual_loss(fx, fy);
    case OqaMetric::kLcx:
      return contextual_loss(centre_crop(fx, cfg.cx_max_side), centre_crop(fy, cfg.cx_max_side), cfg);
    case OqaMetric::kLpAtt:
    case OqaMetric::kLcxAtt: break;
  }
  const AttentionMap mu = attention_for_layer(ref, fx.height(), fx.width(), att).map;
  if (metric == OqaMetric::kLpAtt) return attentive_perceptual_loss(fx, fy, mu);
  return attentive_contextual_loss(centre_crop(fx, cfg.cx_max_side),
                                   centre_crop(fy, cfg.cx_max_side),
                                   centre_crop(mu, cfg.cx_max_side), cfg);
}

// Fits and summarizes a set of records.
inline OqaResult evaluate_records(std::vector<OqaRecord> records, std::string_view metric,
                                  std::string_view layer) {
  OqaResult res;
  res.summary.model = fit_curve(records);
  for (const auto& r : records) res.predicted.push_back(res.summary.model(r.objective));
  res.summary.metric = std::string(metric);
  res.summary.layer = std::string(layer);
  res.summary.count = records.size();
  res.summary.rmse = rmse(res.summary.model, records);
  res.summary.lcc = lcc(res.summary.model, records);
  res.summary.srocc = srocc(records);
  res.records = std::move(records);
  return res;
}

// Reads a subjective.csv with columns image_id, dmos.
inline std::map<std::string, double> read_subjective(const std::filesystem::path& path) {
  const CsvTable t = CsvTable::read(path);
  const std::size_t id = t.column("image_id"), dmos = t.column("dmos");
  std::map<std::string, double> out;
  for (const auto& row : t.rows) out[row[id]] = parse_double(row[dmos]);
  return out;
}

struct OqaOptions {
  std::string layer;
  OqaMetric metric = OqaMetric::kLp;
  LossConfig loss;
  AttentionOptions attention;
  // image_id -> DMOS. Empty means the distortion severity is the subjective
  // proxy.
  std::map<std::string, double> subjective;
  std::size_t jobs = 1;
};

// Scores every manifest row, fits the mapping and summarizes. Rows are
// reported in manifest order regardless of scheduling.
inline OqaResult run_oqa(const CorpusManifest& manifest, const WeightBundle& bundle,
                         const OqaOptions& opt) {
  if (manifest.rows.empty()) throw Error(Errc::kEmptyCorpus, "manifest has no rows");
  opt.loss.validate();
  std::vector<OqaRecord> records(manifest.rows.size());
  parallel_for(manifest.rows.size(), opt.jobs, [&](std::size_t i) {
    const ManifestRow& row = manifest.rows[i];
    const PlanarImage ref = load_image(manifest.resolve(row.ref_path));
    const PlanarImage dist = load_image(manifest.resolve(row.dist_path));
    records[i].image_id = row.image_id;
    records[i].objective =
        objective_score(ref, dist, bundle, opt.layer, opt.metric, opt.loss, opt.attention);
    if (opt.subjective.empty()) {
      records[i].subjective = row.severity;
    } else {
      const auto it = opt.subjective.find(row.image_id);
      if (it == opt.subjective.end()) {
        throw Error(Errc::kFormat, "no subjective score for " + row.image_id);
      }
      records[i].subjective = it->second;
    }
  });
  return evaluate_records(std::move(records), oqa_metric_name(opt.metric), opt.layer);
}

}  // namespace csfp
