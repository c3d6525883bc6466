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

// Synthetic distortions and distorted-corpus generation.
//
// Noise comes from SplitMix64 so corpora are reproducible bit for bit on any
// platform:
//   state += 0x9E3779B97F4A7C15
//   z = state; z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//              z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   return z ^ (z >> 31)
// A uniform double in [0,1) is (next() >> 11) * 2^-53. Standard normals use
// Box-Muller on pairs (u1, u2): r = sqrt(-2 ln(1 - u1)), z0 = r cos(2 pi u2),
// z1 = r sin(2 pi u2), consumed in that order. Pixels receive noise in
// tensor order (channel, row, column).

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "csfp/csv.hpp"
#include "csfp/error.hpp"
#include "csfp/image_io.hpp"
#include "csfp/parallel.hpp"
#include "csfp/tensor.hpp"

namespace csfp {

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

class NormalSource {
 public:
  explicit NormalSource(std::uint64_t seed) : rng_(seed) {}

  double next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = rng_.uniform();
    const double u2 = rng_.uniform();
    const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  SplitMix64 rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

enum class DistortionKind { kGaussBlur, kAwgn, kBlurPlusNoise, kDownUp };

constexpr std::string_view distortion_kind_name(DistortionKind k) {
  switch (k) {
    case DistortionKind::kGaussBlur: return "GAUSS_BLUR";
    case DistortionKind::kAwgn: return "AWGN";
    case DistortionKind::kBlurPlusNoise: return "BLUR_PLUS_NOISE";
    case DistortionKind::kDownUp: return "DOWN_UP";
  }
  return "?";
}

inline DistortionKind parse_distortion_kind(std::string_view s) {
  for (DistortionKind k : {DistortionKind::kGaussBlur, DistortionKind::kAwgn,
                           DistortionKind::kBlurPlusNoise, DistortionKind::kDownUp}) {
    if (s == distortion_kind_name(k)) return k;
  }
  throw Error(Errc::kInvalidSpec, "unknown distortion kind '" + std::string(s) + "'");
}

// For BLUR_PLUS_NOISE the severity is the blur sigma in pixels and the noise
// standard deviation is severity * kBlurNoiseRatio, so one number orders the
// whole family.
inline constexpr double kBlurNoiseRatio = 0.01;

struct DistortionSpec {
  DistortionKind kind = DistortionKind::kGaussBlur;
  double severity = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(severity > 0.0) || !std::isfinite(severity)) {
      throw Error(Errc::kInvalidSpec, "severity must be positive");
    }
    if (kind == DistortionKind::kDownUp && severity != 2.0 && severity != 3.0 &&
        severity != 4.0) {
      throw Error(Errc::kInvalidSpec, "DOWN_UP scale must be 2, 3 or 4");
    }
  }
};

// Normalized Gaussian taps for offsets -radius..radius, radius = ceil(3 sigma).
inline std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) throw Error(Errc::kInvalidSpec, "blur sigma must be positive");
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
    const double x = static_cast<double>(i);
    k[static_cast<std::size_t>(i + radius)] = std::exp(-x * x / (2.0 * sigma * sigma));
  }
  for (double v : k) total += v;
  for (double& v : k) v /= total;
  return k;
}

// Half-sample symmetric reflection: ... b a | a b c ... c | c b ...
inline std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  const auto period = static_cast<std::ptrdiff_t>(2 * n);
  std::ptrdiff_t m = i % period;
  if (m < 0) m += period;
  return static_cast<std::size_t>(m < static_cast<std::ptrdiff_t>(n) ? m : period - 1 - m);
}

inline Tensor gaussian_blur(const Tensor& img, double sigma) {
  const std::vector<double> k = gaussian_kernel(sigma);
  const auto radius = static_cast<std::ptrdiff_t>(k.size() / 2);
  const std::size_t ch = img.dim(0), h = img.dim(1), w = img.dim(2);
  Tensor tmp({ch, h, w}), out({ch, h, w});
  for (std::size_t c = 0; c < ch; ++c) {
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t x = 0; x < w; ++x) {
        double s = 0.0;
        for (std::ptrdiff_t t = -radius; t <= radius; ++t) {
          s += k[static_cast<std::size_t>(t + radius)] *
               img.at(c, r, reflect_index(static_cast<std::ptrdiff_t>(x) + t, w));
        }
        tmp.at(c, r, x) = s;
      }
    }
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t x = 0; x < w; ++x) {
        double s = 0.0;
        for (std::ptrdiff_t t = -radius; t <= radius; ++t) {
          s += k[static_cast<std::size_t>(t + radius)] *
               tmp.at(c, reflect_index(static_cast<std::ptrdiff_t>(r) + t, h), x);
        }
        out.at(c, r, x) = s;
      }
    }
  }
  return out;
}

inline Tensor add_gaussian_noise(Tensor img, double stddev, std::uint64_t seed) {
  NormalSource normal(seed);
  for (double& v : img.data()) v += stddev * normal.next();
  return img;
}

// Box average over s x s blocks (partial blocks at the border average the
// pixels they contain), then bilinear upsampling back to the input size.
inline Tensor down_up(const Tensor& img, std::size_t s) {
  const std::size_t ch = img.dim(0), h = img.dim(1), w = img.dim(2);
  const std::size_t sh = (h + s - 1) / s, sw = (w + s - 1) / s;
  Tensor out({ch, h, w});
  for (std::size_t c = 0; c < ch; ++c) {
    Tensor small({sh, sw});
    for (std::size_t r = 0; r < sh; ++r) {
      for (std::size_t x = 0; x < sw; ++x) {
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t dr = r * s; dr < std::min(h, (r + 1) * s); ++dr) {
          for (std::size_t dx = x * s; dx < std::min(w, (x + 1) * s); ++dx) {
            sum += img.at(c, dr, dx);
            ++n;
          }
        }
        small.at(r, x) = sum / static_cast<double>(n);
      }
    }
    const Tensor up = resize_bilinear(small, h, w);
    std::copy(up.data().begin(), up.data().end(), out.data().begin() + c * h * w);
  }
  return out;
}

inline PlanarImage apply(const PlanarImage& img, const DistortionSpec& spec) {
  spec.validate();
  const Tensor& t = img.tensor();
  switch (spec.kind) {
    case DistortionKind::kGaussBlur:
      return clamp_to_image(gaussian_blur(t, spec.severity), img.colorspace());
    case DistortionKind::kAwgn:
      return clamp_to_image(add_gaussian_noise(t, spec.severity, spec.seed), img.colorspace());
    case DistortionKind::kBlurPlusNoise:
      return clamp_to_image(add_gaussian_noise(gaussian_blur(t, spec.severity),
                                               spec.severity * kBlurNoiseRatio, spec.seed),
                            img.colorspace());
    case DistortionKind::kDownUp:
      return clamp_to_image(down_up(t, static_cast<std::size_t>(spec.severity)),
                            img.colorspace());
  }
  throw Error(Errc::kInvalidSpec, "unhandled distortion kind");
}

// Unsharp masking: img + amount * (img - blur(img, sigma)), clamped. Used to
// build restoration candidates that trade pixel fidelity for sharpness.
inline PlanarImage sharpen(const PlanarImage& img, double amount, double sigma = 1.0) {
  if (amount < 0.0) throw Error(Errc::kInvalidSpec, "sharpen amount must be >= 0");
  if (amount == 0.0) return img;
  const Tensor blurred = gaussian_blur(img.tensor(), sigma);
  Tensor t = img.tensor();
  for (std::size_t i = 0; i < t.size(); ++i) t[i] += amount * (t[i] - blurred[i]);
  return clamp_to_image(std::move(t), img.colorspace());
}

struct ManifestRow {
  std::string image_id;
  std::string ref_path;
  std::string dist_path;
  DistortionKind kind = DistortionKind::kGaussBlur;
  double severity = 0.0;
  std::uint64_t seed = 0;
};

// Paths in rows are stored as written in manifest.csv; relative ones are
// taken relative to base_dir, the directory holding the manifest.
struct CorpusManifest {
  std::vector<ManifestRow> rows;
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& stored) const {
    const std::filesystem::path p(stored);
    return p.is_absolute() ? p : base_dir / p;
  }

  static std::vector<std::string> header() {
    return {"image_id", "ref_path", "dist_path", "kind", "severity", "seed"};
  }

  CsvTable to_table() const {
    CsvTable t;
    t.header = header();
    for (const auto& r : rows) {
      t.rows.push_back({r.image_id, r.ref_path, r.dist_path,
                        std::string(distortion_kind_name(r.kind)),
                        format_double(r.severity), std::to_string(r.seed)});
    }
    return t;
  }

  void write(const std::filesystem::path& path) const { to_table().write(path); }

  static CorpusManifest read(const std::filesystem::path& path) {
    const CsvTable t = CsvTable::read(path);
    const std::size_t id = t.column("image_id"), ref = t.column("ref_path"),
                      dist = t.column("dist_path"), kind = t.column("kind"),
                      sev = t.column("severity"), seed = t.column("seed");
    CorpusManifest m;
    m.base_dir = path.parent_path();
    for (const auto& f : t.rows) {
      ManifestRow r;
      r.image_id = f[id];
      r.ref_path = f[ref];
      r.dist_path = f[dist];
      r.kind = parse_distortion_kind(f[kind]);
      r.severity = parse_double(f[sev]);
      try {
        r.seed = std::stoull(f[seed]);
      } catch (const std::exception&) {
        throw Error(Errc::kFormat, "bad seed '" + f[seed] + "'");
      }
      m.rows.push_back(std::move(r));
    }
    return m;
  }
};

// Sorted list of PNG files directly inside `dir`.
inline std::vector<std::filesystem::path> list_pngs(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) {
    throw Error(Errc::kIo, dir.string() + " is not a directory");
  }
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".png") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Applies every spec to every PNG in src_dir. Rows are ordered by source
// file name, then by spec order. Image k (0-based, sorted) uses seed
// spec.seed + k so sources receive different noise realizations. Stored
// paths are relative to out_dir, so the corpus directory can be moved
// together with its sources.
inline CorpusManifest make_corpus(const std::filesystem::path& src_dir,
                                  const std::vector<DistortionSpec>& specs,
                                  const std::filesystem::path& out_dir,
                                  std::size_t jobs = 1) {
  for (const auto& s : specs) s.validate();
  const auto sources = list_pngs(src_dir);
  if (sources.empty()) throw Error(Errc::kEmptyCorpus, "no PNG files in " + src_dir.string());
  if (specs.empty()) throw Error(Errc::kEmptyCorpus, "no distortion specs given");
  std::filesystem::create_directories(out_dir);

  CorpusManifest manifest;
  manifest.base_dir = out_dir;
  manifest.rows.resize(sources.size() * specs.size());
  for (std::size_t k = 0; k < sources.size(); ++k) {
    const std::string stem = sources[k].stem().string();
    for (std::size_t s = 0; s < specs.size(); ++s) {
      ManifestRow& row = manifest.rows[k * specs.size() + s];
      row.kind = specs[s].kind;
      row.severity = specs[s].severity;
      row.seed = specs[s].seed + k;
      row.image_id = stem + "__" + std::string(distortion_kind_name(row.kind)) + "_" +
                     format_double(row.severity);
      row.ref_path = std::filesystem::relative(sources[k], out_dir).generic_string();
      row.dist_path = row.image_id + ".png";
    }
  }
  parallel_for(sources.size(), jobs, [&](std::size_t k) {
    const PlanarImage ref = load_image(sources[k]);
    for (std::size_t s = 0; s < specs.size(); ++s) {
      const ManifestRow& row = manifest.rows[k * specs.size() + s];
      DistortionSpec spec = specs[s];
      spec.seed = row.seed;
      save_image(apply(ref, spec), manifest.resolve(row.dist_path));
    }
  });
  manifest.write(out_dir / "manifest.csv");
  return manifest;
}

}  // namespace csfp
