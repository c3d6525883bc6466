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

// Acceptance suite. Prints one PASS or FAIL line per criterion and exits
// nonzero when any criterion fails.
//
// usage: csfp_acceptance [path/to/csfp]
// The CLI path is needed for the determinism criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "csfp/csfp.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace {

namespace fs = std::filesystem;
using namespace csfp;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects failed checks for one criterion.
class Checker {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && failures_.size() < 3) failures_.push_back(what);
    if (!ok) ++failed_;
  }
  void note(const std::string& s) { notes_.push_back(s); }

  Outcome outcome() const {
    Outcome o;
    o.pass = failed_ == 0;
    std::string d;
    for (const auto& n : notes_) d += (d.empty() ? "" : " ") + n;
    if (failed_ > 0) {
      d += (d.empty() ? "" : " ") + std::to_string(failed_) + " failed check(s):";
      for (const auto& f : failures_) d += " [" + f + "]";
    }
    o.detail = d;
    return o;
  }

 private:
  std::size_t failed_ = 0;
  std::vector<std::string> failures_;
  std::vector<std::string> notes_;
};

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.dims() != b.dims()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

FeatureStack random_stack(std::size_t m, std::size_t h, std::size_t w, std::mt19937_64& rng,
                          double lo = -1.0, double hi = 1.0) {
  return FeatureStack{oracle::random_tensor({m, h, w}, rng, lo, hi), "rand"};
}

AttentionMap random_map(std::size_t h, std::size_t w, std::mt19937_64& rng) {
  Tensor t = oracle::random_tensor({h, w}, rng, 0.0, 1.0);
  t[rng() % t.size()] = 1.0;
  return AttentionMap(std::move(t));
}

PlanarImage crop(const PlanarImage& img, std::size_t r0, std::size_t c0, std::size_t h,
                 std::size_t w) {
  Tensor t({img.channels(), h, w});
  for (std::size_t c = 0; c < img.channels(); ++c)
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t q = 0; q < w; ++q) t.at(c, r, q) = img.tensor().at(c, r0 + r, c0 + q);
  return PlanarImage(std::move(t), img.colorspace());
}

// Reorders spatial positions: out position p holds input position perm[p].
FeatureStack permute(const FeatureStack& s, const std::vector<std::size_t>& perm) {
  const std::size_t plane = s.height() * s.width();
  Tensor t(s.tensor.dims());
  for (std::size_t c = 0; c < s.maps(); ++c)
    for (std::size_t p = 0; p < plane; ++p) t[c * plane + p] = s.tensor[c * plane + perm[p]];
  return FeatureStack{std::move(t), s.layer_name};
}

std::vector<std::string> data_names() {
  return {"astronaut", "brick", "camera", "chelsea", "coffee",
          "coins",     "grass", "gravel", "moon",    "rocket"};
}

Outcome dft_pair() {
  Checker ck;
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> side(1, 64);
  double worst_round = 0.0, worst_oracle = 0.0, lib_seconds = 0.0;
  for (int i = 0; i < 200; ++i) {
    const std::size_t m = side(rng), n = side(rng);
    const Tensor img = oracle::random_tensor({m, n}, rng);
    const auto t0 = Clock::now();
    const Spectrum spec = dft2(img);
    const Tensor back = idft2(spec);
    lib_seconds += seconds_since(t0);
    worst_round = std::max(worst_round, max_abs_diff(back, img));
    const auto ref = oracle::dft2(img);
    for (std::size_t k = 0; k < m * n; ++k) {
      worst_oracle = std::max(worst_oracle, std::abs(std::complex<double>(spec.real[k], spec.imag[k]) - ref[k]));
    }
  }
  ck.expect(worst_round < 1e-10, "round trip " + num(worst_round));
  ck.expect(worst_oracle < 1e-10, "oracle " + num(worst_oracle));
  ck.expect(lib_seconds < 10.0, "runtime " + num(lib_seconds) + " s");
  ck.note("round_trip=" + num(worst_round) + " oracle=" + num(worst_oracle) +
          " time=" + num(lib_seconds) + "s");
  return ck.outcome();
}

Outcome frequency_conversion() {
  Checker ck;
  const ViewingGeometry geom;  // 0.25 mm pitch, 550 mm distance
  const double s = geom.cycles_per_mm_to_cpd() * 1.0;
  ck.expect(std::abs(s - 9.599) <= 0.01, "1 cycle/mm -> " + num(s));
  for (std::size_t m : {1u, 7u, 64u}) {
    ck.expect(cycles_per_degree(1, 1, m, m + 3, geom) == 0.0, "DC bin nonzero");
    ck.expect(frequency_grid(m, m + 3, geom).at(0, 0) == 0.0, "DC grid nonzero");
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", s);
  ck.note(std::string("1 cycle/mm = ") + buf + " cpd");
  return ck.outcome();
}

Outcome band_purity() {
  Checker ck;
  const ViewingGeometry geom;
  const CsfBand band{2.0, 23.0};
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::size_t> side(2, 96);
  double worst_herm = 0.0;
  for (int i = 0; i < 40; ++i) {
    const std::size_t m = side(rng), n = side(rng);
    const Spectrum spec = dft2(oracle::random_tensor({m, n}, rng));
    const Spectrum once = bandpass(spec, band, geom);
    const Spectrum twice = bandpass(once, band, geom);
    const Tensor s = frequency_grid(m, n, geom);
    for (std::size_t k = 0; k < s.size(); ++k) {
      if (!band.contains(s[k])) {
        ck.expect(once.real[k] == 0.0 && once.imag[k] == 0.0, "out-of-band bin kept");
      }
    }
    ck.expect(once.real == twice.real && once.imag == twice.imag, "not idempotent");
    for (std::size_t u = 0; u < m; ++u)
      for (std::size_t v = 0; v < n; ++v) {
        const std::size_t cu = (m - u) % m, cv = (n - v) % n;
        worst_herm = std::max(worst_herm, std::abs(once.real.at(u, v) - once.real.at(cu, cv)));
        worst_herm = std::max(worst_herm, std::abs(once.imag.at(u, v) + once.imag.at(cu, cv)));
      }
  }
  ck.expect(worst_herm <= 1e-9, "hermitian " + num(worst_herm));
  ck.note("hermitian=" + num(worst_herm));
  return ck.outcome();
}

Outcome map_contract() {
  Checker ck;
  std::size_t crops = 0;
  double worst_gain = 0.0;
  for (const auto& name : data_names()) {
    const PlanarImage img = load_image(testing_paths::data(name + ".png"));
    const std::size_t offsets[5][2] = {{0, 0}, {0, 64}, {64, 0}, {64, 64}, {32, 32}};
    for (const auto& off : offsets) {
      const PlanarImage c = crop(img, off[0], off[1], 64, 64);
      const AttentionMap mu = generate_map(c);
      ck.expect(mu.tensor().max() == 1.0, name + " max != 1");
      ck.expect(mu.tensor().min() >= 0.0, name + " negative");
      Tensor third = c.tensor();
      for (double& v : third.data()) v /= 3.0;
      Tensor back = third;
      for (double& v : back.data()) v *= 3.0;
      const double d = max_abs_diff(generate_map(PlanarImage(third, c.colorspace())).tensor(),
                                    generate_map(PlanarImage(back, c.colorspace())).tensor());
      worst_gain = std::max(worst_gain, d);
      ++crops;
    }
  }
  ck.expect(crops == 50, "crop count");
  ck.expect(worst_gain <= 1e-9, "gain " + num(worst_gain));
  bool degenerate = false;
  try {
    generate_map(PlanarImage(Tensor({3, 40, 40}, 0.42), ColorSpace::kRgb));
  } catch (const Error& e) {
    degenerate = e.code() == Errc::kDegenerateInput;
  }
  ck.expect(degenerate, "constant image did not raise DegenerateInput");
  ck.note("crops=" + std::to_string(crops) + " gain=" + num(worst_gain));
  return ck.outcome();
}

Outcome loss_degeneracies() {
  Checker ck;
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> ms(1, 6), hw(1, 12);
  LossConfig cfg;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t m = ms(rng), h = hw(rng), w = hw(rng);
    const FeatureStack x = random_stack(m, h, w, rng), y = random_stack(m, h, w, rng);
    const AttentionMap ones = AttentionMap::uniform(h, w);
    worst = std::max(worst, std::abs(attentive_perceptual_loss(x, y, ones) - perceptual_loss(x, y)));
    worst = std::max(worst, std::abs(attentive_contextual_loss(x, y, ones, cfg) -
                                     contextual_loss(x, y, cfg)));
  }
  ck.expect(worst <= 1e-12, "uniform map " + num(worst));

  const WeightBundle net = load_weights(testing_paths::fixture("vgg_tiny.cnnw"));
  const PlanarImage gt = load_image(testing_paths::fixture("golden_camera_64.png"));
  const PlanarImage out = apply(gt, DistortionSpec{DistortionKind::kGaussBlur, 1.5, 0});
  LossConfig one;
  one.alpha = 1.0;
  for (LossKind k : {LossKind::kP, LossKind::kPAtt, LossKind::kCx, LossKind::kCxAtt}) {
    const LossReport r = combined_loss(gt, out, net, "relu2_2", one, k);
    ck.expect(r.combined == r.l2, "alpha=1 differs from l2 for " + std::string(loss_kind_name(k)));
  }
  const LossReport same = combined_loss(gt, gt, net, "relu2_2", cfg, LossKind::kPAtt);
  ck.expect(same.l_p == 0.0 && same.l_p_att == 0.0, "identical images give nonzero loss");
  ck.note("uniform_map=" + num(worst));
  return ck.outcome();
}

Outcome oracle_equivalence() {
  Checker ck;
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> ms(1, 4), hw(1, 16);
  double worst = 0.0;
  for (int i = 0; i < 60; ++i) {
    const std::size_t m = ms(rng), h = hw(rng), w = hw(rng);
    const FeatureStack x = random_stack(m, h, w, rng), y = random_stack(m, h, w, rng);
    const AttentionMap mu = random_map(h, w, rng);
    worst = std::max(worst, std::abs(perceptual_loss(x, y) - oracle::perceptual(x.tensor, y.tensor)));
    worst = std::max(worst, std::abs(attentive_perceptual_loss(x, y, mu) -
                                     oracle::perceptual(x.tensor, y.tensor, &mu.tensor())));
    for (DistanceKind dk : {DistanceKind::kCosine, DistanceKind::kL2}) {
      LossConfig cfg;
      cfg.distance_kind = dk;
      cfg.cx_bandwidth_h = 0.2 + 0.1 * (i % 5);
      const bool cosine = dk == DistanceKind::kCosine;
      const double ref = oracle::contextual(x.tensor, y.tensor, cfg.cx_bandwidth_h, cfg.cx_epsilon, cosine);
      worst = std::max(worst, std::abs(contextual_loss(x, y, cfg) - std::max(0.0, ref)));
      const FeatureStack wx = weight_stack(x, mu), wy = weight_stack(y, mu);
      const double wref = oracle::contextual(wx.tensor, wy.tensor, cfg.cx_bandwidth_h, cfg.cx_epsilon, cosine);
      worst = std::max(worst, std::abs(attentive_contextual_loss(x, y, mu, cfg) - std::max(0.0, wref)));
    }
  }
  ck.expect(worst < 1e-10, "loss oracle " + num(worst));

  double worst_conv = 0.0;
  std::uniform_int_distribution<std::size_t> ch(1, 4), ks(1, 5), st(1, 2), pd(0, 2), sz(5, 14);
  for (int i = 0; i < 40; ++i) {
    Conv2dParams p;
    p.in_ch = ch(rng);
    p.out_ch = ch(rng);
    p.kh = ks(rng);
    p.kw = ks(rng);
    p.stride = st(rng);
    p.padding = pd(rng);
    p.weights = oracle::random_tensor({p.out_ch, p.in_ch, p.kh, p.kw}, rng, -1, 1);
    p.bias = oracle::random_tensor({p.out_ch}, rng, -1, 1);
    WeightBundle b;
    b.input_channels = 3;
    Conv2dParams first = p;
    first.in_ch = 3;
    first.weights = oracle::random_tensor({p.in_ch, 3, 3, 3}, rng, -1, 1);
    first.out_ch = p.in_ch;
    first.kh = first.kw = 3;
    first.stride = 1;
    first.padding = 1;
    first.bias = oracle::random_tensor({p.in_ch}, rng, -1, 1);
    b.layers.push_back({LayerKind::kConv2d, "conv_a", first});
    b.layers.push_back({LayerKind::kRelu, "relu_a", std::nullopt});
    b.layers.push_back({LayerKind::kConv2d, "conv_b", p});
    b.validate();
    const Tensor x = oracle::random_tensor({3, sz(rng), sz(rng)}, rng);
    Tensor mid = oracle::conv2d(x, first.weights, first.bias, 1, 1);
    for (double& v : mid.data()) v = std::max(v, 0.0);
    const Tensor ref = oracle::conv2d(mid, p.weights, p.bias, p.stride, p.padding);
    worst_conv = std::max(worst_conv, max_abs_diff(forward_tensor(b, x, "conv_b").tensor, ref));
  }
  ck.expect(worst_conv < 1e-10, "convolution " + num(worst_conv));
  ck.note("losses=" + num(worst) + " conv=" + num(worst_conv));
  return ck.outcome();
}

Outcome contextual_properties() {
  Checker ck;
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<std::size_t> ms(1, 8), hw(1, 4);
  double worst_self = 0.0;
  std::size_t single_channel = 0;
  for (int i = 0; i < 200; ++i) {
    const std::size_t m = ms(rng), h = hw(rng), w = hw(rng);
    const FeatureStack x = random_stack(m, h, w, rng), y = random_stack(m, h, w, rng);
    for (DistanceKind dk : {DistanceKind::kCosine, DistanceKind::kL2}) {
      LossConfig cfg;
      cfg.distance_kind = dk;
      ck.expect(contextual_loss(x, y, cfg) >= 0.0, "negative loss");
      cfg.cx_bandwidth_h = 0.01;
      const double self = contextual_loss(x, x, cfg);
      // With one channel the centred cosine of any two positions is +-1, so
      // same-sign positions cannot be told apart and the self loss is log(k).
      if (dk == DistanceKind::kCosine && m == 1) {
        ++single_channel;
      } else {
        worst_self = std::max(worst_self, self);
        ck.expect(self < 0.01, "self loss " + num(self));
      }

      std::vector<std::size_t> perm(h * w);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      cfg.cx_bandwidth_h = 0.5;
      const double base = contextual_loss(x, y, cfg);
      ck.expect(contextual_loss(permute(x, perm), permute(y, perm), cfg) == base, "joint permutation");
      ck.expect(contextual_loss(x, permute(y, perm), cfg) == base, "y permutation");
    }
  }
  ck.note("max_self_loss=" + num(worst_self) + " cosine_single_channel_skipped=" +
          std::to_string(single_channel));
  return ck.outcome();
}

// Builds a blur corpus from crops of the named sources.
CorpusManifest blur_corpus(const fs::path& root, const std::vector<std::string>& names,
                           std::size_t side, const std::vector<double>& sigmas) {
  fs::create_directories(root / "src");
  for (const auto& name : names) {
    const PlanarImage img = load_image(testing_paths::data(name + ".png"));
    const std::size_t off = (img.height() - side) / 2;
    save_image(crop(img, off, off, side, side), root / "src" / (name + ".png"));
  }
  std::vector<DistortionSpec> specs;
  for (double s : sigmas) specs.push_back({DistortionKind::kGaussBlur, s, 0});
  return make_corpus(root / "src", specs, root / "corpus", 4);
}

Outcome oqa_protocol() {
  Checker ck;
  const auto t0 = Clock::now();
  TempDir dir;
  std::vector<double> sigmas;
  for (int k = 1; k <= 12; ++k) sigmas.push_back(0.5 * k);
  const CorpusManifest manifest = blur_corpus(dir.path(), {"camera"}, 96, sigmas);
  ck.expect(manifest.rows.size() == 12, "corpus size");
  const WeightBundle net = load_weights(testing_paths::fixture("vgg_tiny.cnnw"));
  ck.expect(fs::file_size(testing_paths::fixture("vgg_tiny.cnnw")) < 5u * 1024 * 1024, "bundle size");
  OqaOptions opt;
  opt.layer = "relu2_2";
  opt.jobs = 4;
  opt.metric = OqaMetric::kLp;
  const double s_p = run_oqa(manifest, net, opt).summary.srocc;
  opt.metric = OqaMetric::kLpAtt;
  const double s_att = run_oqa(manifest, net, opt).summary.srocc;
  ck.expect(s_p == 1.0, "srocc(l_p)=" + num(s_p));
  ck.expect(s_att == 1.0, "srocc(l_p_att)=" + num(s_att));

  const FitModel truth{{4.0, 3.0, 0.5, 0.2, 1.0}};
  std::vector<OqaRecord> recs;
  for (int i = 0; i < 25; ++i) {
    const double x = -1.0 + 0.1 * i;
    recs.push_back({"s" + std::to_string(i), x, truth(x)});
  }
  const double fit_rmse = rmse(fit_curve(recs), recs);
  ck.expect(fit_rmse < 1e-6, "fit rmse " + num(fit_rmse));

  // Ranks {1, 2.5, 2.5, 4, 5} against {2, 1, 3, 5, 4}.
  std::vector<OqaRecord> ties;
  const double obj[] = {1, 2, 2, 3, 4}, subj[] = {2, 1, 3, 5, 4};
  for (int i = 0; i < 5; ++i) ties.push_back({"t" + std::to_string(i), obj[i], subj[i]});
  ck.expect(srocc(ties) == 7.0 / std::sqrt(95.0), "tied spearman");

  const double secs = seconds_since(t0);
  ck.expect(secs < 60.0, "runtime " + num(secs) + " s");
  ck.note("srocc_p=" + num(s_p) + " srocc_p_att=" + num(s_att) + " fit_rmse=" + num(fit_rmse) +
          " time=" + num(secs) + "s");
  return ck.outcome();
}

// Reported only: the bundled network has random weights, so the ordering of
// the two correlations is informative at best.
Outcome attention_direction() {
  Checker ck;
  TempDir dir;
  const CorpusManifest manifest = blur_corpus(dir.path(), data_names(), 96, {0.8, 1.6, 3.2});
  const WeightBundle net = load_weights(testing_paths::fixture("vgg_tiny.cnnw"));
  OqaOptions opt;
  opt.layer = "relu2_2";
  opt.jobs = 4;
  opt.metric = OqaMetric::kLp;
  const double s_p = run_oqa(manifest, net, opt).summary.srocc;
  opt.metric = OqaMetric::kLpAtt;
  const double s_att = run_oqa(manifest, net, opt).summary.srocc;
  ck.note("reported only: n=" + std::to_string(manifest.rows.size()) + " srocc_p=" + num(s_p) +
          " srocc_p_att=" + num(s_att) + (s_att >= s_p ? " (attentive >= plain)" : " (attentive < plain)"));
  return ck.outcome();
}

// Byte comparison of every file under two directories.
bool same_tree(const fs::path& a, const fs::path& b, std::string& why) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), a));
  }
  std::size_t count_b = 0;
  for (const auto& e : fs::recursive_directory_iterator(b)) count_b += e.is_regular_file();
  if (files.size() != count_b) {
    why = "file counts differ";
    return false;
  }
  for (const auto& f : files) {
    if (!fs::exists(b / f) || read_file(a / f) != read_file(b / f)) {
      why = f.string() + " differs";
      return false;
    }
  }
  return true;
}

Outcome determinism(const std::string& cli) {
  Checker ck;
  if (cli.empty() || !fs::exists(cli)) {
    ck.expect(false, "CLI path not given or missing");
    return ck.outcome();
  }
  TempDir dir;
  const std::string data = testing_paths::source().string() + "/data";
  const std::string fix = testing_paths::source().string() + "/fixtures";
  const std::string q = "'" + cli + "'";
  const std::vector<std::string> commands = {
      q + " map '" + data + "/camera.png' -o map > map.txt",
      q + " corpus -s '" + data + "' -o corpus --spec AWGN:0.05 --spec BLUR_PLUS_NOISE:1.5 "
          "--spec DOWN_UP:2 --seed 7 -j 4 > corpus.txt",
      q + " oqa -m corpus/manifest.csv -w '" + fix + "/vgg_tiny.cnnw' -l relu2_2 -o oqa -j 4 > oqa.txt",
      q + " loss '" + data + "/camera.png' corpus/camera__AWGN_0.05.png -w '" + fix +
          "/vgg_tiny.cnnw' -l relu2_2 -k CX_ATT --header > loss.txt",
      q + " tradeoff '" + fix + "/golden_camera_64.png' -w '" + fix +
          "/vgg_tiny.cnnw' -l relu2_2 --alphas 0.3,0.9 -o tradeoff.csv --svg tradeoff.svg > tradeoff.txt",
  };
  for (const char* run : {"a", "b"}) {
    const fs::path where = dir.path() / run;
    fs::create_directories(where);
    for (const auto& c : commands) {
      const int rc = std::system(("cd '" + where.string() + "' && " + c).c_str());
      ck.expect(rc == 0, "command failed: " + c.substr(0, 60));
    }
  }
  std::string why;
  ck.expect(same_tree(dir.path() / "a", dir.path() / "b", why), why);
  ck.note("commands=" + std::to_string(commands.size()));
  return ck.outcome();
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? fs::absolute(argv[1]).string() : "";
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"dft_pair", dft_pair},
      {"frequency_conversion", frequency_conversion},
      {"band_purity", band_purity},
      {"map_contract", map_contract},
      {"loss_degeneracies", loss_degeneracies},
      {"oracle_equivalence", oracle_equivalence},
      {"contextual_properties", contextual_properties},
      {"oqa_protocol", oqa_protocol},
      {"attention_direction", attention_direction},
      {"determinism", [&] { return determinism(cli); }},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
