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

// csfp: attention maps, perceptual losses, distortion corpora and quality
// assessment from the command line.
//
// Exit codes: 0 success, 1 internal error, 2 input or configuration error,
// 3 degenerate attention map (map without --fallback-uniform), 4 empty corpus.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "csfp/csfp.hpp"
#include "svg_chart.hpp"

namespace fs = std::filesystem;

namespace csfp::cli {
namespace {

struct MapFlags {
  double pitch = 0.25;
  double distance = 550.0;
  double s_low = 2.0;
  double s_high = 23.0;
  bool no_fold = false;

  MapOptions options() const {
    MapOptions o;
    o.geometry = ViewingGeometry{pitch, distance};
    o.band = CsfBand{s_low, s_high};
    o.folding = no_fold ? FrequencyFolding::kLiteral : FrequencyFolding::kFolded;
    o.geometry.validate();
    o.band.validate();
    return o;
  }
};

void add_map_flags(CLI::App* sub, MapFlags& f) {
  sub->add_option("--pitch", f.pitch, "Display dot pitch in mm")->group("Viewing");
  sub->add_option("--distance", f.distance, "Viewing distance in mm")->group("Viewing");
  sub->add_option("--s-low", f.s_low, "Lower band edge in cycles/degree")->group("Viewing");
  sub->add_option("--s-high", f.s_high, "Upper band edge in cycles/degree")->group("Viewing");
  sub->add_flag("--no-fold", f.no_fold,
                "Use raw DFT indices above Nyquist instead of folded frequencies")
      ->group("Viewing");
}

struct LossFlags {
  std::string weights;
  std::string layer;
  double alpha = 0.5;
  double h = 0.5;
  double epsilon = 1e-5;
  std::string distance = "cosine";
  std::size_t cx_max_side = 64;
  bool uniform_map = false;

  LossConfig config() const {
    LossConfig c;
    c.alpha = alpha;
    c.cx_bandwidth_h = h;
    c.cx_epsilon = epsilon;
    c.cx_max_side = cx_max_side;
    if (distance == "cosine") {
      c.distance_kind = DistanceKind::kCosine;
    } else if (distance == "l2") {
      c.distance_kind = DistanceKind::kL2;
    } else {
      throw Error(Errc::kInvalidValue, "--cx-distance must be cosine or l2");
    }
    c.validate();
    return c;
  }
};

void add_loss_flags(CLI::App* sub, LossFlags& f, bool with_alpha) {
  sub->add_option("-w,--weights", f.weights, "CNNW weight bundle")->required();
  sub->add_option("-l,--layer", f.layer, "Layer whose activations are compared")->required();
  if (with_alpha) sub->add_option("--alpha", f.alpha, "Weight of the pixel l2 term");
  sub->add_option("--cx-h", f.h, "Contextual loss bandwidth h")->group("Contextual");
  sub->add_option("--cx-epsilon", f.epsilon, "Contextual loss epsilon")->group("Contextual");
  sub->add_option("--cx-distance", f.distance, "Contextual feature distance: cosine or l2")
      ->group("Contextual");
  sub->add_option("--cx-max-side", f.cx_max_side,
                  "Centre-crop features to at most this many rows/columns")
      ->group("Contextual");
  sub->add_flag("--uniform-map", f.uniform_map, "Replace the attention map by mu = 1");
}

AttentionOptions attention(const LossFlags& lf, const MapFlags& mf) {
  AttentionOptions a;
  a.map = mf.options();
  a.uniform = lf.uniform_map;
  return a;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// ---- map -------------------------------------------------------------------

struct MapArgs {
  std::string input;
  std::string out_dir = ".";
  bool fallback_uniform = false;
  MapFlags map;
};

int run_map(const MapArgs& a) {
  const PlanarImage img = load_image(a.input);
  const MapOptions opt = a.map.options();
  AttentionMap mu = AttentionMap::uniform(img.height(), img.width());
  bool fallback = false;
  try {
    mu = generate_map(img, opt);
  } catch (const Error& e) {
    if (e.code() != Errc::kDegenerateInput || !a.fallback_uniform) throw;
    fallback = true;
  }
  fs::create_directories(a.out_dir);
  const std::string stem = fs::path(a.input).stem().string();
  const fs::path png = fs::path(a.out_dir) / (stem + "_map.png");
  const fs::path tnsr = fs::path(a.out_dir) / (stem + "_map.tnsr");
  const Bytes bytes = encode_tnsr(mu.tensor());
  write_file(tnsr, bytes);
  save_image(map_to_image(mu), png);

  const auto values = mu.tensor().data();
  const double mean =
      order_free_sum(std::vector<double>(values.begin(), values.end())) / static_cast<double>(values.size());
  std::cout << "min=" << format_double(mu.tensor().min()) << " max=" << format_double(mu.tensor().max())
            << " mean=" << format_double(mean) << "\n";
  std::cout << "folding=" << (a.map.no_fold ? "literal" : "folded") << " fallback=" << (fallback ? 1 : 0)
            << "\n";
  std::cout << "tnsr=" << tnsr.generic_string() << " fnv1a64=" << hex64(fnv1a64(bytes)) << "\n";
  std::cout << "png=" << png.generic_string() << "\n";
  return 0;
}

// ---- loss ------------------------------------------------------------------

struct LossArgs {
  std::string ref;
  std::string dist;
  std::string kind = "P";
  bool header = false;
  LossFlags loss;
  MapFlags map;
};

int run_loss(const LossArgs& a) {
  const PlanarImage gt = load_image(a.ref);
  const PlanarImage out = load_image(a.dist);
  const WeightBundle bundle = load_weights(a.loss.weights);
  const LossReport r = combined_loss(gt, out, bundle, a.loss.layer, a.loss.config(),
                                     parse_loss_kind(a.kind), attention(a.loss, a.map));
  if (a.header) std::cout << join_row(loss_csv_header()) << "\n";
  std::cout << join_row(loss_csv_fields(r, fs::path(a.dist).stem().string())) << "\n";
  return 0;
}

// ---- corpus ----------------------------------------------------------------

struct CorpusArgs {
  std::string src;
  std::string out;
  std::vector<std::string> specs;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
};

// KIND:s1,s2,... -> one spec per severity.
std::vector<DistortionSpec> parse_specs(const std::vector<std::string>& items, std::uint64_t seed) {
  std::vector<DistortionSpec> out;
  for (const std::string& item : items) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      throw Error(Errc::kInvalidSpec, "spec '" + item + "' is not KIND:SEVERITY[,SEVERITY...]");
    }
    const DistortionKind kind = parse_distortion_kind(item.substr(0, colon));
    for (const std::string& sev : split_row(item.substr(colon + 1))) {
      DistortionSpec s{kind, parse_double(sev), seed};
      s.validate();
      out.push_back(s);
    }
  }
  return out;
}

int run_corpus(const CorpusArgs& a) {
  const CorpusManifest m = make_corpus(a.src, parse_specs(a.specs, a.seed), a.out, a.jobs);
  std::cout << "rows=" << m.rows.size() << " manifest=" << (fs::path(a.out) / "manifest.csv").generic_string()
            << "\n";
  return 0;
}

// ---- oqa -------------------------------------------------------------------

struct OqaArgs {
  std::string manifest;
  std::string subjective;
  std::string out_dir = ".";
  std::vector<std::string> metrics{"l_p", "l_p_att"};
  std::size_t jobs = 1;
  LossFlags loss;
  MapFlags map;
};

int run_oqa_cmd(const OqaArgs& a) {
  const CorpusManifest manifest = CorpusManifest::read(a.manifest);
  if (manifest.rows.empty()) throw Error(Errc::kEmptyCorpus, a.manifest + " has no rows");
  const WeightBundle bundle = load_weights(a.loss.weights);
  OqaOptions opt;
  opt.layer = a.loss.layer;
  opt.loss = a.loss.config();
  opt.attention = attention(a.loss, a.map);
  opt.jobs = a.jobs;
  if (!a.subjective.empty()) opt.subjective = read_subjective(a.subjective);

  fs::create_directories(a.out_dir);
  CsvTable summary;
  for (const std::string& name : a.metrics) {
    opt.metric = parse_oqa_metric(name);
    const OqaResult res = run_oqa(manifest, bundle, opt);
    res.scores_table().write(fs::path(a.out_dir) / ("oqa_scores_" + name + ".csv"));
    const CsvTable row = res.summary_table();
    summary.header = row.header;
    summary.rows.push_back(row.rows.front());
  }
  summary.write(fs::path(a.out_dir) / "oqa_summary.csv");
  std::cout << summary.to_string();
  return 0;
}

// ---- tradeoff --------------------------------------------------------------

struct TradeoffArgs {
  std::string ref;
  std::string kind = "P_ATT";
  std::vector<double> alphas{0.1, 0.3, 0.5, 0.7, 0.9};
  std::vector<double> amounts{0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0};
  double scale = 2.0;
  std::string out;
  std::string svg;
  LossFlags loss;
  MapFlags map;
};

// Restoration candidates are the down/up-sampled reference sharpened by
// increasing amounts. For every alpha the candidate with the lowest combined
// loss is reported with its distortion metrics.
int run_tradeoff(const TradeoffArgs& a) {
  const PlanarImage gt = load_image(a.ref);
  const WeightBundle bundle = load_weights(a.loss.weights);
  const LossKind kind = parse_loss_kind(a.kind);
  LossConfig cfg = a.loss.config();
  if (a.alphas.empty() || a.amounts.empty()) {
    throw Error(Errc::kInvalidValue, "--alphas and --amounts must not be empty");
  }
  for (double alpha : a.alphas) {
    LossConfig check = cfg;
    check.alpha = alpha;
    check.validate();
  }
  const PlanarImage degraded = apply(gt, DistortionSpec{DistortionKind::kDownUp, a.scale, 0});

  struct Candidate {
    double amount;
    LossReport report;
    double ssim;
    double psnr;
  };
  std::vector<Candidate> cands;
  for (double amount : a.amounts) {
    const PlanarImage img = sharpen(degraded, amount);
    Candidate c{amount, combined_loss(gt, img, bundle, a.loss.layer, cfg, kind, attention(a.loss, a.map)),
                ssim(gt, img), std::numeric_limits<double>::infinity()};
    try {
      c.psnr = psnr(gt, img);
    } catch (const Error& e) {
      if (e.code() != Errc::kIdenticalImages) throw;
    }
    cands.push_back(c);
  }

  CsvTable table;
  table.header = {"alpha", "ssim", "psnr", "l_p", "l_p_att", "l_cx", "l_cx_att",
                  "kind", "sharpen", "combined"};
  std::vector<double> ssims, selected;
  for (double alpha : a.alphas) {
    const Candidate* best = nullptr;
    double best_value = 0.0;
    for (const Candidate& c : cands) {
      const double v = alpha * c.report.l2 + (1.0 - alpha) * c.report.selected();
      if (best == nullptr || v < best_value) {
        best = &c;
        best_value = v;
      }
    }
    const LossReport& r = best->report;
    table.rows.push_back({format_double(alpha), format_double(best->ssim), format_double(best->psnr),
                          format_double(r.l_p), format_double(r.l_p_att), format_double(r.l_cx),
                          format_double(r.l_cx_att), std::string(loss_kind_name(kind)),
                          format_double(best->amount), format_double(best_value)});
    ssims.push_back(best->ssim);
    selected.push_back(r.selected());
  }
  if (a.out.empty()) {
    std::cout << table.to_string();
  } else {
    table.write(a.out);
  }
  if (!a.svg.empty()) {
    const std::string chart = svg::line_chart(
        "Trade-off for " + fs::path(a.ref).filename().string(), "alpha", a.alphas,
        {{"SSIM", "#1f77b4", ssims}, {std::string(loss_kind_name(kind)) + " loss", "#d62728", selected}});
    std::ofstream f(a.svg, std::ios::binary | std::ios::trunc);
    if (!(f << chart)) throw Error(Errc::kIo, "cannot write " + a.svg);
  }
  return 0;
}

// ---- layers ----------------------------------------------------------------

int run_layers(const std::string& weights) {
  const WeightBundle bundle = load_weights(weights);
  CsvTable t;
  t.header = {"index", "name", "kind", "out_channels"};
  const auto layers = list_layers(bundle);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    t.rows.push_back({std::to_string(i), layers[i].name, std::string(layer_kind_name(layers[i].kind)),
                      std::to_string(layers[i].out_channels)});
  }
  std::cout << t.to_string();
  return 0;
}

int exit_code(Errc code) {
  switch (code) {
    case Errc::kDegenerateInput: return 3;
    case Errc::kEmptyCorpus: return 4;
    default: return 2;
  }
}

int main_impl(int argc, char** argv) {
  CLI::App app{"Contrast-sensitivity attention maps and perceptual image losses", "csfp"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_version_flag("--version", "csfp 0.1.0");

  MapArgs map_args;
  auto* map = app.add_subcommand("map", "Compute the attention map of an image");
  map->add_option("image", map_args.input, "Input PNG")->required();
  map->add_option("-o,--out-dir", map_args.out_dir, "Directory for <stem>_map.png/.tnsr");
  map->add_flag("--fallback-uniform", map_args.fallback_uniform,
                "Write mu = 1 instead of failing when the band-limited image is zero");
  add_map_flags(map, map_args.map);

  LossArgs loss_args;
  auto* loss = app.add_subcommand("loss", "Print the loss family for a reference/output pair as CSV");
  loss->add_option("reference", loss_args.ref, "Ground-truth PNG")->required();
  loss->add_option("output", loss_args.dist, "Restored or distorted PNG")->required();
  loss->add_option("-k,--kind", loss_args.kind, "Loss combined with l2: P, P_ATT, CX, CX_ATT");
  loss->add_flag("--header", loss_args.header, "Print the CSV header line first");
  add_loss_flags(loss, loss_args.loss, true);
  add_map_flags(loss, loss_args.map);

  std::size_t jobs = 1;
  CorpusArgs corpus_args;
  auto* corpus = app.add_subcommand("corpus", "Synthesize a distorted corpus and manifest.csv");
  corpus->add_option("-s,--src", corpus_args.src, "Directory of reference PNGs")->required();
  corpus->add_option("-o,--out", corpus_args.out, "Output directory")->required();
  corpus->add_option("--spec", corpus_args.specs,
                     "KIND:SEV[,SEV...] with KIND in GAUSS_BLUR, AWGN, BLUR_PLUS_NOISE, DOWN_UP")
      ->required();
  corpus->add_option("--seed", corpus_args.seed, "Base noise seed; image k uses seed + k");
  corpus->add_option("-j,--jobs", jobs, "Worker threads")->envname("CSFP_JOBS")->check(CLI::Range(1, 1024));

  OqaArgs oqa_args;
  auto* oqa = app.add_subcommand("oqa", "Fit and score objective metrics against subjective scores");
  oqa->add_option("-m,--manifest", oqa_args.manifest, "Corpus manifest.csv")->required();
  oqa->add_option("--subjective", oqa_args.subjective,
                  "CSV with image_id,dmos (default: severity is the subjective proxy)");
  oqa->add_option("--metric", oqa_args.metrics, "Metrics: l_p, l_p_att, l_cx, l_cx_att");
  oqa->add_option("-o,--out-dir", oqa_args.out_dir, "Directory for oqa_summary.csv and score tables");
  oqa->add_option("-j,--jobs", jobs, "Worker threads")->envname("CSFP_JOBS")->check(CLI::Range(1, 1024));
  add_loss_flags(oqa, oqa_args.loss, false);
  add_map_flags(oqa, oqa_args.map);

  TradeoffArgs tr_args;
  auto* tradeoff = app.add_subcommand("tradeoff", "Tabulate distortion metrics and losses per alpha");
  tradeoff->add_option("reference", tr_args.ref, "Ground-truth PNG")->required();
  tradeoff->add_option("-k,--kind", tr_args.kind, "Loss combined with l2: P, P_ATT, CX, CX_ATT");
  tradeoff->add_option("--alphas", tr_args.alphas, "Alpha values to sweep")->delimiter(',');
  tradeoff->add_option("--amounts", tr_args.amounts, "Unsharp-mask amounts of the candidates")->delimiter(',');
  tradeoff->add_option("--scale", tr_args.scale, "Down/up-sampling factor of the degraded input (2, 3 or 4)");
  tradeoff->add_option("-o,--out", tr_args.out, "CSV output path (default: stdout)");
  tradeoff->add_option("--svg", tr_args.svg, "Also write an SVG line chart");
  add_loss_flags(tradeoff, tr_args.loss, false);
  add_map_flags(tradeoff, tr_args.map);

  std::string layers_weights;
  auto* layers = app.add_subcommand("layers", "List the layers of a weight bundle");
  layers->add_option("-w,--weights", layers_weights, "CNNW weight bundle")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*map) return run_map(map_args);
    if (*loss) return run_loss(loss_args);
    if (*corpus) {
      corpus_args.jobs = jobs;
      return run_corpus(corpus_args);
    }
    if (*oqa) {
      oqa_args.jobs = jobs;
      return run_oqa_cmd(oqa_args);
    }
    if (*tradeoff) return run_tradeoff(tr_args);
    if (*layers) return run_layers(layers_weights);
  } catch (const Error& e) {
    std::cerr << "csfp: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "csfp: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "csfp: internal error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace
}  // namespace csfp::cli

int main(int argc, char** argv) { return csfp::cli::main_impl(argc, argv); }
