// fest: synthetic-scene generation, multi-scale fusion, dual-threshold
// post-processing, and detection-metric evaluation from the command line.
//
// Subcommands: synth, fuse, post, eval, sweep, roc, train-toy, grid.
// Every subcommand is a thin composition of library calls; all tabular
// output is RFC-4180 CSV. Percent-style columns (iou, pd, score) are
// written as value*100 with two decimals, fa is written in 1e-6 units to
// match the usual reporting convention for false-alarm rates.

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fest/fest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

void parallel_for(std::size_t n, int jobs,
                  const std::function<void(std::size_t)>& fn) {
  const int workers = std::max(
      1, std::min<int>(jobs, static_cast<int>(n == 0 ? 1 : n)));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) break;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::vector<double> parse_double_list(const std::string& text,
                                      const std::string& flag) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw std::runtime_error(flag + ": cannot parse '" + item + "'");
    }
  }
  if (values.empty()) throw std::runtime_error(flag + ": empty list");
  return values;
}

std::vector<int> parse_int_list(const std::string& text,
                                const std::string& flag) {
  std::vector<int> values;
  for (double v : parse_double_list(text, flag)) {
    values.push_back(static_cast<int>(v));
  }
  return values;
}

std::pair<int, int> parse_hw(const std::string& text) {
  const auto x = text.find('x');
  if (x == std::string::npos) {
    throw std::runtime_error("--hw: expected HEIGHTxWIDTH, got '" + text + "'");
  }
  return {std::stoi(text.substr(0, x)), std::stoi(text.substr(x + 1))};
}

std::pair<double, double> parse_range(const std::string& text,
                                      const std::string& flag) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    throw std::runtime_error(flag + ": expected LO:HI, got '" + text + "'");
  }
  return {std::stod(text.substr(0, colon)), std::stod(text.substr(colon + 1))};
}

std::vector<fest::PeakBand> parse_peak_bands(const std::string& text) {
  std::vector<fest::PeakBand> bands;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto a = item.find(':');
    const auto b = item.rfind(':');
    if (a == std::string::npos || b == a) {
      throw std::runtime_error("--peak-bands: expected LO:HI:WEIGHT, got '" +
                               item + "'");
    }
    bands.push_back(fest::PeakBand{std::stod(item.substr(0, a)),
                                   std::stod(item.substr(a + 1, b - a - 1)),
                                   std::stod(item.substr(b + 1))});
  }
  if (bands.empty()) throw std::runtime_error("--peak-bands: empty list");
  return bands;
}

std::vector<fs::path> list_pgm_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw std::runtime_error("not a directory: " + dir.string());
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pgm") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    throw std::runtime_error("no .pgm files in " + dir.string());
  }
  return files;
}

struct PairedFiles {
  std::vector<std::string> ids;
  std::vector<fs::path> first;
  std::vector<fs::path> second;
};

PairedFiles pair_by_filename(const fs::path& first_dir,
                             const fs::path& second_dir) {
  PairedFiles out;
  for (const fs::path& f : list_pgm_files(first_dir)) {
    const fs::path partner = second_dir / f.filename();
    if (!fs::exists(partner)) {
      throw std::runtime_error("missing counterpart for " +
                               f.filename().string() + " in " +
                               second_dir.string());
    }
    out.ids.push_back(f.stem().string());
    out.first.push_back(f);
    out.second.push_back(partner);
  }
  return out;
}

struct LoadedDataset {
  std::vector<std::string> ids;
  std::vector<fest::ProbMask> probs;
  std::vector<fest::BinaryMask> gts;
};

LoadedDataset load_prob_gt(const fs::path& prob_dir, const fs::path& gt_dir,
                           int jobs) {
  const PairedFiles files = pair_by_filename(prob_dir, gt_dir);
  LoadedDataset data;
  data.ids = files.ids;
  data.probs.resize(files.first.size());
  data.gts.resize(files.first.size());
  parallel_for(files.first.size(), jobs, [&](std::size_t i) {
    data.probs[i] = fest::read_prob_mask(files.first[i]);
    data.gts[i] = fest::read_binary_mask(files.second[i]);
  });
  return data;
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

// Flat key=value config file with '#' comments; values fill in options the
// command line left unset, so explicit flags always win.
void apply_config_file(CLI::App* sub, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    CLI::Option* op = sub->get_option_no_throw("--" + key);
    if (op == nullptr) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": unknown key '" + key + "'");
    }
    if (op->count() > 0) continue;
    op->add_result(value);
    op->run_callback();
  }
}

void require_option(const std::string& value, const std::string& flag) {
  if (value.empty()) {
    throw std::runtime_error(flag + " is required (flag or config file)");
  }
}

std::string pct(double ratio) { return fest::format_fixed(ratio * 100.0, 2); }
std::string fa_e6(double fa) { return fest::format_fixed(fa * 1e6, 2); }

std::string score_field(const fest::ScoreResult& s) {
  return s.valid ? pct(*s.value) : std::string{};
}

fest::FusionMode parse_mode(const std::string& name) {
  if (name == "mean") return fest::FusionMode::mean;
  if (name == "max") return fest::FusionMode::max;
  throw std::runtime_error("unknown fusion mode: " + name);
}

fest::InjectionStyle parse_injection(const std::string& name) {
  if (name == "single") return fest::InjectionStyle::single_pixel;
  if (name == "cross") return fest::InjectionStyle::cross3;
  throw std::runtime_error("unknown injection style: " + name);
}

fest::Connectivity parse_connectivity(int value) {
  if (value == 4) return fest::Connectivity::four;
  if (value == 8) return fest::Connectivity::eight;
  throw std::runtime_error("connectivity must be 4 or 8");
}

// Post-processing shared by sweep/grid/eval paths: plain threshold when no
// low threshold is given, dual-threshold otherwise.
fest::BinaryMask postprocess(const fest::ProbMask& prob, double th1,
                             std::optional<double> th2,
                             fest::InjectionStyle injection) {
  if (!th2) return fest::binarize(prob, th1);
  return fest::apply_as(prob, fest::ASConfig{th1, *th2, injection}).mask;
}

std::vector<fest::ImageTally> tally_all(const std::vector<fest::BinaryMask>& preds,
                                        const std::vector<fest::BinaryMask>& gts,
                                        const fest::MatchConfig& cfg, int jobs) {
  std::vector<fest::ImageTally> tallies(preds.size());
  parallel_for(preds.size(), jobs, [&](std::size_t i) {
    tallies[i] = fest::tally_image(preds[i], gts[i], cfg);
  });
  return tallies;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string out_dir;
  std::string config;
  int n = 200;
  std::uint64_t seed = 42;
  std::string hw = "128x128";
  std::string targets = "2:4";
  std::string radius = "1.5:3";
  std::string truth_radius = "1.5:3";
  std::string peak_bands = "0.55:0.95:0.55,0.32:0.48:0.25,0.14:0.28:0.20";
  std::string clutter = "0:1";
  std::string clutter_radius = "1:1.5";
  std::string clutter_peak = "0.15:0.45";
  double noise_sigma = 0.002;
  double min_sep = 24.0;
  int margin = 12;
};

json target_to_json(const fest::TargetSpec& t) {
  return json{{"row", t.row},
              {"col", t.col},
              {"radius", t.radius},
              {"peak", t.peak},
              {"truth_radius", t.truth_radius}};
}

json clutter_to_json(const fest::ClutterSpec& c) {
  return json{
      {"row", c.row}, {"col", c.col}, {"radius", c.radius}, {"peak", c.peak}};
}

int run_synth(const SynthArgs& args) {
  require_option(args.out_dir, "--out-dir");
  fest::DatasetTemplate tpl;
  std::tie(tpl.height, tpl.width) = parse_hw(args.hw);
  {
    const auto [lo, hi] = parse_range(args.targets, "--targets");
    tpl.min_targets = static_cast<int>(lo);
    tpl.max_targets = static_cast<int>(hi);
  }
  std::tie(tpl.radius_lo, tpl.radius_hi) = parse_range(args.radius, "--radius");
  std::tie(tpl.truth_radius_lo, tpl.truth_radius_hi) =
      parse_range(args.truth_radius, "--truth-radius");
  tpl.peak_bands = parse_peak_bands(args.peak_bands);
  {
    const auto [lo, hi] = parse_range(args.clutter, "--clutter");
    tpl.min_clutter = static_cast<int>(lo);
    tpl.max_clutter = static_cast<int>(hi);
  }
  std::tie(tpl.clutter_radius_lo, tpl.clutter_radius_hi) =
      parse_range(args.clutter_radius, "--clutter-radius");
  std::tie(tpl.clutter_peak_lo, tpl.clutter_peak_hi) =
      parse_range(args.clutter_peak, "--clutter-peak");
  tpl.noise_sigma = args.noise_sigma;
  tpl.min_separation = args.min_sep;
  tpl.border_margin = args.margin;
  tpl.validate();

  const fs::path root(args.out_dir);
  fs::create_directories(root / "img");
  fs::create_directories(root / "gt");
  fs::create_directories(root / "prob");

  json manifest;
  manifest["height"] = tpl.height;
  manifest["width"] = tpl.width;
  manifest["count"] = args.n;
  manifest["master_seed"] = args.seed;
  manifest["noise_sigma"] = tpl.noise_sigma;
  manifest["cases"] = json::array();

  for (int i = 0; i < args.n; ++i) {
    const fest::SceneSpec spec =
        fest::sample_scene_spec(tpl, fest::case_seed(args.seed, i));
    const fest::SynthCase scene = fest::gen_scene(spec);
    char name[32];
    std::snprintf(name, sizeof(name), "case_%04d", i);
    const std::string id(name);
    fest::write_mask(scene.image, root / "img" / (id + ".pgm"));
    fest::write_mask(scene.gt, root / "gt" / (id + ".pgm"));
    fest::write_mask(scene.prob, root / "prob" / (id + ".pgm"));

    json entry;
    entry["id"] = id;
    entry["seed"] = spec.seed;
    entry["noise_sigma"] = spec.noise_sigma;
    entry["targets"] = json::array();
    for (const fest::TargetSpec& t : spec.targets) {
      entry["targets"].push_back(target_to_json(t));
    }
    entry["clutter"] = json::array();
    for (const fest::ClutterSpec& c : spec.clutter) {
      entry["clutter"].push_back(clutter_to_json(c));
    }
    manifest["cases"].push_back(entry);
  }

  std::ofstream out = open_output(root / "manifest.json");
  out << manifest.dump(2) << "\n";
  std::cout << "wrote " << args.n << " cases to " << root.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// fuse
// ---------------------------------------------------------------------------

struct FuseArgs {
  std::string image;
  std::string config;
  std::string scales = "768,896,1024";
  std::string pred_dir;
  std::string pred_cmd;
  std::string mode = "mean";
  std::string out;
};

int run_fuse(const FuseArgs& args) {
  require_option(args.image, "--image");
  require_option(args.out, "--out");
  if (args.pred_dir.empty() == args.pred_cmd.empty()) {
    throw std::runtime_error("exactly one of --pred-dir or --pred-cmd required");
  }
  const fest::GrayImage image = fest::read_gray_image(args.image);
  const std::string image_id = fs::path(args.image).stem().string();
  const fest::ScaleSet scales(parse_int_list(args.scales, "--scales"));

  std::unique_ptr<fest::PredictorPort> predictor;
  if (!args.pred_dir.empty()) {
    predictor = std::make_unique<fest::DirectoryPredictor>(args.pred_dir);
  } else {
    predictor = std::make_unique<fest::CommandPredictor>(args.pred_cmd);
  }
  const fest::ProbMask fused = fest::run_multiscale(
      image, image_id, scales, *predictor, parse_mode(args.mode));
  if (fs::path(args.out).has_parent_path()) {
    fs::create_directories(fs::path(args.out).parent_path());
  }
  fest::write_mask(fused, args.out);
  std::cout << "wrote " << args.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// post
// ---------------------------------------------------------------------------

struct PostArgs {
  std::string prob;
  std::string config;
  double th1 = 0.5;
  double th2 = -1.0;  // < 0 means single-threshold mode
  std::string injection = "single";
  std::string out;
  std::string report;
};

int run_post(const PostArgs& args) {
  require_option(args.prob, "--prob");
  require_option(args.out, "--out");
  const fest::ProbMask prob = fest::read_prob_mask(args.prob);
  std::optional<double> th2;
  if (args.th2 >= 0.0) th2 = args.th2;

  fest::BinaryMask mask;
  std::vector<fest::TargetReport> targets;
  if (th2) {
    const fest::ASResult result = fest::apply_as(
        prob, fest::ASConfig{args.th1, *th2, parse_injection(args.injection)});
    mask = result.mask;
    targets = result.targets;
  } else {
    mask = fest::binarize(prob, args.th1);
    const fest::LabelMap lm = fest::label_components(mask);
    for (const fest::ComponentStat& s : lm.components()) {
      double peak = 0.0;
      for (std::size_t i = 0; i < prob.size(); ++i) {
        if (lm[i] == s.id) peak = std::max(peak, prob[i]);
      }
      targets.push_back(fest::TargetReport{fest::TargetClass::strong,
                                           s.pixel_count, s.centroid_row,
                                           s.centroid_col, peak});
    }
  }

  if (fs::path(args.out).has_parent_path()) {
    fs::create_directories(fs::path(args.out).parent_path());
  }
  fest::write_mask(mask, args.out);

  if (!args.report.empty()) {
    std::ofstream out = open_output(args.report);
    fest::write_csv_row(out, {"index", "class", "pixel_count", "centroid_row",
                              "centroid_col", "peak"});
    int index = 0;
    for (const fest::TargetReport& t : targets) {
      fest::write_csv_row(
          out, {std::to_string(index++),
                t.cls == fest::TargetClass::strong ? "strong" : "weak",
                std::to_string(t.pixel_count),
                fest::format_fixed(t.centroid_row, 3),
                fest::format_fixed(t.centroid_col, 3),
                fest::format_fixed(t.peak_confidence, 6)});
    }
  }
  std::cout << "wrote " << args.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string pred_dir;
  std::string config;
  std::string gt_dir;
  double dmax = 3.0;
  int connectivity = 8;
  double alpha = 0.5;
  double fa_limit = 1e-4;
  std::string csv;
  int jobs = 1;
};

int run_eval(const EvalArgs& args) {
  require_option(args.pred_dir, "--pred-dir");
  require_option(args.gt_dir, "--gt-dir");
  require_option(args.csv, "--csv");
  const PairedFiles files = pair_by_filename(args.pred_dir, args.gt_dir);
  const fest::MatchConfig match_cfg{args.dmax,
                                    parse_connectivity(args.connectivity)};
  const fest::ScoreConfig score_cfg{args.alpha, args.fa_limit};
  score_cfg.validate();

  std::vector<fest::ImageTally> tallies(files.ids.size());
  parallel_for(files.ids.size(), args.jobs, [&](std::size_t i) {
    tallies[i] = fest::tally_image(fest::read_binary_mask(files.first[i]),
                                   fest::read_binary_mask(files.second[i]),
                                   match_cfg);
  });

  const double iou = fest::dataset_iou(tallies);
  const double pd = fest::dataset_pd(tallies);
  const double fa = fest::dataset_fa(tallies);
  const fest::ScoreResult sc = fest::score(iou, pd, fa, score_cfg);

  std::ofstream out = open_output(args.csv);
  fest::write_csv_row(out, {"scope", "id", "iou", "pd", "fa", "score", "valid",
                            "tp", "t", "p", "detected", "targets",
                            "false_pixels", "pixels"});
  for (std::size_t i = 0; i < tallies.size(); ++i) {
    const fest::ImageTally& t = tallies[i];
    const std::int64_t uni = t.gt_area + t.pred_area - t.tp;
    const double image_iou =
        uni == 0 ? 1.0 : static_cast<double>(t.tp) / static_cast<double>(uni);
    const std::string image_pd =
        t.targets == 0
            ? std::string{}
            : pct(static_cast<double>(t.detected) / t.targets);
    fest::write_csv_row(
        out,
        {"image", files.ids[i], pct(image_iou), image_pd,
         fa_e6(static_cast<double>(t.false_pixels) / t.pixels), "", "",
         std::to_string(t.tp), std::to_string(t.gt_area),
         std::to_string(t.pred_area), std::to_string(t.detected),
         std::to_string(t.targets), std::to_string(t.false_pixels),
         std::to_string(t.pixels)});
  }
  std::int64_t tp = 0, gt_area = 0, pred_area = 0, false_pixels = 0, pixels = 0;
  std::int64_t detected = 0, targets = 0;
  for (const fest::ImageTally& t : tallies) {
    tp += t.tp;
    gt_area += t.gt_area;
    pred_area += t.pred_area;
    false_pixels += t.false_pixels;
    pixels += t.pixels;
    detected += t.detected;
    targets += t.targets;
  }
  fest::write_csv_row(
      out, {"dataset", "all", pct(iou), pct(pd), fa_e6(fa), score_field(sc),
            sc.valid ? "true" : "false", std::to_string(tp),
            std::to_string(gt_area), std::to_string(pred_area),
            std::to_string(detected), std::to_string(targets),
            std::to_string(false_pixels), std::to_string(pixels)});

  std::cout << "iou " << pct(iou) << " pd " << pct(pd) << " fa(e-6) "
            << fa_e6(fa) << " score "
            << (sc.valid ? score_field(sc) : std::string("invalid")) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

struct SweepArgs {
  std::string prob_dir;
  std::string config;
  std::string gt_dir;
  std::string th1_list;
  std::string th2_list;  // optional; entries may be 'none' or '-'
  std::string injection = "single";
  double dmax = 3.0;
  int connectivity = 8;
  double alpha = 0.5;
  double fa_limit = 1e-4;
  std::string csv;
  int jobs = 1;
};

std::vector<std::optional<double>> parse_th2_list(const std::string& text) {
  std::vector<std::optional<double>> values;
  if (text.empty()) {
    values.push_back(std::nullopt);
    return values;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    if (item == "none" || item == "-") {
      values.push_back(std::nullopt);
    } else {
      values.push_back(std::stod(item));
    }
  }
  if (values.empty()) throw std::runtime_error("--th2-list: empty list");
  return values;
}

int run_sweep(const SweepArgs& args) {
  require_option(args.prob_dir, "--prob-dir");
  require_option(args.gt_dir, "--gt-dir");
  require_option(args.th1_list, "--th1-list");
  require_option(args.csv, "--csv");
  const LoadedDataset data = load_prob_gt(args.prob_dir, args.gt_dir, args.jobs);
  const std::vector<double> th1_values =
      parse_double_list(args.th1_list, "--th1-list");
  const std::vector<std::optional<double>> th2_values =
      parse_th2_list(args.th2_list);
  const fest::MatchConfig match_cfg{args.dmax,
                                    parse_connectivity(args.connectivity)};
  const fest::ScoreConfig score_cfg{args.alpha, args.fa_limit};
  const fest::InjectionStyle injection = parse_injection(args.injection);

  std::ofstream out = open_output(args.csv);
  fest::write_csv_row(out, {"th1", "th2", "iou", "pd", "fa", "score", "valid"});
  for (double th1 : th1_values) {
    for (const std::optional<double>& th2 : th2_values) {
      if (th2 && !(*th2 < th1)) continue;  // invalid pair, not an error row
      std::vector<fest::BinaryMask> preds(data.probs.size());
      parallel_for(data.probs.size(), args.jobs, [&](std::size_t i) {
        preds[i] = postprocess(data.probs[i], th1, th2, injection);
      });
      const auto tallies = tally_all(preds, data.gts, match_cfg, args.jobs);
      const double iou = fest::dataset_iou(tallies);
      const double pd = fest::dataset_pd(tallies);
      const double fa = fest::dataset_fa(tallies);
      const fest::ScoreResult sc = fest::score(iou, pd, fa, score_cfg);
      fest::write_csv_row(
          out, {fest::format_fixed(th1, 3),
                th2 ? fest::format_fixed(*th2, 3) : std::string{}, pct(iou),
                pct(pd), fa_e6(fa), score_field(sc),
                sc.valid ? "true" : "false"});
    }
  }
  std::cout << "wrote " << args.csv << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// roc
// ---------------------------------------------------------------------------

struct RocArgs {
  std::string prob_dir;
  std::string config;
  std::string gt_dir;
  std::string thresholds;  // optional; default 99 evenly spaced
  double dmax = 3.0;
  int connectivity = 8;
  std::string csv;
  int jobs = 1;
};

int run_roc(const RocArgs& args) {
  require_option(args.prob_dir, "--prob-dir");
  require_option(args.gt_dir, "--gt-dir");
  require_option(args.csv, "--csv");
  const LoadedDataset data = load_prob_gt(args.prob_dir, args.gt_dir, args.jobs);
  std::vector<double> thresholds;
  if (args.thresholds.empty()) {
    for (int i = 99; i >= 1; --i) thresholds.push_back(i / 100.0);
  } else {
    thresholds = parse_double_list(args.thresholds, "--thresholds");
  }
  const fest::MatchConfig match_cfg{args.dmax,
                                    parse_connectivity(args.connectivity)};

  // Same protocol as the library sweep, parallelized across images.
  std::ofstream out = open_output(args.csv);
  fest::write_csv_row(out, {"threshold", "fa", "pd"});
  for (std::size_t t = 0; t < thresholds.size(); ++t) {
    if (!(thresholds[t] > 0.0 && thresholds[t] < 1.0)) {
      throw std::runtime_error("--thresholds: values must be in (0, 1)");
    }
    if (t > 0 && !(thresholds[t] < thresholds[t - 1])) {
      throw std::runtime_error("--thresholds: must be strictly descending");
    }
    std::vector<fest::BinaryMask> preds(data.probs.size());
    parallel_for(data.probs.size(), args.jobs, [&](std::size_t i) {
      preds[i] = fest::binarize(data.probs[i], thresholds[t]);
    });
    const auto tallies = tally_all(preds, data.gts, match_cfg, args.jobs);
    fest::write_csv_row(out, {fest::format_fixed(thresholds[t], 4),
                              fest::format_full(fest::dataset_fa(tallies)),
                              fest::format_fixed(fest::dataset_pd(tallies), 6)});
  }
  std::cout << "wrote " << args.csv << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train-toy
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data_dir;
  std::string config;
  std::string loss = "eedm";
  double edge_weight = 4.0;
  double mining_ratio = 0.5;
  double lr = 0.5;
  int epochs = 200;
  std::uint64_t seed = 7;
  std::string out;
  std::string log_csv;
};

std::vector<fest::TrainingExample> load_examples(const fs::path& data_dir) {
  const PairedFiles files = pair_by_filename(data_dir / "img", data_dir / "gt");
  std::vector<fest::TrainingExample> examples;
  examples.reserve(files.ids.size());
  for (std::size_t i = 0; i < files.ids.size(); ++i) {
    examples.push_back(fest::TrainingExample{
        fest::read_gray_image(files.first[i]),
        fest::read_binary_mask(files.second[i])});
  }
  return examples;
}

int run_train(const TrainArgs& args) {
  require_option(args.data_dir, "--data");
  require_option(args.out, "--out");
  const auto examples = load_examples(args.data_dir);
  fest::TrainConfig cfg;
  cfg.loss = fest::parse_loss_kind(args.loss);
  cfg.edge_weight = args.edge_weight;
  cfg.mining_ratio = args.mining_ratio;
  cfg.learning_rate = args.lr;
  cfg.epochs = args.epochs;
  cfg.seed = args.seed;
  const fest::ToyModel model = fest::train_toy(examples, cfg);
  if (fs::path(args.out).has_parent_path()) {
    fs::create_directories(fs::path(args.out).parent_path());
  }
  fest::save_model(model, args.out);
  if (!args.log_csv.empty()) {
    std::ofstream log = open_output(args.log_csv);
    fest::write_csv_row(log, {"epoch", "loss"});
    for (std::size_t e = 0; e < model.training_log.size(); ++e) {
      fest::write_csv_row(
          log, {std::to_string(e), fest::format_full(model.training_log[e])});
    }
  }
  std::cout << "final loss " << fest::format_full(model.training_log.back())
            << " after " << args.epochs << " epochs; wrote " << args.out
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// grid
// ---------------------------------------------------------------------------

struct GridArgs {
  std::string data_dir;
  std::string config;
  std::string w_list = "1,3,4,5,7";
  std::string p_list = "0.1,0.3,0.5,0.7,0.9";
  double lr = 0.5;
  int epochs = 100;
  std::uint64_t seed = 7;
  double train_frac = 0.5;
  double th1 = 0.5;
  double th2 = -1.0;  // < 0: plain threshold
  std::string injection = "single";
  double dmax = 3.0;
  double alpha = 0.5;
  double fa_limit = 1e-4;
  std::string csv;
};

int run_grid(const GridArgs& args) {
  require_option(args.data_dir, "--data");
  require_option(args.csv, "--csv");
  const auto examples = load_examples(args.data_dir);
  if (examples.size() < 2) {
    throw std::runtime_error("grid: need at least two examples");
  }
  const auto split =
      static_cast<std::size_t>(args.train_frac * static_cast<double>(examples.size()));
  const std::size_t n_train = std::min(std::max<std::size_t>(1, split),
                                       examples.size() - 1);
  const std::vector<fest::TrainingExample> train_set(examples.begin(),
                                                     examples.begin() + n_train);
  const std::vector<fest::TrainingExample> eval_set(examples.begin() + n_train,
                                                    examples.end());

  const std::vector<double> w_values = parse_double_list(args.w_list, "--w-list");
  const std::vector<double> p_values = parse_double_list(args.p_list, "--p-list");
  std::optional<double> th2;
  if (args.th2 >= 0.0) th2 = args.th2;
  const fest::MatchConfig match_cfg{args.dmax, fest::Connectivity::eight};
  const fest::ScoreConfig score_cfg{args.alpha, args.fa_limit};
  const fest::InjectionStyle injection = parse_injection(args.injection);

  std::ofstream out = open_output(args.csv);
  fest::write_csv_row(
      out, {"w", "p", "status", "iou", "pd", "fa", "score", "valid"});
  for (double w : w_values) {
    for (double p : p_values) {
      fest::TrainConfig cfg;
      cfg.loss = fest::LossKind::eedm;
      cfg.edge_weight = w;
      cfg.mining_ratio = p;
      cfg.learning_rate = args.lr;
      cfg.epochs = args.epochs;
      cfg.seed = args.seed;
      std::optional<fest::ToyModel> model;
      try {
        model = fest::train_toy(train_set, cfg);
      } catch (const std::runtime_error&) {
        // Divergence is recorded per cell, not fatal.
        fest::write_csv_row(out, {fest::format_fixed(w, 2),
                                  fest::format_fixed(p, 2), "diverged", "", "",
                                  "", "", ""});
        continue;
      }
      std::vector<fest::ImageTally> tallies;
      for (const fest::TrainingExample& ex : eval_set) {
        const fest::ProbMask prob = fest::predict_toy(*model, ex.image);
        tallies.push_back(fest::tally_image(
            postprocess(prob, args.th1, th2, injection), ex.label, match_cfg));
      }
      const double iou = fest::dataset_iou(tallies);
      const double pd = fest::dataset_pd(tallies);
      const double fa = fest::dataset_fa(tallies);
      const fest::ScoreResult sc = fest::score(iou, pd, fa, score_cfg);
      fest::write_csv_row(out, {fest::format_fixed(w, 2),
                                fest::format_fixed(p, 2), "ok", pct(iou),
                                pct(pd), fa_e6(fa), score_field(sc),
                                sc.valid ? "true" : "false"});
    }
  }
  std::cout << "wrote " << args.csv << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Infrared small-target detection toolkit: synthetic scenes, "
               "multi-scale fusion, dual-threshold post-processing, and "
               "IoU/Pd/Fa/Score evaluation"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--out-dir", synth_args.out_dir, "Output directory (required)");
  synth->add_option("--n", synth_args.n, "Number of scenes");
  synth->add_option("--seed", synth_args.seed, "Master seed");
  synth->add_option("--hw", synth_args.hw, "Scene size as HxW");
  synth->add_option("--targets", synth_args.targets, "Target count range LO:HI");
  synth->add_option("--radius", synth_args.radius, "Confidence radius range LO:HI");
  synth->add_option("--truth-radius", synth_args.truth_radius,
                    "Label disk radius range LO:HI");
  synth->add_option("--peak-bands", synth_args.peak_bands,
                    "Peak bands LO:HI:WEIGHT,...");
  synth->add_option("--clutter", synth_args.clutter, "Clutter count range LO:HI");
  synth->add_option("--clutter-radius", synth_args.clutter_radius,
                    "Clutter radius range LO:HI");
  synth->add_option("--clutter-peak", synth_args.clutter_peak,
                    "Clutter peak range LO:HI");
  synth->add_option("--noise-sigma", synth_args.noise_sigma, "Pixel noise sigma");
  synth->add_option("--min-sep", synth_args.min_sep, "Minimum center separation");
  synth->add_option("--margin", synth_args.margin, "Border margin for centers");
  synth->add_option("--config", synth_args.config, "key=value config file; flags win");

  FuseArgs fuse_args;
  CLI::App* fuse = app.add_subcommand("fuse", "Multi-scale fusion of one image");
  fuse->add_option("--image", fuse_args.image, "Input image, 8-bit PGM (required)");
  fuse->add_option("--scales", fuse_args.scales, "Comma-separated scales");
  fuse->add_option("--pred-dir", fuse_args.pred_dir,
                   "Directory of per-scale masks <id>/<scale>.pgm");
  fuse->add_option("--pred-cmd", fuse_args.pred_cmd,
                   "Predictor command invoked as CMD in.pgm out.pgm");
  fuse->add_option("--mode", fuse_args.mode, "Fusion mode: mean | max");
  fuse->add_option("--out", fuse_args.out, "Fused mask output, 16-bit PGM (required)");
  fuse->add_option("--config", fuse_args.config, "key=value config file; flags win");

  PostArgs post_args;
  CLI::App* post = app.add_subcommand("post", "Dual-threshold post-processing");
  post->add_option("--prob", post_args.prob, "Probability mask, 16-bit PGM (required)");
  post->add_option("--th1", post_args.th1, "Strong-target threshold");
  post->add_option("--th2", post_args.th2,
                   "Weak-target threshold (omit for single-threshold)");
  post->add_option("--injection", post_args.injection,
                   "Centroid injection: single | cross");
  post->add_option("--out", post_args.out, "Binary mask output (required)");
  post->add_option("--report", post_args.report, "Optional per-target CSV");
  post->add_option("--config", post_args.config, "key=value config file; flags win");

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "Evaluate binary masks against labels");
  eval->add_option("--pred-dir", eval_args.pred_dir, "Predicted masks (required)");
  eval->add_option("--gt-dir", eval_args.gt_dir, "Ground-truth masks (required)");
  eval->add_option("--dmax", eval_args.dmax, "Centroid match distance");
  eval->add_option("--connectivity", eval_args.connectivity, "4 or 8");
  eval->add_option("--alpha", eval_args.alpha, "Score mixing weight");
  eval->add_option("--fa-limit", eval_args.fa_limit, "Validity cutoff for Fa");
  eval->add_option("--csv", eval_args.csv, "Report CSV path (required)");
  eval->add_option("--jobs", eval_args.jobs, "Worker threads");
  eval->add_option("--config", eval_args.config, "key=value config file; flags win");

  SweepArgs sweep_args;
  CLI::App* sweep = app.add_subcommand("sweep", "Threshold sweep over a dataset");
  sweep->add_option("--prob-dir", sweep_args.prob_dir, "Probability masks (required)");
  sweep->add_option("--gt-dir", sweep_args.gt_dir, "Ground-truth masks (required)");
  sweep->add_option("--th1-list", sweep_args.th1_list, "Strong thresholds (required)");
  sweep->add_option("--th2-list", sweep_args.th2_list,
                    "Weak thresholds; 'none' or '-' for single-threshold rows");
  sweep->add_option("--injection", sweep_args.injection, "single | cross");
  sweep->add_option("--dmax", sweep_args.dmax, "Centroid match distance");
  sweep->add_option("--connectivity", sweep_args.connectivity, "4 or 8");
  sweep->add_option("--alpha", sweep_args.alpha, "Score mixing weight");
  sweep->add_option("--fa-limit", sweep_args.fa_limit, "Validity cutoff for Fa");
  sweep->add_option("--csv", sweep_args.csv, "Output CSV path (required)");
  sweep->add_option("--jobs", sweep_args.jobs, "Worker threads");
  sweep->add_option("--config", sweep_args.config, "key=value config file; flags win");

  RocArgs roc_args;
  CLI::App* roc = app.add_subcommand("roc", "Pd/Fa across a threshold ladder");
  roc->add_option("--prob-dir", roc_args.prob_dir, "Probability masks (required)");
  roc->add_option("--gt-dir", roc_args.gt_dir, "Ground-truth masks (required)");
  roc->add_option("--thresholds", roc_args.thresholds,
                  "Descending thresholds; default 0.99..0.01 step 0.01");
  roc->add_option("--dmax", roc_args.dmax, "Centroid match distance");
  roc->add_option("--connectivity", roc_args.connectivity, "4 or 8");
  roc->add_option("--csv", roc_args.csv, "Output CSV path (required)");
  roc->add_option("--jobs", roc_args.jobs, "Worker threads");
  roc->add_option("--config", roc_args.config, "key=value config file; flags win");

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train-toy", "Train the logistic toy model");
  train->add_option("--data", train_args.data_dir,
                    "Dataset directory containing img/ and gt/ (required)");
  train->add_option("--loss", train_args.loss, "bce | ee | dm | eedm");
  train->add_option("--w", train_args.edge_weight, "Edge weight");
  train->add_option("--p", train_args.mining_ratio, "Mining ratio");
  train->add_option("--lr", train_args.lr, "Learning rate");
  train->add_option("--epochs", train_args.epochs, "Training epochs");
  train->add_option("--seed", train_args.seed, "Seed");
  train->add_option("--out", train_args.out, "Model file, one weight per line (required)");
  train->add_option("--log", train_args.log_csv, "Optional per-epoch loss CSV");
  train->add_option("--config", train_args.config, "key=value config file; flags win");

  GridArgs grid_args;
  CLI::App* grid = app.add_subcommand(
      "grid", "Hyperparameter grid: train and evaluate per (w, p)");
  grid->add_option("--data", grid_args.data_dir,
                   "Dataset directory containing img/ and gt/ (required)");
  grid->add_option("--w-list", grid_args.w_list, "Edge weights");
  grid->add_option("--p-list", grid_args.p_list, "Mining ratios");
  grid->add_option("--lr", grid_args.lr, "Learning rate");
  grid->add_option("--epochs", grid_args.epochs, "Training epochs");
  grid->add_option("--seed", grid_args.seed, "Seed");
  grid->add_option("--train-frac", grid_args.train_frac, "Training split fraction");
  grid->add_option("--th1", grid_args.th1, "Evaluation threshold");
  grid->add_option("--th2", grid_args.th2, "Optional weak threshold");
  grid->add_option("--injection", grid_args.injection, "single | cross");
  grid->add_option("--dmax", grid_args.dmax, "Centroid match distance");
  grid->add_option("--alpha", grid_args.alpha, "Score mixing weight");
  grid->add_option("--fa-limit", grid_args.fa_limit, "Validity cutoff for Fa");
  grid->add_option("--csv", grid_args.csv, "Output CSV path (required)");
  grid->add_option("--config", grid_args.config, "key=value config file; flags win");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      if (!synth_args.config.empty()) apply_config_file(synth, synth_args.config);
      return run_synth(synth_args);
    }
    if (*fuse) {
      if (!fuse_args.config.empty()) apply_config_file(fuse, fuse_args.config);
      return run_fuse(fuse_args);
    }
    if (*post) {
      if (!post_args.config.empty()) apply_config_file(post, post_args.config);
      return run_post(post_args);
    }
    if (*eval) {
      if (!eval_args.config.empty()) apply_config_file(eval, eval_args.config);
      return run_eval(eval_args);
    }
    if (*sweep) {
      if (!sweep_args.config.empty()) apply_config_file(sweep, sweep_args.config);
      return run_sweep(sweep_args);
    }
    if (*roc) {
      if (!roc_args.config.empty()) apply_config_file(roc, roc_args.config);
      return run_roc(roc_args);
    }
    if (*train) {
      if (!train_args.config.empty()) apply_config_file(train, train_args.config);
      return run_train(train_args);
    }
    if (*grid) {
      if (!grid_args.config.empty()) apply_config_file(grid, grid_args.config);
      return run_grid(grid_args);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "error: no subcommand\n";
  return 1;
}
