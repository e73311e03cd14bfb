// Command-line entry point: gamut construction, dataset ingest, training,
// evaluation, benchmarking, batch colorization and the HTTP service.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hintcolor/bench.hpp"
#include "hintcolor/dataset.hpp"
#include "hintcolor/evaluate.hpp"
#include "hintcolor/levin.hpp"
#include "hintcolor/service.hpp"
#include "hintcolor/train.hpp"

namespace fs = std::filesystem;
using namespace hintcolor;

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool is_image_file(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp" || ext == ".tif" || ext == ".tiff" ||
         ext == ".webp";
}

int cmd_make_gamut(const std::string& out, bool reference, int q, double step, int stride) {
  GamutBuildOptions opts;
  opts.rgb_stride = stride;
  const QuantizedGamut g =
      reference ? build_reference_gamut(q, step, -110.0, 110.0, opts) : build_gamut(step, -110.0, 110.0, opts);
  save_gamut(g, out);
  std::cout << "Q=" << g.Q() << "\n";
  return 0;
}

int cmd_ingest(const std::string& dir, const std::string& out) {
  const DatasetManifest m = ingest_dataset(dir);
  if (!out.empty()) save_manifest(m, out);
  std::cout << "train=" << m.count(Split::kTrain) << " val=" << m.count(Split::kVal)
            << " test=" << m.count(Split::kTest) << " skipped=" << m.skipped.size()
            << " content_hash=" << m.content_hash << "\n";
  for (const auto& s : m.skipped) std::cerr << "skipped: " << s << "\n";
  return 0;
}

int cmd_train(const std::string& config, const std::string& dataset, std::optional<std::uint64_t> seed,
              std::optional<int> steps, const std::string& out) {
  TrainConfig cfg = load_train_config(config);
  if (seed) cfg.seed = *seed;
  if (steps) cfg.steps = *steps;
  if (!out.empty()) cfg.out = out;
  const DatasetManifest m = open_dataset(dataset);
  const int every = std::max(1, cfg.steps / 100);
  train(m, cfg, [&](std::int64_t step, const StepLosses& s) {
    if (step % every == 0 || step + 1 == cfg.steps) {
      std::cerr << "step " << step << " huber " << s.huber << " ce " << s.ce << " lr " << s.lr << "\n";
    }
  });
  if (!cfg.out.empty()) std::cout << "checkpoint: " << cfg.out << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& mode, const std::string& dataset, const std::string& split,
             int max_images) {
  const auto model = load_checkpoint(ckpt);
  const DatasetManifest m = open_dataset(dataset);
  int skipped = 0;
  const auto images = load_bench_images(m, split_from_string(split), max_images, &skipped);
  const auto s = evaluate(images, *model, eval_mode_from_string(mode));
  std::cout << nlohmann::json{{"mode", mode},
                              {"psnr_mean", s.psnr_mean},
                              {"psnr_stderr", s.psnr_stderr},
                              {"images", s.psnrs.size()},
                              {"skipped", skipped}}
                   .dump()
            << "\n";
  return 0;
}

struct BenchArgs {
  std::string dataset, split = "test", ckpt, out, methods = "gray", samplers = "random,max_error";
  std::string points = "0,1,2,5,10,20,50,100,200,500";
  std::uint64_t seed = 0;
  int max_images = 0, trials = 1, patch = 7, window = 25;
};

int cmd_bench(const BenchArgs& a) {
  BenchConfig cfg;
  cfg.methods = split_list(a.methods);
  cfg.samplers.clear();
  for (const auto& s : split_list(a.samplers)) cfg.samplers.push_back(sampler_from_string(s));
  cfg.point_counts.clear();
  for (const auto& p : split_list(a.points)) cfg.point_counts.push_back(std::stoi(p));
  cfg.seed = a.seed;
  cfg.trials_per_image = a.trials;
  cfg.reveal_patch = a.patch;
  cfg.error_window = a.window;
  validate(cfg);

  std::map<std::string, Colorizer> methods{{"gray", gray_colorizer()}, {"levin", levin_colorizer()}};
  if (std::find(cfg.methods.begin(), cfg.methods.end(), "network_local") != cfg.methods.end()) {
    if (a.ckpt.empty()) throw std::runtime_error("network_local needs --ckpt");
    methods["network_local"] = network_colorizer(load_checkpoint(a.ckpt));
  }
  const DatasetManifest m = open_dataset(a.dataset);
  int skipped = 0;
  const auto images = load_bench_images(m, split_from_string(a.split), a.max_images, &skipped);
  BenchReport report = run_benchmark(images, cfg, methods);
  report.skipped_images += skipped;
  const std::string csv = report.to_csv();
  if (a.out.empty()) {
    std::cout << csv;
  } else {
    std::ofstream(a.out) << csv;
  }
  std::cerr << "dataset_hash=" << report.dataset_hash << " skipped=" << report.skipped_images
            << " short_counts=" << report.short_counts << "\n";
  return 0;
}

int cmd_colorize(const std::string& input, const std::string& out_dir, const std::string& ckpt,
                 const std::string& points_file) {
  const auto model = load_checkpoint(ckpt);
  if (model->config().variant != Variant::kLocal) throw std::runtime_error("colorize needs a local-hints checkpoint");
  nlohmann::json points = nlohmann::json::object();
  if (!points_file.empty()) points = nlohmann::json::parse(read_file(points_file));
  std::vector<fs::path> files;
  if (fs::is_directory(input)) {
    for (const auto& de : fs::directory_iterator(input)) {
      if (de.is_regular_file() && is_image_file(de.path())) files.push_back(de.path());
    }
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(input);
  }
  fs::create_directories(out_dir);
  int failures = 0;
  for (const auto& f : files) {
    const std::string name = f.filename().string();
    try {
      const RgbImage rgb = read_image(f);
      const LabImage lab = rgb_to_lab(rgb);
      std::vector<PointEdit> edits;
      if (points.contains(name)) edits = edits_from_json(points.at(name).dump());
      LocalHints hints;
      try {
        hints = hints_from_edits(edits, rgb.height, rgb.width);
      } catch (const EditOutOfBounds& e) {
        throw std::runtime_error("point " + std::to_string(e.index()) + ": " + e.what());
      }
      const AbImage ab = model->forward_local(lab.gray, hints);
      const fs::path out = fs::path(out_dir) / (f.stem().string() + ".png");
      write_png(lab_to_rgb(lab.gray, ab), out);
      std::cout << out.string() << "\n";
    } catch (const std::exception& e) {
      std::cerr << name << ": " << e.what() << "\n";
      ++failures;
    }
  }
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interactive hint-guided colorization toolkit"};
  app.require_subcommand(1);

  auto* gamut = app.add_subcommand("make-gamut", "Build the quantized ab gamut and write it as JSON");
  std::string gamut_out;
  bool gamut_ref = false;
  int gamut_q = 313, gamut_stride = 2;
  double gamut_step = 10.0;
  gamut->add_option("--out", gamut_out, "Output file")->required();
  gamut->add_flag("--reference", gamut_ref, "Keep exactly --q bins nearest the sRGB gamut");
  gamut->add_option("--q", gamut_q, "Bin count for --reference")->check(CLI::PositiveNumber);
  gamut->add_option("--grid-step", gamut_step, "Bin size in ab units")->check(CLI::PositiveNumber);
  gamut->add_option("--stride", gamut_stride, "sRGB sampling stride per channel")->check(CLI::Range(1, 4));

  auto* ingest = app.add_subcommand("ingest", "Scan an image folder into a split manifest");
  std::string ingest_dir, ingest_out;
  ingest->add_option("--dir", ingest_dir, "Image folder")->required();
  ingest->add_option("--out", ingest_out, "Manifest file to write");

  auto* trn = app.add_subcommand("train", "Train a local- or global-hints network");
  std::string train_cfg, train_data, train_out;
  std::optional<std::uint64_t> train_seed;
  std::optional<int> train_steps;
  trn->add_option("--config", train_cfg, "JSON config file")->required();
  trn->add_option("--dataset", train_data, "Image folder or manifest")->required();
  trn->add_option("--seed", train_seed, "Override the config seed");
  trn->add_option("--steps", train_steps, "Override the step count");
  trn->add_option("--out", train_out, "Override the checkpoint path");

  auto* ev = app.add_subcommand("eval", "Mean PSNR of a checkpoint in one conditioning mode");
  std::string ev_ckpt, ev_mode = "auto", ev_data, ev_split = "test";
  int ev_max = 0;
  ev->add_option("--ckpt", ev_ckpt, "Checkpoint")->required();
  ev->add_option("--mode", ev_mode, "auto|gt-colors|global-hist|global-sat")
      ->check(CLI::IsMember({"auto", "gt-colors", "global-hist", "global-sat"}));
  ev->add_option("--dataset", ev_data, "Image folder or manifest")->required();
  ev->add_option("--split", ev_split, "train|val|test")->check(CLI::IsMember({"train", "val", "test"}));
  ev->add_option("--max-images", ev_max, "Limit the number of images");

  auto* bench = app.add_subcommand("bench", "PSNR versus number of revealed points");
  BenchArgs ba;
  bench->add_option("--dataset", ba.dataset, "Image folder or manifest")->required();
  bench->add_option("--split", ba.split, "train|val|test")->check(CLI::IsMember({"train", "val", "test"}));
  bench->add_option("--methods", ba.methods, "Comma list of network_local, levin, gray");
  bench->add_option("--samplers", ba.samplers, "Comma list of random, max_error");
  bench->add_option("--points", ba.points, "Comma list of point counts");
  bench->add_option("--ckpt", ba.ckpt, "Local-hints checkpoint for network_local");
  bench->add_option("--out", ba.out, "CSV output (stdout when omitted)");
  bench->add_option("--seed", ba.seed, "Random sampler seed");
  bench->add_option("--max-images", ba.max_images, "Limit the number of images");
  bench->add_option("--trials", ba.trials, "Random-sampler trials per image")->check(CLI::PositiveNumber);
  bench->add_option("--patch", ba.patch, "Reveal patch side");
  bench->add_option("--window", ba.window, "Error averaging window side");

  auto* col = app.add_subcommand("colorize", "Colorize a file or folder, optionally with user points");
  std::string col_in, col_out, col_ckpt, col_points;
  col->add_option("--input", col_in, "Image file or folder")->required();
  col->add_option("--out", col_out, "Output folder")->required();
  col->add_option("--ckpt", col_ckpt, "Local-hints checkpoint")->required();
  col->add_option("--points", col_points, "JSON map from file name to edit list");

  auto* srv = app.add_subcommand("serve", "Run the /v1 HTTP service");
  ServiceConfig sc;
  std::string srv_ckpt, srv_global;
  int srv_ttl = 3600;
  srv->add_option("--ckpt", srv_ckpt, "Local-hints checkpoint")->required();
  srv->add_option("--global-ckpt", srv_global, "Global-hints checkpoint");
  srv->add_option("--host", sc.host, "Bind address");
  srv->add_option("--port", sc.port, "Port")->check(CLI::Range(1, 65535));
  srv->add_option("--max-upload", sc.max_upload_bytes, "Maximum upload in bytes");
  srv->add_option("--max-side", sc.max_side, "Maximum image side");
  srv->add_option("--working-side", sc.working_side, "Inference long side")->check(CLI::PositiveNumber);
  srv->add_option("--session-ttl", srv_ttl, "Idle seconds before a session expires")->check(CLI::PositiveNumber);
  srv->add_option("--seed", sc.palette.seed, "Palette k-means seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gamut) return cmd_make_gamut(gamut_out, gamut_ref, gamut_q, gamut_step, gamut_stride);
    if (*ingest) return cmd_ingest(ingest_dir, ingest_out);
    if (*trn) return cmd_train(train_cfg, train_data, train_seed, train_steps, train_out);
    if (*ev) return cmd_eval(ev_ckpt, ev_mode, ev_data, ev_split, ev_max);
    if (*bench) return cmd_bench(ba);
    if (*col) return cmd_colorize(col_in, col_out, col_ckpt, col_points);
    if (*srv) {
      sc.session_ttl = std::chrono::seconds(srv_ttl);
      std::shared_ptr<const ColorizationModel> global;
      if (!srv_global.empty()) global = load_checkpoint(srv_global);
      ColorizationService service(sc, load_checkpoint(srv_ckpt), global);
      std::cerr << "listening on " << sc.host << ":" << sc.port << "\n";
      return run_server(service);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
