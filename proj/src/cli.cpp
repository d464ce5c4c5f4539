#include "pel/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fmt/format.h>
#include <fstream>
#include <iostream>
#include <optional>

#include "pel/checkpoint.hpp"
#include "pel/errors.hpp"
#include "pel/eval.hpp"
#include "pel/freq.hpp"
#include "pel/train.hpp"
#include "pel/viz.hpp"

namespace pel {
namespace {

namespace fs = std::filesystem;

constexpr int kUsage = 1;
constexpr int kDataError = 2;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Network/training config file (key = value)");
  cmd->add_option("--seed", c.seed, "Override the config seed");
  cmd->add_option("--out", c.out, "Output directory");
}

NetworkConfig resolve_config(const Common& c) {
  NetworkConfig cfg = c.config.empty() ? NetworkConfig{} : NetworkConfig::load(c.config);
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  return cfg;
}

fs::path ensure_out(const Common& c) {
  std::error_code ec;
  fs::create_directories(c.out, ec);
  if (ec) throw InputError("cannot create output directory " + c.out);
  return fs::path(c.out);
}

fs::path checkpoint_path(const Common& c, const std::string& explicit_path) {
  return explicit_path.empty() ? fs::path(c.out) / "model.ckpt" : fs::path(explicit_path);
}

PelNetwork load_for_eval(const Common& c, const std::string& ckpt, Dataset& data) {
  PelNetwork net = load_checkpoint(checkpoint_path(c, ckpt));
  NetworkConfig cfg = net.config();
  if (c.seed) cfg.seed = *c.seed;
  data = make_dataset(cfg);
  return net;
}

RgbImage pick_image(const std::string& image, std::optional<std::size_t> index, const Dataset& data) {
  if (!image.empty()) return read_ppm(image);
  if (index) {
    if (*index >= data.test.size()) throw UsageError(fmt::format("test index {} out of range", *index));
    return data.test[*index].image;
  }
  for (const auto& s : data.test) {
    if (s.label == 1) return s.image;
  }
  return data.test.front().image;
}

StreamKind parse_stream(const std::string& s) {
  if (s == "rgb") return StreamKind::rgb;
  if (s == "freq") return StreamKind::freq;
  throw UsageError("stream must be 'rgb' or 'freq'");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-stream forgery detector with progressive feature enhancement"};
  app.require_subcommand(1);
  Common common;

  auto* gen = app.add_subcommand("gen-data", "Export the synthetic dataset as PPM/PGM files");
  add_common(gen, common);

  std::string image;
  std::size_t stride = 2;
  auto* dec = app.add_subcommand("decompose", "Write per-band PGM views of an image's DCT decomposition");
  add_common(dec, common);
  dec->add_option("--image", image, "Input PPM (P6)")->required();
  dec->add_option("--stride", stride, "Sliding-window stride");

  std::string resume;
  std::optional<std::size_t> epochs;
  auto* train = app.add_subcommand("train", "Train a network");
  add_common(train, common);
  train->add_option("--resume", resume, "Checkpoint with training state to continue from");
  train->add_option("--epochs", epochs, "Override the number of epochs (the last epoch when resuming)");

  std::string ckpt;
  auto* eval = app.add_subcommand("eval", "Clean test-set metrics; writes report.csv");
  add_common(eval, common);
  eval->add_option("--checkpoint", ckpt, "Checkpoint (default <out>/model.ckpt)");

  auto* peval = app.add_subcommand("perturb-eval", "Metric deltas under perturbations; writes perturb.csv");
  add_common(peval, common);
  peval->add_option("--checkpoint", ckpt, "Checkpoint (default <out>/model.ckpt)");

  auto* ablate = app.add_subcommand("ablate", "Train the eight ablation variants; writes ablation.csv");
  add_common(ablate, common);

  std::optional<std::size_t> index;
  std::size_t block = 2;
  std::string stream = "rgb";
  auto* cam = app.add_subcommand("cam", "Grad-CAM heatmap for one image");
  add_common(cam, common);
  cam->add_option("--checkpoint", ckpt, "Checkpoint (default <out>/model.ckpt)");
  cam->add_option("--image", image, "Input PPM; defaults to the first fake test sample");
  cam->add_option("--index", index, "Test-split sample index");
  cam->add_option("--stream", stream, "rgb or freq");
  cam->add_option("--block", block, "Source block (1-based)");

  std::string module = "self";
  auto* res = app.add_subcommand("residuals", "Enhancement residual heatmaps for one image");
  add_common(res, common);
  res->add_option("--checkpoint", ckpt, "Checkpoint (default <out>/model.ckpt)");
  res->add_option("--image", image, "Input PPM; defaults to the first fake test sample");
  res->add_option("--index", index, "Test-split sample index");
  res->add_option("--block", block, "Module site (1-based block)");
  res->add_option("--module", module, "self or mutual");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  try {
    if (gen->parsed()) {
      const NetworkConfig cfg = resolve_config(common);
      const fs::path dir = ensure_out(common);
      export_dataset(make_dataset(cfg), dir);
      out << "wrote dataset to " << dir.string() << '\n';
    } else if (dec->parsed()) {
      const fs::path dir = ensure_out(common);
      const FreqInput fi = decompose(read_ppm(image), stride);
      const std::size_t grid = fi.grid_h() * fi.grid_w();
      static constexpr const char* kColours[] = {"y", "cb", "cr"};
      for (std::size_t k = 0; k < kFlatChannels; ++k) {
        const Band b = band_of(k);
        const auto values = fi.flat.data().subspan(k * grid, grid);
        write_pgm(dir / fmt::format("band_{:03}_{}_z{:02}.pgm", k, kColours[b.color], b.zigzag),
                  to_gray_minmax(values, fi.grid_w(), fi.grid_h()));
      }
      out << fmt::format("wrote {} band images ({}x{}) to {}\n", kFlatChannels, fi.grid_w(), fi.grid_h(), dir.string());
    } else if (train->parsed()) {
      const fs::path dir = ensure_out(common);
      std::optional<TrainingState> state;
      std::optional<PelNetwork> net;
      if (!resume.empty()) {
        net.emplace(load_checkpoint(resume, &state));
        if (!state) throw InputError(resume + " has no training state to resume from");
      }
      if (net && (!common.config.empty() || common.seed)) {
        throw UsageError("--resume takes its config from the checkpoint; use --epochs to extend training");
      }
      NetworkConfig cfg = net ? net->config() : resolve_config(common);
      if (epochs) cfg.epochs = *epochs;
      const Dataset data = make_dataset(cfg);
      if (!net) net.emplace(make_network(cfg, data));
      cfg.save(dir / "config.cfg");
      Trainer trainer(*net, data);
      const fs::path log_path = dir / "train_log.csv";
      if (state) {
        trainer.optimizer().restore(state->steps, state->first_moments, state->second_moments);
        trainer.restore_epoch(state->epoch);
      }
      const bool fresh_log = !state || !fs::exists(log_path);
      std::ofstream log(log_path, fresh_log ? std::ios::trunc : std::ios::app);
      if (!log) throw InputError("cannot write " + log_path.string());
      if (fresh_log) log << kTrainLogHeader << '\n';
      trainer.run(cfg.epochs, [&](const EpochLog& e) {
        log << e.csv_line() << '\n' << std::flush;
        out << fmt::format("epoch {:>3}  loss {:.5f}  train_acc {:.4f}  val_acc {:.4f}  val_auc {:.4f}\n", e.epoch,
                           e.loss, e.train_acc, e.val_acc, e.val_auc);
        const TrainingState s{e.epoch, trainer.optimizer().steps(), trainer.optimizer().first_moments(),
                              trainer.optimizer().second_moments()};
        save_checkpoint(*net, dir / "model.ckpt", &s);
      });
      if (trainer.epochs() == 0 || cfg.epochs == 0) save_checkpoint(*net, dir / "model.ckpt");
    } else if (eval->parsed()) {
      Dataset data;
      const PelNetwork net = load_for_eval(common, ckpt, data);
      const fs::path dir = ensure_out(common);
      const EvalReport r = evaluate(net, data.test);
      write_report_csv(dir / "report.csv", r);
      out << fmt::format("acc {:.4f}  auc {:.4f}  eer {:.4f}  ({} samples)\n", r.acc, r.auc, r.eer, r.samples.size());
    } else if (peval->parsed()) {
      Dataset data;
      const PelNetwork net = load_for_eval(common, ckpt, data);
      const fs::path dir = ensure_out(common);
      const EvalReport clean = evaluate(net, data.test);
      const auto specs = default_perturbations();
      const auto rows = perturb_eval(net, data.test, specs, clean, net.config().seed);
      write_perturb_csv(dir / "perturb.csv", rows);
      out << fmt::format("clean: acc {:.4f} auc {:.4f}\n", clean.acc, clean.auc);
      for (const auto& r : rows) {
        out << fmt::format("{:<15} acc {:.4f} auc {:.4f}  dAcc {:+.4f} dAUC {:+.4f}\n", r.kind, r.acc, r.auc,
                           r.delta_acc, r.delta_auc);
      }
    } else if (ablate->parsed()) {
      const NetworkConfig cfg = resolve_config(common);
      const fs::path dir = ensure_out(common);
      const auto rows = run_ablation(cfg, cfg.seed, [&](const std::string& line) { out << line << '\n' << std::flush; });
      write_ablation_csv(dir / "ablation.csv", rows);
    } else if (cam->parsed()) {
      Dataset data;
      const PelNetwork net = load_for_eval(common, ckpt, data);
      const fs::path dir = ensure_out(common);
      const RgbImage img = pick_image(image, index, data);
      const HeatMap map = grad_cam(net, img, parse_stream(stream), block);
      const std::string stem = fmt::format("cam_{}_b{}", stream, block);
      write_heatmap_pgm(dir / (stem + ".pgm"), map);
      write_ppm(dir / (stem + "_overlay.ppm"), heatmap_overlay(img, map));
      out << "wrote " << (dir / stem).string() << ".{pgm,_overlay.ppm}\n";
    } else if (res->parsed()) {
      if (module != "self" && module != "mutual") throw UsageError("module must be 'self' or 'mutual'");
      Dataset data;
      const PelNetwork net = load_for_eval(common, ckpt, data);
      const fs::path dir = ensure_out(common);
      const RgbImage img = pick_image(image, index, data);
      const auto [rgb, freq] =
          enhancement_residual(net, img, block, module == "self" ? ModuleKind::self : ModuleKind::mutual);
      for (const auto& [name, map] : {std::pair{"rgb", &rgb}, std::pair{"freq", &freq}}) {
        if (map->empty()) continue;
        const std::string stem = fmt::format("{}_residual_{}_b{}", module, name, block);
        write_heatmap_pgm(dir / (stem + ".pgm"), *map);
        write_ppm(dir / (stem + "_overlay.ppm"), heatmap_overlay(img, *map));
        out << fmt::format("{}: mean residual {:.6g} -> {}.pgm\n", name, map->raw_mean, (dir / stem).string());
      }
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  return 0;
}

}  // namespace pel
