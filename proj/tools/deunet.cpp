// Command-line front end: phantom generation, training, evaluation,
// inference and the self-check suite.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "deunet/archive.hpp"
#include "deunet/binio.hpp"
#include "deunet/export.hpp"
#include "deunet/network.hpp"
#include "deunet/oracles.hpp"
#include "deunet/phantom.hpp"
#include "deunet/runconfig.hpp"
#include "deunet/selfcheck.hpp"
#include "deunet/training.hpp"

namespace fs = std::filesystem;
using namespace deunet;

namespace {

int cmd_gen_phantom(const std::string& out, std::uint64_t seed, int clips, int size,
                    int timestamps, double noise, double motion, bool clamp_boundary) {
  PhantomSpec spec;
  spec.size = size;
  spec.timestamps = timestamps;
  spec.noise_sigma = noise;
  spec.motion_amp = motion;
  spec.cyclic = !clamp_boundary;
  // clip counts are bookkeeping for the spec; the archive holds them all
  spec.val_clips = clips / 5;
  spec.train_clips = clips - spec.val_clips;
  if (spec.total_clips() % timestamps != 0)
    throw std::invalid_argument("gen-phantom: --clips must be divisible by --timestamps");
  const Dataset ds = generate_phantom(spec, seed);
  save_archive(out, ds);
  std::cout << "wrote " << ds.size() << " clips (" << spec.subjects() << " subjects, "
            << size << "x" << size << ") to " << out << "\n";
  return 0;
}

std::pair<DeUNet, Checkpoint> net_from_checkpoint(const std::string& path) {
  Checkpoint ckpt = load_checkpoint(path);
  auto [cfg, variant] = NetConfig::from_metadata(ckpt.metadata);
  DeUNet net(cfg, variant);
  apply_checkpoint(net.params(), ckpt);
  return {std::move(net), std::move(ckpt)};
}

int cmd_train(const std::string& config_path, const std::string& out_dir) {
  const RunConfig cfg = RunConfig::parse_file(config_path);
  if (cfg.data.empty()) throw std::invalid_argument("train: config must set data=");
  const Dataset ds = load_archive(cfg.data, cfg.size);
  const auto folds = kfold_split(ds, cfg.train.folds, cfg.train.seed);
  const auto& [train_idx, val_idx] = folds[static_cast<size_t>(cfg.fold)];

  DeUNet net(cfg.net, cfg.variant);
  net.params().init(cfg.train.seed);
  std::cout << "training variant=" << to_string(cfg.variant) << " fold=" << cfg.fold
            << " train=" << train_idx.size() << " val=" << val_idx.size()
            << " params=" << net.params().scalar_count() << "\n";
  const TrainResult res =
      train(net, ds, train_idx, val_idx, cfg.train, [](const EpochStat& e) {
        std::cout << "epoch " << e.epoch << " loss " << e.train_loss << " val_dice "
                  << e.val_dice << std::endl;
      });

  fs::create_directories(out_dir);
  const std::string provenance = cfg.to_text();
  atomic_write_file((fs::path(out_dir) / "config.txt").string(), provenance);
  atomic_write_file((fs::path(out_dir) / "history.csv").string(), res.history_csv());
  save_checkpoint((fs::path(out_dir) / "last.ckpt").string(), net.params(), provenance);
  net.params().restore_values(res.best_values);
  save_checkpoint((fs::path(out_dir) / "best.ckpt").string(), net.params(), provenance);

  std::cout << "best val dice " << res.best_dice << " at epoch " << res.best_epoch << " ("
            << res.history.size() << " epochs run)\n"
            << "wrote " << out_dir << "/{best.ckpt,last.ckpt,history.csv,config.txt}\n";
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_path,
             const std::string& report_path, int size) {
  auto [net, ckpt] = net_from_checkpoint(ckpt_path);
  const Dataset ds = load_archive(data_path, size);
  MetricReport report;
  for (const ClipSample& s : ds.samples) {
    const SegmentationMask pred = predict_mask(net.forward(s.clip), s.spacing);
    for (int cls = 1; cls < kNumClasses; ++cls)
      report.add_case(cls, s.phase, dice(pred, s.mask, cls), hausdorff(pred, s.mask, cls),
                      assd(pred, s.mask, cls));
  }
  const std::string csv = report.to_csv(to_string(net.variant()));
  atomic_write_file(report_path, csv);
  std::cout << csv << "mean foreground dice: " << report.mean_dice() << "\n"
            << "wrote " << report_path << "\n";
  return 0;
}

int cmd_infer(const std::string& ckpt_path, const std::string& data_path,
              const std::string& out_dir, int size) {
  auto [net, ckpt] = net_from_checkpoint(ckpt_path);
  const Dataset ds = load_archive(data_path, size);
  fs::create_directories(out_dir);
  for (const ClipSample& s : ds.samples) {
    const SegmentationMask pred = predict_mask(net.forward(s.clip), s.spacing);
    char name[64];
    std::snprintf(name, sizeof(name), "mask_s%03u_t%03u", s.subject, s.timestamp);
    write_mask_png((fs::path(out_dir) / (std::string(name) + ".png")).string(), pred);
    write_mask_csv((fs::path(out_dir) / (std::string(name) + ".csv")).string(), pred);
  }
  std::cout << "wrote " << ds.size() << " mask pairs to " << out_dir << "\n";
  return 0;
}

int cmd_check(int seeds) {
  CheckOptions opt;
  opt.gradient_seeds = seeds;
  const auto results = run_all_checks(opt);
  int failed = 0;
  for (const CheckResult& r : results) {
    std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.name << " — " << r.detail << "\n";
    if (!r.pass) ++failed;
  }
  std::cout << (failed == 0 ? "all checks passed\n"
                            : std::to_string(failed) + " check(s) failed\n");
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DeU-Net: spatio-temporal cardiac MRI video segmentation"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-phantom", "generate a synthetic clip archive");
  std::string gen_out = "phantom.dseg";
  std::uint64_t gen_seed = 0;
  int gen_clips = 50, gen_size = 64, gen_timestamps = 5;
  double gen_noise = 0.10, gen_motion = 0.14;
  bool gen_clamp = false;
  gen->add_option("--out", gen_out, "output archive path");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--clips", gen_clips, "total clips (divisible by --timestamps)");
  gen->add_option("--size", gen_size, "square image side");
  gen->add_option("--timestamps", gen_timestamps, "cycle length per subject");
  gen->add_option("--noise", gen_noise, "per-frame Gaussian noise sigma");
  gen->add_option("--motion", gen_motion, "fractional wall-motion amplitude");
  gen->add_flag("--clamp-boundary", gen_clamp,
                "replicate edge frames instead of cyclic clip indexing");

  auto* tr = app.add_subcommand("train", "train from a key=value run config");
  std::string tr_config, tr_out = "run";
  tr->add_option("--config", tr_config, "run config file")->required();
  tr->add_option("--out", tr_out, "output directory");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on an archive");
  std::string ev_ckpt, ev_data, ev_report = "report.csv";
  int ev_size = 0;
  ev->add_option("--checkpoint", ev_ckpt)->required();
  ev->add_option("--data", ev_data)->required();
  ev->add_option("--report", ev_report, "output CSV path");
  ev->add_option("--size", ev_size, "resize frames on load (0 = native)");

  auto* in = app.add_subcommand("infer", "export predicted masks as PNG and CSV");
  std::string in_ckpt, in_data, in_out = "masks";
  int in_size = 0;
  in->add_option("--checkpoint", in_ckpt)->required();
  in->add_option("--data", in_data)->required();
  in->add_option("--out", in_out, "output directory");
  in->add_option("--size", in_size, "resize frames on load (0 = native)");

  auto* ck = app.add_subcommand("check", "run the oracle and gradient verification suite");
  int ck_seeds = 20;
  ck->add_option("--seeds", ck_seeds, "seeds per gradient check");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed())
      return cmd_gen_phantom(gen_out, gen_seed, gen_clips, gen_size, gen_timestamps,
                             gen_noise, gen_motion, gen_clamp);
    if (tr->parsed()) return cmd_train(tr_config, tr_out);
    if (ev->parsed()) return cmd_eval(ev_ckpt, ev_data, ev_report, ev_size);
    if (in->parsed()) return cmd_infer(in_ckpt, in_data, in_out, in_size);
    if (ck->parsed()) return cmd_check(ck_seeds);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
