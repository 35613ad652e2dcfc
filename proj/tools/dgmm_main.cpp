// Command-line front end: generate | train | reconstruct | evaluate.
// Every run writes a resolved-config snapshot and its seed into the output
// directory so it can be replayed bit-for-bit.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "dgmm/dgmm.hpp"

namespace fs = std::filesystem;
using namespace dgmm;

namespace {

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string model_dir;
  std::string dataset_dir;
  std::string recon_path;
};

RunConfig load_config(const CommonArgs& args) {
  if (args.config_path.empty()) throw ConfigError("--config is required");
  RunConfig cfg = parse_run_config(args.config_path);
  if (args.seed) {
    cfg.seed = *args.seed;
    cfg.generate.seed = *args.seed;
  }
  if (!args.out_dir.empty()) cfg.output_dir = args.out_dir;
  if (!args.model_dir.empty()) cfg.model_path = args.model_dir;
  if (!args.dataset_dir.empty()) cfg.dataset_path = args.dataset_dir;
  if (!args.recon_path.empty()) cfg.reconstruction_path = args.recon_path;
  return cfg;
}

void write_snapshot(const fs::path& out_dir, const RunConfig& cfg,
                    const KeyValueMap& extra) {
  fs::create_directories(out_dir);
  KeyValueMap kv = cfg.to_kv();
  for (const auto& [k, v] : extra) kv[k] = v;
  write_key_value_file(out_dir / "config_snapshot.txt", kv);
}

int cmd_generate(const CommonArgs& args) {
  RunConfig cfg = load_config(args);
  const fs::path out = cfg.output_dir;
  auto [ds, truth] = generate_synthetic(cfg.generate);
  save_dataset(ds, out);
  save_ground_truth(truth, out / "truth");
  write_snapshot(out, cfg, {{"seed", std::to_string(cfg.generate.seed)}});
  std::cout << "dataset written to " << out.string() << " (N=" << ds.n()
            << ", D1=" << ds.d1() << ", D2=" << ds.d2() << ")\n";
  return 0;
}

// Keeps only the given voxel columns, in order.
TwoViewDataset subset_voxels(const TwoViewDataset& ds,
                             const std::vector<Index>& keep) {
  TwoViewDataset out = ds;
  out.y.resize(ds.y.rows(), static_cast<Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) {
    out.y.col(static_cast<Index>(c)) = ds.y.col(keep[c]);
  }
  out.manifest.d2 = out.y.cols();
  return out;
}

int cmd_train(const CommonArgs& args) {
  RunConfig cfg = load_config(args);
  if (cfg.dataset_path.empty()) throw ConfigError("dataset.path is required");
  TwoViewDataset ds = load_dataset(cfg.dataset_path);
  if (cfg.zscore) ds = zscore_voxels(ds);

  const fs::path out = cfg.output_dir;
  fs::create_directories(out);

  std::vector<Index> selected;
  if (cfg.screen_voxels) {
    const VoxelScreeningReport rep = screen_voxels(
        ds.x_train(), ds.y_train(), cfg.screen_folds, cfg.screen_ridge);
    write_screening_report_csv(out / "screening.csv", rep);
    if (rep.selected.empty()) {
      throw InvalidConfig("voxel screening kept no voxels");
    }
    selected = rep.selected;
    ds = subset_voxels(ds, selected);
    std::cout << "screening kept " << selected.size() << " of "
              << rep.r2.size() << " voxels\n";
  }

  const TrainResult res = train(ds, cfg.to_train_config());

  ModelBundle bundle;
  bundle.recog = res.recog;
  bundle.gen = res.gen;
  bundle.vb = res.vb;
  bundle.d1 = ds.d1();
  bundle.d2 = ds.d2();
  bundle.seed = cfg.seed;
  bundle.steps = res.steps;
  bundle.status = to_string(res.status);
  bundle.selected_voxels = selected;
  save_model(bundle, out / "model");
  write_training_log_csv(out / "training_log.csv", res.log);
  write_snapshot(out, cfg,
                 {{"seed", std::to_string(cfg.seed)},
                  {"train.status", to_string(res.status)},
                  {"train.epochs_run", std::to_string(res.log.size())}});

  std::cout << "model written to " << (out / "model").string() << " after "
            << res.log.size() << " epochs (" << to_string(res.status)
            << ")\n";
  if (res.status == TrainStatus::diverged) {
    std::cerr << "ERROR NonFiniteLoss: training diverged; last finite "
                 "checkpoint retained\n";
    return 1;
  }
  return 0;
}

int cmd_reconstruct(const CommonArgs& args) {
  RunConfig cfg = load_config(args);
  if (cfg.model_path.empty()) throw ConfigError("model.path is required");
  if (cfg.dataset_path.empty()) throw ConfigError("dataset.path is required");

  const ModelBundle model = load_model(cfg.model_path);
  TwoViewDataset ds = load_dataset(cfg.dataset_path);
  if (cfg.zscore) ds = zscore_voxels(ds);
  if (!model.selected_voxels.empty()) {
    for (Index j : model.selected_voxels) {
      if (j < 0 || j >= ds.d2()) {
        throw DimensionMismatch(
            "model's screened voxel " + std::to_string(j) +
            " is out of range for this dataset");
      }
    }
    ds = subset_voxels(ds, model.selected_voxels);
  }

  if (model.d1 != ds.d1() || model.d2 != ds.d2()) {
    throw DimensionMismatch(
        "model expects D1=" + std::to_string(model.d1) + ", D2=" +
        std::to_string(model.d2) + " but dataset has D1=" +
        std::to_string(ds.d1()) + ", D2=" + std::to_string(ds.d2()));
  }
  if (model.vb.n() != static_cast<Index>(ds.train_rows.size())) {
    throw DimensionMismatch(
        "model was trained on " + std::to_string(model.vb.n()) +
        " rows but the dataset train split has " +
        std::to_string(ds.train_rows.size()));
  }

  const Matrix xtr = ds.x_train();
  const Matrix ytr = ds.y_train();
  const RecognitionOutput ro = forward_recognition(model.recog, xtr);

  ReconstructOptions opt;
  opt.knn = std::min<Index>(cfg.predict_k, ytr.rows());
  opt.bandwidth = resolve_bandwidth(cfg.predict_t);
  opt.mc_samples = cfg.predict_mc_samples;

  const std::uint64_t seed = args.seed ? *args.seed : cfg.seed;
  KeyValueMap extra{{"seed", std::to_string(seed)}};

  if (cfg.predict_rho == "cv") {
    const RhoSelection sel = select_rho_cv(
        model.gen, model.vb.q_b.mean, model.vb.q_h.mean,
        model.vb.gamma_mean(), ro.mu_z, xtr, ytr, opt, cfg.predict_cv_folds,
        seed);
    opt.rho = sel.rho;
    extra["predict.rho_chosen"] = format_double(sel.rho);
    for (const auto& [rho, score] : sel.grid) {
      extra["predict.rho_cv." + format_double(rho)] = format_double(score);
    }
  } else {
    opt.rho = detail::config_double(cfg.predict_rho, "predict.rho");
    if (opt.rho < 0.0) throw ConfigError("predict.rho must be >= 0 or 'cv'");
    extra["predict.rho_chosen"] = format_double(opt.rho);
  }

  const Predictor pred(model.gen, model.vb.q_b.mean, model.vb.q_h.mean,
                       model.vb.gamma_mean(), ro.mu_z, ytr, opt);
  extra["predict.bandwidth_used"] = format_double(pred.options().bandwidth);

  const Matrix recon = pred.reconstruct_all(ds.y_test(), seed);

  const fs::path out = cfg.output_dir;
  fs::create_directories(out);
  write_matrix_csv(out / "reconstructions.csv", recon);

  if (ds.manifest.image_width == ds.manifest.image_height) {
    const bool unit = ds.manifest.pixel_range == "unit";
    for (Index i = 0; i < recon.rows(); ++i) {
      const Matrix img =
          vector_to_image(recon.row(i).transpose(), ds.manifest.image_width,
                          ds.manifest.image_height);
      char name[32];
      std::snprintf(name, sizeof(name), "recon_%04lld.pgm",
                    static_cast<long long>(i));
      if (unit) {
        write_pgm(out / name, img, 0.0, 1.0);
      } else {
        write_pgm(out / name, img, img.minCoeff(), img.maxCoeff());
      }
    }
  }
  write_snapshot(out, cfg, extra);
  std::cout << "reconstructions written to "
            << (out / "reconstructions.csv").string() << " (" << recon.rows()
            << " rows)\n";
  return 0;
}

int cmd_evaluate(const CommonArgs& args) {
  RunConfig cfg = load_config(args);
  if (cfg.reconstruction_path.empty()) {
    throw ConfigError("reconstruction.path is required");
  }
  if (cfg.dataset_path.empty()) throw ConfigError("dataset.path is required");

  const TwoViewDataset ds = load_dataset(cfg.dataset_path);
  const Matrix recon = read_matrix_csv(cfg.reconstruction_path);
  const Matrix truth = ds.x_test();
  if (recon.rows() != truth.rows() || recon.cols() != truth.cols()) {
    throw DimensionMismatch(
        "reconstructions are " + std::to_string(recon.rows()) + "x" +
        std::to_string(recon.cols()) + " but the test split is " +
        std::to_string(truth.rows()) + "x" + std::to_string(truth.cols()));
  }

  const double range = ds.manifest.pixel_range == "unit"
                           ? 1.0
                           : truth.maxCoeff() - truth.minCoeff();
  const MetricReport rep = evaluate_reconstructions(
      truth, recon, ds.manifest.image_width, ds.manifest.image_height, range);

  const fs::path out = cfg.output_dir;
  fs::create_directories(out);
  write_metric_report_csv(out / "metrics.csv", rep);
  {
    std::ofstream summary(out / "summary.txt");
    summary << rep.summary();
  }
  write_snapshot(out, cfg, {{"seed", std::to_string(cfg.seed)}});
  std::cout << rep.summary();
  return 0;
}

int exit_code_for(const Error& e) {
  const std::string& kind = e.kind();
  if (kind == "ConfigError" || kind == "InvalidConfig") return 2;
  if (kind == "DimensionMismatch" || kind == "ShapeMismatch" ||
      kind == "ShapeMismatchWithManifest") {
    return 3;
  }
  if (kind == "IoError" || kind == "MissingFile" || kind == "NonFiniteEntry") {
    return 4;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deep generative multiview model: cross-view reconstruction"};
  app.require_subcommand(1);

  CommonArgs args;
  const auto add_common = [&args](CLI::App* cmd) {
    cmd->add_option("--config", args.config_path, "run configuration file");
    cmd->add_option("--seed", args.seed, "seed override");
    cmd->add_option("--out", args.out_dir, "output directory override");
    cmd->add_option("--model", args.model_dir, "model directory override");
    cmd->add_option("--dataset", args.dataset_dir,
                    "dataset directory override");
    cmd->add_option("--recon", args.recon_path,
                    "reconstructions CSV override");
  };

  CLI::App* generate = app.add_subcommand(
      "generate", "sample a synthetic two-view dataset with ground truth");
  CLI::App* train_cmd =
      app.add_subcommand("train", "fit the model to a dataset");
  CLI::App* reconstruct = app.add_subcommand(
      "reconstruct", "reconstruct test images from their voxel vectors");
  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "score reconstructions against the dataset test split");
  for (CLI::App* cmd : {generate, train_cmd, reconstruct, evaluate}) {
    add_common(cmd);
  }

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) return cmd_generate(args);
    if (train_cmd->parsed()) return cmd_train(args);
    if (reconstruct->parsed()) return cmd_reconstruct(args);
    if (evaluate->parsed()) return cmd_evaluate(args);
  } catch (const Error& e) {
    std::cerr << "ERROR " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "ERROR Internal: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
