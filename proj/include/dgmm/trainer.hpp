#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "dgmm/dataset.hpp"
#include "dgmm/elbo.hpp"
#include "dgmm/optimizer.hpp"
#include "dgmm/vb.hpp"

namespace dgmm {

struct TrainConfig {
  Index k = 10;
  Index kbar = 0;  // 0 -> same as k
  std::vector<Index> recog_hidden;
  std::vector<Index> gen_hidden;  // empty -> recog_hidden reversed
  int epochs = 500;
  Index batch_size = 32;  // full batch is used when n_train < 128
  double learning_rate = 1e-3;
  int mc_samples = 1;
  std::uint64_t seed = 0;
  double tol = 1e-5;
  int tol_window = 5;
  OptimizerKind optimizer = OptimizerKind::rmsprop;
  GammaHyper hyper;
  std::vector<SweepStep> sweep_order = default_sweep_order();

  Index kbar_or_default() const { return kbar > 0 ? kbar : k; }
};

struct EpochRecord {
  int epoch = 0;
  double bound = 0.0;
  double lp = 0.0;
  double lx = 0.0;
  double ly = 0.0;
  double gamma_mean = 0.0;
  double wall_ms = 0.0;
};

enum class TrainStatus { max_epochs, converged, diverged };

inline const char* to_string(TrainStatus s) {
  switch (s) {
    case TrainStatus::max_epochs: return "max_epochs";
    case TrainStatus::converged: return "converged";
    case TrainStatus::diverged: return "diverged";
  }
  return "unknown";
}

struct TrainResult {
  MlpParams recog;
  MlpParams gen;
  VbState vb;
  std::vector<EpochRecord> log;
  TrainStatus status = TrainStatus::max_epochs;
  long long steps = 0;  // optimizer steps taken per network
};

// wall_ms is the only non-deterministic column and is kept last so
// reproducibility checks can strip it.
inline void write_training_log_csv(const std::filesystem::path& path,
                                   const std::vector<EpochRecord>& log) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "epoch,bound,lp,lx,ly,gamma_mean,wall_ms\n";
  for (const EpochRecord& r : log) {
    out << r.epoch << ',' << format_double(r.bound) << ','
        << format_double(r.lp) << ',' << format_double(r.lx) << ','
        << format_double(r.ly) << ',' << format_double(r.gamma_mean) << ','
        << format_double(r.wall_ms) << '\n';
  }
}

// Alternates one epoch of minibatch gradient steps on the networks with one
// conjugate sweep over the voxel-side factors, per epoch, until the epoch
// bound settles or the epoch budget runs out. A non-finite loss aborts the
// run and the last end-of-epoch state is returned (status: diverged).
inline TrainResult train(const TwoViewDataset& data, const TrainConfig& cfg) {
  if (data.train_rows.size() < 2) {
    throw InvalidConfig("train: need at least 2 training rows");
  }
  if (cfg.k < 1 || cfg.epochs < 0 || cfg.mc_samples < 1 ||
      cfg.batch_size < 1) {
    throw InvalidConfig("train: bad config values");
  }
  data.validate();

  const Matrix xtr = data.x_train();
  const Matrix ytr = data.y_train();
  const Index n = xtr.rows();
  const Index kbar = cfg.kbar_or_default();

  RngState rng(cfg.seed);

  std::vector<Index> recog_sizes;
  recog_sizes.push_back(xtr.cols());
  recog_sizes.insert(recog_sizes.end(), cfg.recog_hidden.begin(),
                     cfg.recog_hidden.end());
  recog_sizes.push_back(cfg.k);

  std::vector<Index> gen_hidden = cfg.gen_hidden;
  if (gen_hidden.empty()) {
    gen_hidden.assign(cfg.recog_hidden.rbegin(), cfg.recog_hidden.rend());
  }
  std::vector<Index> gen_sizes;
  gen_sizes.push_back(cfg.k);
  gen_sizes.insert(gen_sizes.end(), gen_hidden.begin(), gen_hidden.end());
  gen_sizes.push_back(xtr.cols());

  TrainResult res;
  res.recog = MlpParams::init(recog_sizes, rng);
  res.gen = MlpParams::init(gen_sizes, rng,
                            data.manifest.pixel_range == "unit");
  res.vb = VbState::init(cfg.k, kbar, n, ytr.cols(), cfg.hyper, rng);

  OptimizerState opt_recog =
      OptimizerState::for_params(res.recog, cfg.learning_rate);
  OptimizerState opt_gen =
      OptimizerState::for_params(res.gen, cfg.learning_rate);
  opt_recog.kind = cfg.optimizer;
  opt_gen.kind = cfg.optimizer;

  const Index batch = n < 128 ? n : cfg.batch_size;
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;

  // Last finite checkpoint, refreshed at every epoch end.
  MlpParams ckpt_recog = res.recog;
  MlpParams ckpt_gen = res.gen;
  VbState ckpt_vb = res.vb;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    rng.shuffle(order);

    // <H>^T<z̄_i> rows and <B>, <gamma> are frozen over the gradient pass;
    // the sweep refreshes them afterwards.
    const Matrix h_zbar = res.vb.q_zbar.mean * res.vb.q_h.mean;
    const double gamma_mean = res.vb.gamma_mean();

    EpochRecord rec;
    rec.epoch = epoch;
    try {
      for (Index start = 0; start < n; start += batch) {
        const Index stop = std::min(n, start + batch);
        std::vector<Index> rows(order.begin() + start, order.begin() + stop);
        const Matrix xb = xtr(rows, Eigen::all);
        const Matrix yb = ytr(rows, Eigen::all);
        const Matrix hb = h_zbar(rows, Eigen::all);
        const VbBatchView view{res.vb.q_b.mean, hb, gamma_mean};
        const ElboGradResult g = elbo_minibatch_grad(
            res.recog, res.gen, xb, yb, view, cfg.mc_samples, rng);
        optimizer_step(res.recog, g.recog, opt_recog);
        optimizer_step(res.gen, g.gen, opt_gen);
        rec.lp += g.terms.lp;
        rec.lx += g.terms.lx;
        rec.ly += g.terms.ly;
      }

      const RecognitionOutput recog_out = forward_recognition(res.recog, xtr);
      if (!recog_out.mu_z.allFinite() || !recog_out.var_z.allFinite()) {
        throw NonFiniteLoss("train: recognition output diverged");
      }
      conjugate_sweep(res.vb, recog_out, ytr, cfg.sweep_order);
      if (!std::isfinite(res.vb.gamma_mean()) ||
          !(res.vb.gamma_mean() > 0.0)) {
        throw NonFiniteLoss("train: noise precision diverged");
      }
    } catch (const NonFiniteLoss&) {
      res.recog = ckpt_recog;
      res.gen = ckpt_gen;
      res.vb = ckpt_vb;
      res.status = TrainStatus::diverged;
      break;
    }

    rec.bound = rec.lp + rec.lx + rec.ly;
    rec.gamma_mean = res.vb.gamma_mean();
    rec.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    res.log.push_back(rec);

    ckpt_recog = res.recog;
    ckpt_gen = res.gen;
    ckpt_vb = res.vb;
    res.steps = opt_recog.step;

    if (cfg.tol > 0.0 &&
        static_cast<int>(res.log.size()) > cfg.tol_window) {
      const double ref =
          res.log[res.log.size() - 1 - cfg.tol_window].bound;
      const double rel =
          std::abs(rec.bound - ref) / std::max(1.0, std::abs(ref));
      if (rel < cfg.tol) {
        res.status = TrainStatus::converged;
        break;
      }
    }
  }
  return res;
}

}  // namespace dgmm
