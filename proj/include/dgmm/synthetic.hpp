#pragma once

#include <cmath>
#include <filesystem>
#include <limits>
#include <string>
#include <utility>

#include "dgmm/dataset.hpp"
#include "dgmm/mlp.hpp"
#include "dgmm/model_io.hpp"
#include "dgmm/random.hpp"

namespace dgmm {

// Defaults mirror the handwritten-digit layout: 100 instances (90 train),
// 28x28 pixels, 3092 voxels, 10 shared factors.
struct SyntheticConfig {
  Index n_train = 90;
  Index n_test = 10;
  Index d1 = 784;
  Index d2 = 3092;
  Index k = 10;
  Index kbar = 10;
  Index image_width = 28;
  Index image_height = 28;
  // Noise precisions; infinity selects the noiseless limit.
  double voxel_noise_precision = 10.0;
  double pixel_noise_precision = 100.0;
  std::string map_kind = "linear";  // "linear" | "mlp"
  std::uint64_t seed = 1;

  void validate() const {
    if (n_train < 1 || n_test < 0 || d1 < 1 || d2 < 1 || k < 1 || kbar < 1) {
      throw InvalidConfig("synthetic: dims must be >= 1");
    }
    if (image_width * image_height != d1) {
      throw InvalidConfig("synthetic: image_width*image_height must equal d1");
    }
    if (!(voxel_noise_precision > 0.0) || !(pixel_noise_precision > 0.0)) {
      throw InvalidConfig("synthetic: noise precisions must be > 0");
    }
    if (map_kind != "linear" && map_kind != "mlp") {
      throw InvalidConfig("synthetic: map_kind must be linear or mlp");
    }
  }
};

// Everything the generator sampled, for exact oracles downstream.
struct SyntheticGroundTruth {
  Matrix b;        // K x D2
  Matrix h;        // Kbar x D2
  Matrix z;        // N x K (row per instance)
  Matrix zbar;     // N x Kbar
  Matrix map_w;    // D1 x K for the linear map; empty for mlp
  MlpParams map_net;  // fixed seeded net for the mlp map; unused for linear
  Vector tau;      // per-column prior precisions actually drawn
  Vector eta;
  double voxel_noise_precision = 0.0;
  double pixel_noise_precision = 0.0;
};

namespace detail {

// Exp(1) draw; the (1,1) Gamma prior is exponential.
inline double exponential_draw(RngState& rng) {
  double u;
  do {
    u = rng.uniform();
  } while (u <= 0.0);
  return -std::log(u);
}

}  // namespace detail

// Samples the full generative process: z, z̄ ~ N(0,I); B, H columns from the
// ARD prior with (1,1) hyperparameters; y = B^T z + H^T z̄ + noise;
// x = map(z) + pixel noise. Bit-for-bit reproducible per seed.
inline std::pair<TwoViewDataset, SyntheticGroundTruth> generate_synthetic(
    const SyntheticConfig& cfg) {
  cfg.validate();
  RngState rng(cfg.seed);
  const Index n = cfg.n_train + cfg.n_test;

  SyntheticGroundTruth truth;
  truth.voxel_noise_precision = cfg.voxel_noise_precision;
  truth.pixel_noise_precision = cfg.pixel_noise_precision;

  truth.tau.resize(cfg.d2);
  truth.eta.resize(cfg.d2);
  truth.b.resize(cfg.k, cfg.d2);
  truth.h.resize(cfg.kbar, cfg.d2);
  for (Index j = 0; j < cfg.d2; ++j) {
    truth.tau[j] = detail::exponential_draw(rng);
    truth.b.col(j) = rng.gaussian_vector(cfg.k) / std::sqrt(truth.tau[j]);
    truth.eta[j] = detail::exponential_draw(rng);
    truth.h.col(j) = rng.gaussian_vector(cfg.kbar) / std::sqrt(truth.eta[j]);
  }

  truth.z = rng.gaussian_matrix(n, cfg.k);
  truth.zbar = rng.gaussian_matrix(n, cfg.kbar);

  TwoViewDataset ds;
  ds.y = truth.z * truth.b + truth.zbar * truth.h;
  if (std::isfinite(cfg.voxel_noise_precision)) {
    ds.y += rng.gaussian_matrix(n, cfg.d2) /
            std::sqrt(cfg.voxel_noise_precision);
  }

  if (cfg.map_kind == "linear") {
    // Orthonormal columns scaled so pixels come out near unit variance.
    const Matrix g = rng.gaussian_matrix(cfg.d1, cfg.k);
    const Eigen::HouseholderQR<Matrix> qr(g);
    truth.map_w = Matrix(qr.householderQ() * Matrix::Identity(cfg.d1, cfg.k)) *
                  std::sqrt(static_cast<double>(cfg.d1) /
                            static_cast<double>(cfg.k));
    ds.x = truth.z * truth.map_w.transpose();
  } else {
    truth.map_net = MlpParams::init(
        {cfg.k, 2 * cfg.k, cfg.d1}, rng, /*logistic_mean=*/true);
    ds.x = mlp_forward(truth.map_net, truth.z).mu;
  }
  if (std::isfinite(cfg.pixel_noise_precision)) {
    ds.x += rng.gaussian_matrix(n, cfg.d1) /
            std::sqrt(cfg.pixel_noise_precision);
  }
  if (cfg.map_kind == "mlp") {
    ds.x = ds.x.cwiseMax(0.0).cwiseMin(1.0);
  }

  ds.train_rows.resize(cfg.n_train);
  ds.test_rows.resize(cfg.n_test);
  for (Index i = 0; i < cfg.n_train; ++i) ds.train_rows[i] = i;
  for (Index i = 0; i < cfg.n_test; ++i) ds.test_rows[i] = cfg.n_train + i;

  ds.manifest.name = "synthetic-" + cfg.map_kind;
  ds.manifest.n = n;
  ds.manifest.d1 = cfg.d1;
  ds.manifest.d2 = cfg.d2;
  ds.manifest.image_width = cfg.image_width;
  ds.manifest.image_height = cfg.image_height;
  ds.manifest.pixel_range = cfg.map_kind == "mlp" ? "unit" : "real";
  ds.manifest.seed = cfg.seed;
  ds.manifest.map_kind = cfg.map_kind;
  ds.validate();
  return {std::move(ds), std::move(truth)};
}

inline void save_ground_truth(const SyntheticGroundTruth& truth,
                              const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_matrix_csv(dir / "B.csv", truth.b);
  write_matrix_csv(dir / "H.csv", truth.h);
  write_matrix_csv(dir / "Z.csv", truth.z);
  write_matrix_csv(dir / "Zbar.csv", truth.zbar);
  if (truth.map_w.size() > 0) write_matrix_csv(dir / "map_w.csv", truth.map_w);
  KeyValueMap kv;
  kv["voxel_noise_precision"] = format_double(truth.voxel_noise_precision);
  kv["pixel_noise_precision"] = format_double(truth.pixel_noise_precision);
  if (truth.map_net.layer_sizes.size() >= 2) {
    save_mlp(truth.map_net, dir / "map_net");
    kv["map_net_sizes"] = detail::join_sizes(truth.map_net.layer_sizes);
    kv["map_net_logistic"] = truth.map_net.logistic_mean ? "1" : "0";
  }
  write_key_value_file(dir / "truth_manifest.txt", kv);
}

inline SyntheticGroundTruth load_ground_truth(
    const std::filesystem::path& dir) {
  SyntheticGroundTruth truth;
  truth.b = read_matrix_csv(dir / "B.csv");
  truth.h = read_matrix_csv(dir / "H.csv");
  truth.z = read_matrix_csv(dir / "Z.csv");
  truth.zbar = read_matrix_csv(dir / "Zbar.csv");
  if (std::filesystem::exists(dir / "map_w.csv")) {
    truth.map_w = read_matrix_csv(dir / "map_w.csv");
  }
  const KeyValueMap kv = read_key_value_file(dir / "truth_manifest.txt");
  truth.voxel_noise_precision =
      parse_double(kv.at("voxel_noise_precision"), "truth_manifest");
  truth.pixel_noise_precision =
      parse_double(kv.at("pixel_noise_precision"), "truth_manifest");
  if (kv.count("map_net_sizes")) {
    truth.map_net =
        load_mlp(dir / "map_net", detail::parse_sizes(kv.at("map_net_sizes")),
                 kv.at("map_net_logistic") == "1");
  }
  return truth;
}

}  // namespace dgmm
