#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "dgmm/linalg.hpp"
#include "dgmm/metrics.hpp"
#include "dgmm/mlp.hpp"
#include "dgmm/parallel.hpp"
#include "dgmm/random.hpp"

namespace dgmm {

// k-nearest-neighbour affinity in voxel space:
// s_i = exp(-||y* - y_i||^2 / (2 t^2)) for neighbours, 0 otherwise.
struct AffinityWeights {
  std::vector<Index> neighbors;  // training-row ids, ascending by distance
  Vector weights;                // aligned with neighbors, each in (0, 1]
  double bandwidth = 1.0;
  Index k = 0;

  double sum() const { return weights.size() ? weights.sum() : 0.0; }
};

inline AffinityWeights affinity(const Vector& y_star, const Matrix& y_train,
                                Index k, double t) {
  if (y_train.rows() == 0) {
    throw EmptyTrainingSet("affinity: no training rows");
  }
  if (y_star.size() != y_train.cols()) {
    throw ShapeMismatch("affinity: y* length != training columns");
  }
  if (k < 1 || k > y_train.rows()) {
    throw InvalidArgument("affinity: k must be in [1, N]");
  }
  if (!(t > 0.0)) throw InvalidArgument("affinity: bandwidth must be > 0");

  // Ties in distance break toward the lower row index.
  std::vector<std::pair<double, Index>> dist;
  dist.reserve(static_cast<std::size_t>(y_train.rows()));
  for (Index i = 0; i < y_train.rows(); ++i) {
    dist.emplace_back(
        (y_train.row(i).transpose() - y_star).squaredNorm(), i);
  }
  std::sort(dist.begin(), dist.end());

  AffinityWeights out;
  out.k = k;
  out.bandwidth = t;
  out.neighbors.resize(static_cast<std::size_t>(k));
  out.weights.resize(k);
  for (Index r = 0; r < k; ++r) {
    out.neighbors[static_cast<std::size_t>(r)] = dist[r].second;
    out.weights[r] = std::exp(-dist[r].first / (2.0 * t * t));
  }
  return out;
}

// Median pairwise Euclidean distance over training rows, the default
// bandwidth heuristic. Rows are subsampled evenly past 1024 to bound the
// O(N^2) pair count; falls back to 1 when every pair coincides.
inline double median_pairwise_distance(const Matrix& y) {
  if (y.rows() < 2) return 1.0;
  const Index cap = 1024;
  std::vector<Index> rows;
  if (y.rows() <= cap) {
    for (Index i = 0; i < y.rows(); ++i) rows.push_back(i);
  } else {
    for (Index r = 0; r < cap; ++r) rows.push_back(r * y.rows() / cap);
  }
  std::vector<double> d2;
  d2.reserve(rows.size() * (rows.size() - 1) / 2);
  for (std::size_t a = 0; a < rows.size(); ++a) {
    for (std::size_t b = a + 1; b < rows.size(); ++b) {
      d2.push_back((y.row(rows[a]) - y.row(rows[b])).squaredNorm());
    }
  }
  const std::size_t mid = d2.size() / 2;
  std::nth_element(d2.begin(), d2.begin() + static_cast<std::ptrdiff_t>(mid),
                   d2.end());
  const double med = std::sqrt(d2[mid]);
  return med > 0.0 ? med : 1.0;
}

// Factored form of T = gamma I - gamma^2 H^T (I + gamma H H^T)^-1 H, which
// equals (H^T H + gamma^-1 I)^-1 by the Woodbury identity. Only the
// Kbar x Kbar inner system is ever factorized; the dense D2 x D2 matrix is
// materialized only for debugging.
class PrecisionSurrogate {
 public:
  PrecisionSurrogate(Matrix h_mean, double gamma_mean)
      : h_(std::move(h_mean)), gamma_(gamma_mean) {
    if (!(gamma_ > 0.0)) {
      throw InvalidArgument("compute_T: gamma mean must be > 0");
    }
    Matrix inner = gamma_ * h_ * h_.transpose();
    inner.diagonal().array() += 1.0;
    inner_llt_.compute(symmetrized(inner));
    if (inner_llt_.info() != Eigen::Success) {
      throw NotPositiveDefinite("compute_T: inner system not SPD");
    }
  }

  Index d2() const { return h_.cols(); }
  double gamma_mean() const { return gamma_; }
  const Matrix& h_mean() const { return h_; }

  // T v without forming T.
  Vector apply(const Vector& v) const {
    if (v.size() != h_.cols()) {
      throw ShapeMismatch("PrecisionSurrogate::apply: length mismatch");
    }
    return gamma_ * v -
           (gamma_ * gamma_) * (h_.transpose() * inner_llt_.solve(h_ * v));
  }

  // B T B^T through the factored form (K x K result).
  Matrix quad_with(const Matrix& b_mean) const {
    if (b_mean.cols() != h_.cols()) {
      throw ShapeMismatch("PrecisionSurrogate::quad_with: D2 mismatch");
    }
    const Matrix bh = b_mean * h_.transpose();  // K x Kbar
    return gamma_ * b_mean * b_mean.transpose() -
           (gamma_ * gamma_) * bh * inner_llt_.solve(bh.transpose());
  }

  Matrix dense() const {
    return gamma_ * Matrix::Identity(h_.cols(), h_.cols()) -
           (gamma_ * gamma_) *
               (h_.transpose() * inner_llt_.solve(h_));
  }

 private:
  Matrix h_;  // Kbar x D2 posterior mean of H
  double gamma_;
  Eigen::LLT<Matrix> inner_llt_;
};

inline PrecisionSurrogate compute_T(const Matrix& h_mean, double gamma_mean) {
  return PrecisionSurrogate(h_mean, gamma_mean);
}

// Posterior-regularized latent Gaussian for a new voxel vector:
//   Sigma = [B T B^T + (1 + rho sum_i s_i) I]^-1
//   mu    = Sigma [B (T y*) + rho sum_i s_i <z_i>]
// with posterior means plugged in for B, H, gamma.
struct RegularizedLatentPosterior {
  Vector mean;
  Matrix covariance;
  double rho = 0.0;
};

inline RegularizedLatentPosterior posterior_latent(
    const Vector& y_star, const Matrix& b_mean, const PrecisionSurrogate& t,
    const Matrix& train_z_means, const AffinityWeights& aff, double rho) {
  if (rho < 0.0) throw InvalidArgument("posterior_latent: rho must be >= 0");
  if (y_star.size() != b_mean.cols()) {
    throw ShapeMismatch("posterior_latent: y* length != D2");
  }
  if (train_z_means.cols() != b_mean.rows()) {
    throw ShapeMismatch("posterior_latent: latent dim mismatch");
  }
  const Index k = b_mean.rows();
  Matrix precision = t.quad_with(b_mean);
  precision.diagonal().array() += 1.0 + rho * aff.sum();

  Vector rhs = b_mean * t.apply(y_star);
  for (std::size_t r = 0; r < aff.neighbors.size(); ++r) {
    rhs += rho * aff.weights[static_cast<Index>(r)] *
           train_z_means.row(aff.neighbors[r]).transpose();
  }

  RegularizedLatentPosterior out;
  out.rho = rho;
  out.covariance = cholesky_solve(precision, Matrix::Identity(k, k));
  out.mean = out.covariance * rhs;
  return out;
}

struct ReconstructOptions {
  Index knn = 10;
  double bandwidth = 0.0;  // <= 0 selects the median-distance heuristic
  double rho = 0.0;
  int mc_samples = 64;
};

struct Reconstruction {
  Vector x_pred;   // mean of the decoded samples
  Vector x_var;    // mean per-pixel variance head, not folded into x_pred
  Matrix samples;  // L x D1 decoded draws
};

// Frozen-model decoder: kNN affinity in voxel space, posterior-regularized
// latent Gaussian, Monte-Carlo decoding through the generative mean head.
class Predictor {
 public:
  Predictor(MlpParams gen, Matrix b_mean, Matrix h_mean, double gamma_mean,
            Matrix train_z_means, Matrix y_train, ReconstructOptions opt)
      : gen_(std::move(gen)),
        b_mean_(std::move(b_mean)),
        t_(std::move(h_mean), gamma_mean),
        train_z_means_(std::move(train_z_means)),
        y_train_(std::move(y_train)),
        opt_(opt) {
    if (y_train_.rows() == 0) {
      throw EmptyTrainingSet("Predictor: no training rows");
    }
    if (y_train_.rows() != train_z_means_.rows()) {
      throw ShapeMismatch("Predictor: Y train rows != latent rows");
    }
    if (opt_.knn < 1) opt_.knn = 1;
    opt_.knn = std::min<Index>(opt_.knn, y_train_.rows());
    if (opt_.bandwidth <= 0.0) {
      opt_.bandwidth = median_pairwise_distance(y_train_);
    }
    if (opt_.mc_samples < 1) {
      throw InvalidArgument("Predictor: mc_samples must be >= 1");
    }
  }

  const ReconstructOptions& options() const { return opt_; }

  RegularizedLatentPosterior latent_posterior(const Vector& y_star) const {
    const AffinityWeights aff =
        affinity(y_star, y_train_, opt_.knn, opt_.bandwidth);
    return posterior_latent(y_star, b_mean_, t_, train_z_means_, aff,
                            opt_.rho);
  }

  Reconstruction reconstruct(const Vector& y_star, RngState& rng) const {
    const RegularizedLatentPosterior post = latent_posterior(y_star);
    const Matrix chol = cholesky_factor(post.covariance);
    const Index k = post.mean.size();
    Matrix latents(opt_.mc_samples, k);
    for (int l = 0; l < opt_.mc_samples; ++l) {
      latents.row(l) =
          (post.mean + chol * rng.gaussian_vector(k)).transpose();
    }
    Reconstruction rec;
    const MlpForward decoded = mlp_forward(gen_, latents);
    rec.samples = decoded.mu;
    rec.x_pred = rec.samples.colwise().mean().transpose();
    rec.x_var =
        decoded.logvar.array().exp().colwise().mean().matrix().transpose();
    return rec;
  }

  // One row per y*; row i uses an independent stream derived from (seed, i),
  // so results are identical for any thread count.
  Matrix reconstruct_all(const Matrix& y_stars, std::uint64_t seed) const {
    Matrix out(y_stars.rows(), gen_.output_dim());
    parallel_for(0, y_stars.rows(), [&](Index i) {
      RngState rng(derive_stream_seed(seed, static_cast<std::uint64_t>(i)));
      out.row(i) =
          reconstruct(y_stars.row(i).transpose(), rng).x_pred.transpose();
    });
    return out;
  }

 private:
  MlpParams gen_;
  Matrix b_mean_;
  PrecisionSurrogate t_;
  Matrix train_z_means_;  // N x K recognition means of the training rows
  Matrix y_train_;
  ReconstructOptions opt_;
};

// Regularization-strength selection by cross-validated reconstruction
// quality on the training split, over the grid 2^-8 ... 2^0. Ties keep the
// smaller rho.
struct RhoSelection {
  double rho = 0.0;
  std::vector<std::pair<double, double>> grid;  // (rho, mean pcc)
};

inline RhoSelection select_rho_cv(const MlpParams& gen, const Matrix& b_mean,
                                  const Matrix& h_mean, double gamma_mean,
                                  const Matrix& train_z_means,
                                  const Matrix& x_train, const Matrix& y_train,
                                  const ReconstructOptions& base, int folds,
                                  std::uint64_t seed) {
  const Index n = y_train.rows();
  if (folds < 2 || n < folds) {
    throw DegenerateFolds("select_rho_cv: need folds >= 2 and N >= folds");
  }
  RhoSelection sel;
  double best = -2.0;
  for (int p = -8; p <= 0; ++p) {
    const double rho = std::ldexp(1.0, p);  // 2^p
    double score_sum = 0.0;
    Index scored = 0;
    for (int f = 0; f < folds; ++f) {
      const Index lo = n * f / folds, hi = n * (f + 1) / folds;
      std::vector<Index> fit_rows;
      for (Index i = 0; i < n; ++i) {
        if (i < lo || i >= hi) fit_rows.push_back(i);
      }
      ReconstructOptions opt = base;
      opt.rho = rho;
      opt.knn = std::min<Index>(opt.knn,
                                static_cast<Index>(fit_rows.size()));
      const Predictor pred(gen, b_mean, h_mean, gamma_mean,
                           train_z_means(fit_rows, Eigen::all),
                           y_train(fit_rows, Eigen::all), opt);
      for (Index i = lo; i < hi; ++i) {
        RngState rng(derive_stream_seed(
            seed, static_cast<std::uint64_t>((p + 8) * 1000 + i)));
        const Reconstruction rec =
            pred.reconstruct(y_train.row(i).transpose(), rng);
        const double score =
            safe_pcc(x_train.row(i).transpose(), rec.x_pred);
        if (std::isfinite(score)) {
          score_sum += score;
          ++scored;
        }
      }
    }
    const double mean_score =
        scored > 0 ? score_sum / static_cast<double>(scored) : -2.0;
    sel.grid.emplace_back(rho, mean_score);
    if (mean_score > best) {
      best = mean_score;
      sel.rho = rho;
    }
  }
  return sel;
}

}  // namespace dgmm
