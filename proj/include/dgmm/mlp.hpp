#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dgmm/errors.hpp"
#include "dgmm/linalg.hpp"
#include "dgmm/random.hpp"

namespace dgmm {

// Log-variance head outputs are clamped to this range before exponentiation,
// which bounds every variance to [e^-10, e^10] and keeps forward passes
// finite for any sane input.
inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 10.0;

// Multilayer perceptron with tanh hidden layers and two affine output heads
// producing (mu, log-variance). Houses both the recognition network
// x -> (mu_z, sigma2_z) and the generative network z -> (mu_x, sigma2_x).
// An empty hidden chain (layer_sizes = {in, out}) degenerates to a pair of
// affine maps, i.e. a linear-Gaussian observation model.
struct MlpParams {
  std::vector<Index> layer_sizes;  // input, hidden..., output
  std::vector<Matrix> weights;     // weights[l]: sizes[l] x sizes[l+1]
  std::vector<Vector> biases;
  Matrix mu_weight;  // last hidden width x output
  Vector mu_bias;
  Matrix logvar_weight;
  Vector logvar_bias;
  bool logistic_mean = false;  // squash the mean head into (0,1) for
                               // pixel data declared bounded in [0,1]

  Index input_dim() const { return layer_sizes.front(); }
  Index output_dim() const { return layer_sizes.back(); }
  std::size_t hidden_count() const { return layer_sizes.size() - 2; }

  // Zero-mean normal init with std 1/sqrt(fan-in); biases start at zero.
  static MlpParams init(std::vector<Index> sizes, RngState& rng,
                        bool logistic_mean = false) {
    if (sizes.size() < 2) {
      throw InvalidArgument("MlpParams: need at least input and output size");
    }
    for (Index s : sizes) {
      if (s < 1) throw InvalidArgument("MlpParams: layer sizes must be >= 1");
    }
    MlpParams p;
    p.layer_sizes = std::move(sizes);
    p.logistic_mean = logistic_mean;
    const std::size_t n_hidden = p.layer_sizes.size() - 2;
    for (std::size_t l = 0; l < n_hidden; ++l) {
      const Index in = p.layer_sizes[l], out = p.layer_sizes[l + 1];
      p.weights.push_back(rng.gaussian_matrix(in, out) / std::sqrt(double(in)));
      p.biases.push_back(Vector::Zero(out));
    }
    const Index last = p.layer_sizes[p.layer_sizes.size() - 2];
    const Index out = p.layer_sizes.back();
    const double scale = 1.0 / std::sqrt(double(last));
    p.mu_weight = rng.gaussian_matrix(last, out) * scale;
    p.mu_bias = Vector::Zero(out);
    p.logvar_weight = rng.gaussian_matrix(last, out) * scale;
    p.logvar_bias = Vector::Zero(out);
    return p;
  }
};

// Per-parameter tensors mirroring MlpParams, used for gradients and for
// optimizer accumulators.
struct MlpGrads {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  Matrix mu_weight;
  Vector mu_bias;
  Matrix logvar_weight;
  Vector logvar_bias;

  static MlpGrads zeros_like(const MlpParams& p) {
    MlpGrads g;
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
      g.weights.push_back(Matrix::Zero(p.weights[l].rows(), p.weights[l].cols()));
      g.biases.push_back(Vector::Zero(p.biases[l].size()));
    }
    g.mu_weight = Matrix::Zero(p.mu_weight.rows(), p.mu_weight.cols());
    g.mu_bias = Vector::Zero(p.mu_bias.size());
    g.logvar_weight = Matrix::Zero(p.logvar_weight.rows(), p.logvar_weight.cols());
    g.logvar_bias = Vector::Zero(p.logvar_bias.size());
    return g;
  }

  void scale(double a) {
    for (auto& w : weights) w *= a;
    for (auto& b : biases) b *= a;
    mu_weight *= a;
    mu_bias *= a;
    logvar_weight *= a;
    logvar_bias *= a;
  }
};

// Forward cache: batch rows are instances.
struct MlpForward {
  std::vector<Matrix> hidden;  // hidden[0] = input, then tanh activations
  Matrix mu;                   // N x out, post-logistic when enabled
  Matrix logvar;               // N x out, clamped
  Matrix logvar_raw;           // pre-clamp, for the gradient mask
};

inline MlpForward mlp_forward(const MlpParams& p, const Matrix& x) {
  if (x.cols() != p.input_dim()) {
    throw ShapeMismatch("mlp_forward: input has " + std::to_string(x.cols()) +
                        " columns, network expects " +
                        std::to_string(p.input_dim()));
  }
  MlpForward f;
  f.hidden.reserve(p.weights.size() + 1);
  f.hidden.push_back(x);
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    Matrix a = (f.hidden.back() * p.weights[l]).rowwise() +
               p.biases[l].transpose();
    f.hidden.push_back(a.array().tanh().matrix());
  }
  const Matrix& last = f.hidden.back();
  f.mu = (last * p.mu_weight).rowwise() + p.mu_bias.transpose();
  if (p.logistic_mean) {
    f.mu = (1.0 / (1.0 + (-f.mu).array().exp())).matrix();
  }
  f.logvar_raw = (last * p.logvar_weight).rowwise() + p.logvar_bias.transpose();
  f.logvar = f.logvar_raw.cwiseMax(kLogVarMin).cwiseMin(kLogVarMax);
  return f;
}

// Accumulates parameter gradients into `g` and returns dL/dinput.
// d_mu and d_logvar are gradients w.r.t. the head outputs as the caller sees
// them (post-logistic, post-clamp).
inline Matrix mlp_backward(const MlpParams& p, const MlpForward& f,
                           const Matrix& d_mu, const Matrix& d_logvar,
                           MlpGrads& g) {
  require_same_shape(d_mu, f.mu, "mlp_backward: d_mu");
  require_same_shape(d_logvar, f.logvar, "mlp_backward: d_logvar");

  Matrix d_mu_pre = d_mu;
  if (p.logistic_mean) {
    d_mu_pre.array() *= f.mu.array() * (1.0 - f.mu.array());
  }
  // Clamp passes gradient only strictly inside the interval.
  Matrix d_lv_pre =
      (f.logvar_raw.array() > kLogVarMin && f.logvar_raw.array() < kLogVarMax)
          .select(d_logvar, Matrix::Zero(d_logvar.rows(), d_logvar.cols()));

  const Matrix& last = f.hidden.back();
  g.mu_weight += last.transpose() * d_mu_pre;
  g.mu_bias += d_mu_pre.colwise().sum().transpose();
  g.logvar_weight += last.transpose() * d_lv_pre;
  g.logvar_bias += d_lv_pre.colwise().sum().transpose();

  Matrix delta = d_mu_pre * p.mu_weight.transpose() +
                 d_lv_pre * p.logvar_weight.transpose();
  for (std::size_t l = p.weights.size(); l-- > 0;) {
    delta.array() *= (1.0 - f.hidden[l + 1].array().square());
    g.weights[l] += f.hidden[l].transpose() * delta;
    g.biases[l] += delta.colwise().sum().transpose();
    delta = delta * p.weights[l].transpose();
  }
  return delta;
}

// Per-instance latent Gaussian emitted by the recognition network.
struct RecognitionOutput {
  Matrix mu_z;   // N x K
  Matrix var_z;  // N x K, entries in [e^-10, e^10]

  Index n() const { return mu_z.rows(); }
  Index k() const { return mu_z.cols(); }
};

inline RecognitionOutput forward_recognition(const MlpParams& p,
                                             const Matrix& x) {
  MlpForward f = mlp_forward(p, x);
  return RecognitionOutput{std::move(f.mu), f.logvar.array().exp().matrix()};
}

inline void require_positive_variance(const Vector& var, const char* where) {
  for (Index i = 0; i < var.size(); ++i) {
    if (!(var[i] > 0.0)) {
      throw NonPositiveVariance(std::string(where) + ": var[" +
                                std::to_string(i) + "] <= 0");
    }
  }
}

// z = mu + sqrt(var) .* eps with injected noise; the zero-noise case returns
// mu exactly.
inline Vector reparameterize_with(const Vector& mu, const Vector& var,
                                  const Vector& eps) {
  if (mu.size() != var.size() || mu.size() != eps.size()) {
    throw ShapeMismatch("reparameterize: mu/var/eps length mismatch");
  }
  require_positive_variance(var, "reparameterize");
  return mu.array() + var.array().sqrt() * eps.array();
}

inline Vector reparameterize(const Vector& mu, const Vector& var,
                             RngState& rng) {
  if (mu.size() != var.size()) {
    throw ShapeMismatch("reparameterize: mu/var length mismatch");
  }
  require_positive_variance(var, "reparameterize");
  return reparameterize_with(mu, var, rng.gaussian_vector(mu.size()));
}

}  // namespace dgmm
