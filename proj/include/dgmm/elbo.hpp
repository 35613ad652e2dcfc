#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "dgmm/mlp.hpp"
#include "dgmm/optimizer.hpp"
#include "dgmm/vb.hpp"

namespace dgmm {

// What the gradient step needs from the conjugate factors, restricted to the
// rows of the current minibatch: <B>, the rows <H>^T<z̄_i>, and <gamma>.
struct VbBatchView {
  const Matrix& b_mean;   // K x D2
  const Matrix& h_zbar;   // Nb x D2
  double gamma_mean;
};

struct ElboTerms {
  double lp = 0.0;  // negative KL(q(z_i) || N(0,I)), summed over the batch
  double lx = 0.0;  // Monte-Carlo image log-likelihood
  double ly = 0.0;  // Monte-Carlo voxel log-likelihood at plugged-in means

  double bound() const { return lp + lx + ly; }
  double loss() const { return -bound(); }
};

struct ElboGradResult {
  ElboTerms terms;
  MlpGrads recog;  // gradients of the loss (negative bound)
  MlpGrads gen;
};

inline constexpr double kLog2Pi = 1.8378770664093454836;

// Monte-Carlo ELBO and its gradients on one minibatch. The latent samples
// are z_i^(l) = mu_z(x_i) + sigma_z(x_i) .* eps[l], so gradients flow through
// the reparameterization into the image term, the voxel term and the KL.
// Deterministic given the injected eps draws.
inline ElboGradResult elbo_minibatch_grad(const MlpParams& recog,
                                          const MlpParams& gen,
                                          const Matrix& xb, const Matrix& yb,
                                          const VbBatchView& vb,
                                          const std::vector<Matrix>& eps) {
  const Index nb = xb.rows();
  if (nb < 1) throw InvalidArgument("elbo_minibatch_grad: empty batch");
  if (eps.empty()) throw InvalidArgument("elbo_minibatch_grad: L must be >= 1");
  if (yb.rows() != nb) {
    throw ShapeMismatch("elbo_minibatch_grad: X/Y row mismatch");
  }
  const Index k = recog.output_dim();
  if (gen.input_dim() != k || vb.b_mean.rows() != k) {
    throw ShapeMismatch("elbo_minibatch_grad: latent dimension mismatch");
  }
  if (gen.output_dim() != xb.cols()) {
    throw ShapeMismatch("elbo_minibatch_grad: generative output != D1");
  }
  if (vb.b_mean.cols() != yb.cols() || vb.h_zbar.cols() != yb.cols() ||
      vb.h_zbar.rows() != nb) {
    throw ShapeMismatch("elbo_minibatch_grad: voxel-side shape mismatch");
  }
  if (!(vb.gamma_mean > 0.0)) {
    throw InvalidArgument("elbo_minibatch_grad: <gamma> must be > 0");
  }

  const double inv_l = 1.0 / static_cast<double>(eps.size());
  const double d2 = static_cast<double>(yb.cols());

  ElboGradResult out;
  out.recog = MlpGrads::zeros_like(recog);
  out.gen = MlpGrads::zeros_like(gen);

  const MlpForward fr = mlp_forward(recog, xb);
  const Matrix var_z = fr.logvar.array().exp().matrix();
  const Matrix sigma_z = (0.5 * fr.logvar.array()).exp().matrix();

  // L_P and its head gradients (positive-bound convention; negated at the end).
  out.terms.lp = 0.5 * (1.0 + fr.logvar.array() - fr.mu.array().square() -
                        var_z.array())
                           .sum();
  Matrix d_mu_z = -fr.mu;
  Matrix d_lv_z = 0.5 * (1.0 - var_z.array()).matrix();

  for (const Matrix& eps_l : eps) {
    if (eps_l.rows() != nb || eps_l.cols() != k) {
      throw ShapeMismatch("elbo_minibatch_grad: eps shape mismatch");
    }
    const Matrix z = fr.mu + sigma_z.cwiseProduct(eps_l);

    const MlpForward fg = mlp_forward(gen, z);
    const Matrix inv_var_x = (-fg.logvar.array()).exp().matrix();
    const Matrix resid_x = xb - fg.mu;

    out.terms.lx +=
        inv_l * (-0.5 * (kLog2Pi + fg.logvar.array() +
                         resid_x.array().square() * inv_var_x.array())
                            .sum());
    const Matrix d_mu_x = inv_l * resid_x.cwiseProduct(inv_var_x);
    const Matrix d_lv_x =
        inv_l * 0.5 *
        (resid_x.array().square() * inv_var_x.array() - 1.0).matrix();
    Matrix dz = mlp_backward(gen, fg, d_mu_x, d_lv_x, out.gen);

    const Matrix resid_y = yb - z * vb.b_mean - vb.h_zbar;
    out.terms.ly +=
        inv_l * (0.5 * nb * d2 * (std::log(vb.gamma_mean) - kLog2Pi) -
                 0.5 * vb.gamma_mean * resid_y.squaredNorm());
    dz += (inv_l * vb.gamma_mean) * (resid_y * vb.b_mean.transpose());

    d_mu_z += dz;
    d_lv_z += 0.5 * dz.cwiseProduct(sigma_z).cwiseProduct(eps_l);
  }

  mlp_backward(recog, fr, d_mu_z, d_lv_z, out.recog);

  // Gradients of the loss, not the bound.
  out.recog.scale(-1.0);
  out.gen.scale(-1.0);

  if (!std::isfinite(out.terms.loss())) {
    throw NonFiniteLoss("elbo_minibatch_grad: loss is not finite");
  }
  return out;
}

inline ElboGradResult elbo_minibatch_grad(const MlpParams& recog,
                                          const MlpParams& gen,
                                          const Matrix& xb, const Matrix& yb,
                                          const VbBatchView& vb, int l,
                                          RngState& rng) {
  if (l < 1) throw InvalidArgument("elbo_minibatch_grad: L must be >= 1");
  std::vector<Matrix> eps;
  eps.reserve(static_cast<std::size_t>(l));
  for (int i = 0; i < l; ++i) {
    eps.push_back(rng.gaussian_matrix(xb.rows(), recog.output_dim()));
  }
  return elbo_minibatch_grad(recog, gen, xb, yb, vb, eps);
}

// ---------------------------------------------------------------------------
// Full-model evidence bound: Monte-Carlo network terms plus the exact
// conjugate-factor terms. Splits into separately exposed components so the
// total is an accounting identity over them.

struct ElboBreakdown {
  double lp = 0.0;
  double lx = 0.0;
  double ly = 0.0;
  double conjugate = 0.0;  // exact KL block of the Y-side factors
  double total = 0.0;
};

inline ElboBreakdown elbo(const VbState& s, const RecognitionOutput& r,
                          const MlpParams& recog, const MlpParams& gen,
                          const Matrix& x, const Matrix& y, int l,
                          RngState& rng) {
  if (x.rows() < 1) throw InvalidArgument("elbo: empty data");
  const Matrix h_zbar = s.q_zbar.mean * s.q_h.mean;
  const VbBatchView view{s.q_b.mean, h_zbar, s.gamma_mean()};
  const ElboGradResult g =
      elbo_minibatch_grad(recog, gen, x, y, view, l, rng);
  const AnalyticBoundTerms a = analytic_y_bound(s, r, y);
  ElboBreakdown b;
  b.lp = g.terms.lp;
  b.lx = g.terms.lx;
  b.ly = g.terms.ly;
  b.conjugate = -(a.kl_zbar + a.kl_b + a.kl_h + a.kl_tau + a.kl_eta +
                  a.kl_gamma);
  b.total = b.lp + b.lx + b.ly + b.conjugate;
  if (!std::isfinite(b.total)) throw NonFiniteLoss("elbo: non-finite value");
  return b;
}

}  // namespace dgmm
