#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "dgmm/linalg.hpp"
#include "dgmm/mlp.hpp"
#include "dgmm/prob.hpp"

namespace dgmm {

// Product of per-column Gaussian posteriors over a projection matrix.
// mean column j is <b_j> (or <h_j>); covariance[j] is its K x K posterior
// covariance. Precisions share the Gram term and differ per column only
// through the ARD precision mean, so covariances are stored per column.
struct GaussianMatrixPosterior {
  Matrix mean;                       // K x D2
  std::vector<Matrix> covariance;    // D2 entries, each K x K

  Index latent_dim() const { return mean.rows(); }
  Index columns() const { return mean.cols(); }

  // <b_j^T b_j> = ||<b_j>||^2 + tr(Sigma_j)
  double column_square_norm(Index j) const {
    return mean.col(j).squaredNorm() + covariance[j].trace();
  }

  // sum_j (<b_j><b_j>^T + Sigma_j); the <BB^T> moment.
  Matrix second_moment() const {
    Matrix m = mean * mean.transpose();
    for (const Matrix& c : covariance) m += c;
    return m;
  }
};

// Gaussian posteriors over the private latents z̄_i. The precision
// I + <gamma><HH^T> does not depend on i, so the covariance is shared.
struct PrivateLatentPosterior {
  Matrix mean;        // N x Kbar, one row per instance
  Matrix covariance;  // Kbar x Kbar, shared

  Index n() const { return mean.rows(); }
  Index kbar() const { return mean.cols(); }

  // sum_i (<z̄_i><z̄_i>^T + Sigma) = M^T M + N Sigma
  Matrix second_moment() const {
    return Matrix(mean.transpose() * mean) +
           static_cast<double>(mean.rows()) * covariance;
  }
};

struct GammaHyper {
  double alpha_tau = 1.0, beta_tau = 1.0;
  double alpha_eta = 1.0, beta_eta = 1.0;
  double alpha_gamma = 1.0, beta_gamma = 1.0;
};

// Full conjugate-factor state of the mean-field posterior.
struct VbState {
  GaussianMatrixPosterior q_b;          // shared-view projection, K x D2
  GaussianMatrixPosterior q_h;          // private-view projection, Kbar x D2
  PrivateLatentPosterior q_zbar;        // N x Kbar
  std::vector<GammaPosterior> q_tau;    // length D2
  std::vector<GammaPosterior> q_eta;    // length D2
  GammaPosterior q_gamma;
  GammaHyper hyper;
  Index k = 0;
  Index kbar = 0;

  Index d2() const { return q_b.columns(); }
  Index n() const { return q_zbar.n(); }

  Vector tau_means() const {
    Vector v(static_cast<Index>(q_tau.size()));
    for (Index j = 0; j < v.size(); ++j) v[j] = q_tau[j].mean();
    return v;
  }
  Vector eta_means() const {
    Vector v(static_cast<Index>(q_eta.size()));
    for (Index j = 0; j < v.size(); ++j) v[j] = q_eta[j].mean();
    return v;
  }
  double gamma_mean() const { return q_gamma.mean(); }

  // Prior-consistent cold start: small random projection means, identity
  // covariances, Gamma factors at the prior, zero private latents.
  static VbState init(Index k, Index kbar, Index n, Index d2,
                      const GammaHyper& hyper, RngState& rng) {
    if (k < 1 || kbar < 1 || n < 1 || d2 < 1) {
      throw InvalidArgument("VbState::init: dims must be >= 1");
    }
    VbState s;
    s.k = k;
    s.kbar = kbar;
    s.hyper = hyper;
    s.q_b.mean = rng.gaussian_matrix(k, d2) * 0.1;
    s.q_b.covariance.assign(d2, Matrix::Identity(k, k));
    s.q_h.mean = rng.gaussian_matrix(kbar, d2) * 0.1;
    s.q_h.covariance.assign(d2, Matrix::Identity(kbar, kbar));
    s.q_zbar.mean = Matrix::Zero(n, kbar);
    s.q_zbar.covariance = Matrix::Identity(kbar, kbar);
    s.q_tau.assign(d2, GammaPosterior(hyper.alpha_tau, hyper.beta_tau));
    s.q_eta.assign(d2, GammaPosterior(hyper.alpha_eta, hyper.beta_eta));
    s.q_gamma = GammaPosterior(hyper.alpha_gamma, hyper.beta_gamma);
    return s;
  }
};

// <ZZ^T> = sum_i (mu_i mu_i^T + diag(var_i)); q(Z) moments are analytic.
inline Matrix expected_outer_z(const RecognitionOutput& r) {
  if (r.mu_z.rows() != r.var_z.rows() || r.mu_z.cols() != r.var_z.cols()) {
    throw ShapeMismatch("expected_outer_z: mu/var shape mismatch");
  }
  Matrix m = r.mu_z.transpose() * r.mu_z;
  m += Matrix(r.var_z.colwise().sum().asDiagonal());
  return m;
}

namespace detail {

inline void require_vb_shapes(const VbState& s, const RecognitionOutput& r,
                              const Matrix& y, const char* where) {
  if (y.rows() != r.mu_z.rows()) {
    throw ShapeMismatch(std::string(where) + ": Y rows != recognition rows");
  }
  if (y.cols() != s.d2()) {
    throw ShapeMismatch(std::string(where) + ": Y cols != D2");
  }
  if (r.mu_z.cols() != s.k) {
    throw ShapeMismatch(std::string(where) + ": recognition K mismatch");
  }
  if (y.rows() != s.q_zbar.n()) {
    throw ShapeMismatch(std::string(where) + ": q(Zbar) rows != Y rows");
  }
}

}  // namespace detail

// q*(B): per column j, Sigma_bj = [<tau_j> I + <gamma> <ZZ^T>]^-1 and
// mu_bj = Sigma_bj sum_i <gamma>(y_ij - <h_j>^T <z̄_i>) <z_i>.
inline void update_b(VbState& s, const RecognitionOutput& r, const Matrix& y) {
  detail::require_vb_shapes(s, r, y, "update_b");
  const double gamma = s.gamma_mean();
  const Matrix zz = expected_outer_z(r);
  // residual against the private-view component
  const Matrix resid = y - s.q_zbar.mean * s.q_h.mean;  // N x D2
  const Matrix rhs = r.mu_z.transpose() * resid;        // K x D2
  for (Index j = 0; j < s.d2(); ++j) {
    Matrix precision = gamma * zz;
    precision.diagonal().array() += s.q_tau[j].mean();
    s.q_b.covariance[j] = cholesky_solve(precision, Matrix::Identity(s.k, s.k));
    s.q_b.mean.col(j) = gamma * (s.q_b.covariance[j] * rhs.col(j));
  }
}

// q*(H): symmetric to q*(B) with roles (Z̄, eta) replacing (Z, tau).
inline void update_h(VbState& s, const RecognitionOutput& r, const Matrix& y) {
  detail::require_vb_shapes(s, r, y, "update_h");
  const double gamma = s.gamma_mean();
  const Matrix zz_bar = s.q_zbar.second_moment();       // Kbar x Kbar
  const Matrix resid = y - r.mu_z * s.q_b.mean;         // N x D2
  const Matrix rhs = s.q_zbar.mean.transpose() * resid; // Kbar x D2
  for (Index j = 0; j < s.d2(); ++j) {
    Matrix precision = gamma * zz_bar;
    precision.diagonal().array() += s.q_eta[j].mean();
    s.q_h.covariance[j] =
        cholesky_solve(precision, Matrix::Identity(s.kbar, s.kbar));
    s.q_h.mean.col(j) = gamma * (s.q_h.covariance[j] * rhs.col(j));
  }
}

// q*(Z̄): shared covariance [I + <gamma><HH^T>]^-1, means
// mu_z̄i = Sigma sum_j <gamma>(y_ij - <b_j>^T <z_i>) <h_j>.
inline void update_zbar(VbState& s, const RecognitionOutput& r,
                        const Matrix& y) {
  detail::require_vb_shapes(s, r, y, "update_zbar");
  const double gamma = s.gamma_mean();
  Matrix precision = gamma * s.q_h.second_moment();
  precision.diagonal().array() += 1.0;
  s.q_zbar.covariance =
      cholesky_solve(precision, Matrix::Identity(s.kbar, s.kbar));
  const Matrix resid = y - r.mu_z * s.q_b.mean;  // N x D2
  s.q_zbar.mean = gamma * (resid * s.q_h.mean.transpose() * s.q_zbar.covariance);
}

// q*(tau_j) = G(a_tau + K/2, b_tau + <b_j^T b_j>/2), same for eta with Kbar,
// and q*(gamma) = G(a_g + N D2/2, b_g + sum_ij delta_ij^2 / 2) where delta
// plugs in posterior means only (the printed update; second-moment
// corrections are intentionally not added).
inline void update_precisions(VbState& s, const RecognitionOutput& r,
                              const Matrix& y) {
  detail::require_vb_shapes(s, r, y, "update_precisions");
  const double half_k = 0.5 * static_cast<double>(s.k);
  const double half_kbar = 0.5 * static_cast<double>(s.kbar);
  for (Index j = 0; j < s.d2(); ++j) {
    const double bsq = s.q_b.column_square_norm(j);
    const double hsq = s.q_h.column_square_norm(j);
    if (!std::isfinite(bsq) || !std::isfinite(hsq)) {
      throw NonFiniteLoss("update_precisions: non-finite projection moment");
    }
    s.q_tau[j] = GammaPosterior(s.hyper.alpha_tau + half_k,
                                s.hyper.beta_tau + 0.5 * bsq);
    s.q_eta[j] = GammaPosterior(s.hyper.alpha_eta + half_kbar,
                                s.hyper.beta_eta + 0.5 * hsq);
  }
  const Matrix delta = y - r.mu_z * s.q_b.mean - s.q_zbar.mean * s.q_h.mean;
  const double rss = delta.squaredNorm();
  if (!std::isfinite(rss)) {
    throw NonFiniteLoss("update_precisions: non-finite residual");
  }
  const double nd2 = static_cast<double>(y.rows()) * static_cast<double>(y.cols());
  s.q_gamma = GammaPosterior(s.hyper.alpha_gamma + 0.5 * nd2,
                             s.hyper.beta_gamma + 0.5 * rss);
}

enum class SweepStep { zbar, b, h, precisions };

inline std::vector<SweepStep> default_sweep_order() {
  return {SweepStep::zbar, SweepStep::b, SweepStep::h, SweepStep::precisions};
}

inline void conjugate_sweep(VbState& s, const RecognitionOutput& r,
                            const Matrix& y,
                            const std::vector<SweepStep>& order) {
  for (SweepStep step : order) {
    switch (step) {
      case SweepStep::zbar: update_zbar(s, r, y); break;
      case SweepStep::b: update_b(s, r, y); break;
      case SweepStep::h: update_h(s, r, y); break;
      case SweepStep::precisions: update_precisions(s, r, y); break;
    }
  }
}

inline void conjugate_sweep(VbState& s, const RecognitionOutput& r,
                            const Matrix& y) {
  conjugate_sweep(s, r, y, default_sweep_order());
}

// ---------------------------------------------------------------------------
// Analytic voxel-side bound: the portion of the evidence bound the conjugate
// sweep touches, with all second moments carried exactly. Each of the
// Z̄/B/H/tau/eta updates is exact coordinate ascent on this value.

struct AnalyticBoundTerms {
  double expected_loglik = 0.0;  // E[log p(Y | Z, Z̄, B, H, gamma)]
  double kl_zbar = 0.0;
  double kl_b = 0.0;
  double kl_h = 0.0;
  double kl_tau = 0.0;
  double kl_eta = 0.0;
  double kl_gamma = 0.0;

  double value() const {
    return expected_loglik - kl_zbar - kl_b - kl_h - kl_tau - kl_eta -
           kl_gamma;
  }
};

inline AnalyticBoundTerms analytic_y_bound(const VbState& s,
                                           const RecognitionOutput& r,
                                           const Matrix& y) {
  detail::require_vb_shapes(s, r, y, "analytic_y_bound");
  AnalyticBoundTerms t;
  const Index n = y.rows(), d2 = y.cols();
  const double gamma = s.gamma_mean();
  const double log_gamma = s.q_gamma.mean_log();

  // E[(y_ij - b_j^T z_i - h_j^T z̄_i)^2] expanded over the independent
  // factors: squared mean residual plus both quadratic-form variances,
  // accumulated in Gram form over instances:
  //   sum_i Var[b_j^T z_i] = Sb.diag.vc + tr(Sb G) + (b_j o b_j).vc
  // with vc = sum_i var_zi and G = sum_i mu_zi mu_zi^T.
  const Matrix mean_resid =
      y - r.mu_z * s.q_b.mean - s.q_zbar.mean * s.q_h.mean;
  double quad = mean_resid.squaredNorm();
  const Vector var_colsum = r.var_z.colwise().sum().transpose();
  const Matrix gram_z = r.mu_z.transpose() * r.mu_z;
  const Matrix gram_zbar = s.q_zbar.mean.transpose() * s.q_zbar.mean;
  const double nd = static_cast<double>(n);
  for (Index j = 0; j < d2; ++j) {
    const Vector bj = s.q_b.mean.col(j);
    const Matrix& sb = s.q_b.covariance[j];
    const Vector hj = s.q_h.mean.col(j);
    const Matrix& sh = s.q_h.covariance[j];
    quad += sb.diagonal().dot(var_colsum) + (sb * gram_z).trace() +
            bj.array().square().matrix().dot(var_colsum);
    quad += nd * (sh * s.q_zbar.covariance).trace() + (sh * gram_zbar).trace() +
            nd * hj.dot(s.q_zbar.covariance * hj);
  }
  const double nd2 = static_cast<double>(n) * static_cast<double>(d2);
  t.expected_loglik =
      0.5 * nd2 * (log_gamma - std::log(2.0 * std::numbers::pi)) -
      0.5 * gamma * quad;

  for (Index i = 0; i < n; ++i) {
    t.kl_zbar += gaussian_kl_to_standard_full(
        s.q_zbar.mean.row(i).transpose(), s.q_zbar.covariance);
  }

  // E_q[log p(b_j|tau_j) - log q(b_j)] with <log tau> from the Gamma factor.
  const double kd = static_cast<double>(s.k);
  const double kbard = static_cast<double>(s.kbar);
  for (Index j = 0; j < d2; ++j) {
    t.kl_b -= 0.5 * kd * s.q_tau[j].mean_log() -
              0.5 * s.q_tau[j].mean() * s.q_b.column_square_norm(j) +
              0.5 * spd_log_det(s.q_b.covariance[j]) + 0.5 * kd;
    t.kl_h -= 0.5 * kbard * s.q_eta[j].mean_log() -
              0.5 * s.q_eta[j].mean() * s.q_h.column_square_norm(j) +
              0.5 * spd_log_det(s.q_h.covariance[j]) + 0.5 * kbard;
    t.kl_tau += gamma_kl(s.q_tau[j],
                         GammaPosterior(s.hyper.alpha_tau, s.hyper.beta_tau));
    t.kl_eta += gamma_kl(s.q_eta[j],
                         GammaPosterior(s.hyper.alpha_eta, s.hyper.beta_eta));
  }
  t.kl_gamma = gamma_kl(
      s.q_gamma, GammaPosterior(s.hyper.alpha_gamma, s.hyper.beta_gamma));
  return t;
}

}  // namespace dgmm
