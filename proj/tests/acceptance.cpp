// Acceptance suite: runs every release criterion at its stated tolerance and
// prints one pass/fail line per criterion. Exits nonzero if any fail.
// argv[1]: path to the CLI binary (used by the determinism criterion).

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "dgmm/dgmm.hpp"

namespace fs = std::filesystem;
using namespace dgmm;

namespace {

std::string g_cli_path;
fs::path g_scratch;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

template <typename P>
std::vector<double*> flat_params(P& p) {
  std::vector<double*> out;
  auto push = [&out](auto& tensor) {
    for (Index i = 0; i < tensor.size(); ++i) out.push_back(tensor.data() + i);
  };
  for (auto& w : p.weights) push(w);
  for (auto& b : p.biases) push(b);
  push(p.mu_weight);
  push(p.mu_bias);
  push(p.logvar_weight);
  push(p.logvar_bias);
  return out;
}

// --- criterion 1 -----------------------------------------------------------

Outcome gradient_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  RngState rng(99);
  MlpParams recog = MlpParams::init({6, 3, 2}, rng);
  MlpParams gen = MlpParams::init({2, 3, 6}, rng);
  const Matrix x = rng.gaussian_matrix(4, 6);
  const Matrix y = rng.gaussian_matrix(4, 5);
  const Matrix b_mean = rng.gaussian_matrix(2, 5);
  const Matrix h_zbar = rng.gaussian_matrix(4, 5);
  const std::vector<Matrix> eps = {rng.gaussian_matrix(4, 2)};
  const VbBatchView view{b_mean, h_zbar, 1.7};

  const auto loss = [&] {
    return elbo_minibatch_grad(recog, gen, x, y, view, eps).terms.loss();
  };
  const ElboGradResult res =
      elbo_minibatch_grad(recog, gen, x, y, view, eps);

  double worst = 0.0;
  const double h = 1e-5;
  const auto check = [&](auto& params, auto grads) {
    std::vector<double*> ptrs = flat_params(params);
    std::vector<double*> gptrs = flat_params(grads);
    for (std::size_t i = 0; i < ptrs.size(); ++i) {
      const double save = *ptrs[i];
      *ptrs[i] = save + h;
      const double up = loss();
      *ptrs[i] = save - h;
      const double down = loss();
      *ptrs[i] = save;
      const double fd = (up - down) / (2.0 * h);
      const double ana = *gptrs[i];
      const double rel =
          std::abs(ana - fd) / std::max({1.0, std::abs(ana), std::abs(fd)});
      worst = std::max(worst, rel);
    }
  };
  check(recog, res.recog);
  check(gen, res.gen);
  const double secs = seconds_since(t0);

  Outcome out;
  out.pass = worst <= 1e-4 && secs < 10.0;
  std::ostringstream os;
  os << "max rel err " << worst << ", " << secs << " s";
  out.detail = os.str();
  return out;
}

// --- criterion 2 -----------------------------------------------------------

Outcome conjugacy_oracles() {
  RngState rng(1234);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Index k = 1 + rng.uniform_index(3);
    const Index kbar = 1 + rng.uniform_index(3);
    const Index n = 2 + rng.uniform_index(7);   // <= 8
    const Index d2 = 1 + rng.uniform_index(4);  // <= 4
    VbState s = VbState::init(k, kbar, n, d2, GammaHyper{}, rng);
    s.q_b.mean = rng.gaussian_matrix(k, d2);
    s.q_h.mean = rng.gaussian_matrix(kbar, d2);
    s.q_zbar.mean = rng.gaussian_matrix(n, kbar);
    {
      const Matrix m = rng.gaussian_matrix(kbar, kbar);
      s.q_zbar.covariance = Matrix(m.transpose() * m) / double(kbar) +
                            0.4 * Matrix::Identity(kbar, kbar);
    }
    for (Index j = 0; j < d2; ++j) {
      const Matrix mb = rng.gaussian_matrix(k, k);
      s.q_b.covariance[j] =
          Matrix(mb.transpose() * mb) / double(k) + 0.4 * Matrix::Identity(k, k);
      const Matrix mh = rng.gaussian_matrix(kbar, kbar);
      s.q_h.covariance[j] = Matrix(mh.transpose() * mh) / double(kbar) +
                            0.4 * Matrix::Identity(kbar, kbar);
      s.q_tau[j] = GammaPosterior(0.5 + 2.0 * rng.uniform(),
                                  0.5 + 2.0 * rng.uniform());
      s.q_eta[j] = GammaPosterior(0.5 + 2.0 * rng.uniform(),
                                  0.5 + 2.0 * rng.uniform());
    }
    s.q_gamma =
        GammaPosterior(0.5 + 2.0 * rng.uniform(), 0.5 + 2.0 * rng.uniform());
    RecognitionOutput r;
    r.mu_z = rng.gaussian_matrix(n, k);
    r.var_z = rng.gaussian_matrix(n, k).array().exp().matrix();
    const Matrix y = rng.gaussian_matrix(n, d2);
    const double gamma = s.q_gamma.mean();

    // q*(B) against dense Bayesian linear regression with the <ZZ^T>
    // correction, via explicit loops and .inverse().
    {
      VbState t = s;
      update_b(t, r, y);
      Matrix zz = Matrix::Zero(k, k);
      for (Index i = 0; i < n; ++i) {
        zz += r.mu_z.row(i).transpose() * r.mu_z.row(i);
        for (Index a = 0; a < k; ++a) zz(a, a) += r.var_z(i, a);
      }
      for (Index j = 0; j < d2; ++j) {
        const Matrix cov =
            Matrix(s.q_tau[j].mean() * Matrix::Identity(k, k) + gamma * zz)
                .inverse();
        Vector rhs = Vector::Zero(k);
        for (Index i = 0; i < n; ++i) {
          rhs += gamma *
                 (y(i, j) -
                  s.q_h.mean.col(j).dot(s.q_zbar.mean.row(i).transpose())) *
                 r.mu_z.row(i).transpose();
        }
        worst = std::max(worst,
                         (t.q_b.covariance[j] - cov).cwiseAbs().maxCoeff());
        worst = std::max(
            worst, (t.q_b.mean.col(j) - cov * rhs).cwiseAbs().maxCoeff());
      }
    }
    // q*(H) symmetric.
    {
      VbState t = s;
      update_h(t, r, y);
      Matrix zz = Matrix::Zero(kbar, kbar);
      for (Index i = 0; i < n; ++i) {
        zz += s.q_zbar.mean.row(i).transpose() * s.q_zbar.mean.row(i) +
              s.q_zbar.covariance;
      }
      for (Index j = 0; j < d2; ++j) {
        const Matrix cov = Matrix(s.q_eta[j].mean() *
                                      Matrix::Identity(kbar, kbar) +
                                  gamma * zz)
                               .inverse();
        Vector rhs = Vector::Zero(kbar);
        for (Index i = 0; i < n; ++i) {
          rhs += gamma *
                 (y(i, j) - s.q_b.mean.col(j).dot(r.mu_z.row(i).transpose())) *
                 s.q_zbar.mean.row(i).transpose();
        }
        worst = std::max(worst,
                         (t.q_h.covariance[j] - cov).cwiseAbs().maxCoeff());
        worst = std::max(
            worst, (t.q_h.mean.col(j) - cov * rhs).cwiseAbs().maxCoeff());
      }
    }
    // q*(Zbar) against dense Gaussian conditioning with the <HH^T> moment.
    {
      VbState t = s;
      update_zbar(t, r, y);
      Matrix hh = s.q_h.mean * s.q_h.mean.transpose();
      for (Index j = 0; j < d2; ++j) hh += s.q_h.covariance[j];
      const Matrix cov =
          Matrix(Matrix::Identity(kbar, kbar) + gamma * hh).inverse();
      worst =
          std::max(worst, (t.q_zbar.covariance - cov).cwiseAbs().maxCoeff());
      for (Index i = 0; i < n; ++i) {
        Vector rhs = Vector::Zero(kbar);
        for (Index j = 0; j < d2; ++j) {
          rhs += gamma *
                 (y(i, j) - s.q_b.mean.col(j).dot(r.mu_z.row(i).transpose())) *
                 s.q_h.mean.col(j);
        }
        worst = std::max(worst, (t.q_zbar.mean.row(i).transpose() - cov * rhs)
                                    .cwiseAbs()
                                    .maxCoeff());
      }
    }
  }
  Outcome out;
  out.pass = worst <= 1e-8;
  std::ostringstream os;
  os << "max abs err " << worst;
  out.detail = os.str();
  return out;
}

// --- criterion 3 -----------------------------------------------------------

Outcome sweep_monotonicity() {
  RngState rng(4321);
  double worst_drop = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Index k = 1 + rng.uniform_index(3);
    const Index kbar = 1 + rng.uniform_index(3);
    const Index n = 4 + rng.uniform_index(5);
    const Index d2 = 2 + rng.uniform_index(4);
    VbState s = VbState::init(k, kbar, n, d2, GammaHyper{}, rng);
    s.q_b.mean = rng.gaussian_matrix(k, d2);
    s.q_h.mean = rng.gaussian_matrix(kbar, d2);
    s.q_zbar.mean = rng.gaussian_matrix(n, kbar);
    {
      const Matrix m = rng.gaussian_matrix(kbar, kbar);
      s.q_zbar.covariance = Matrix(m.transpose() * m) / double(kbar) +
                            0.4 * Matrix::Identity(kbar, kbar);
    }
    for (Index j = 0; j < d2; ++j) {
      const Matrix mb = rng.gaussian_matrix(k, k);
      s.q_b.covariance[j] = Matrix(mb.transpose() * mb) / double(k) +
                            0.4 * Matrix::Identity(k, k);
      const Matrix mh = rng.gaussian_matrix(kbar, kbar);
      s.q_h.covariance[j] = Matrix(mh.transpose() * mh) / double(kbar) +
                            0.4 * Matrix::Identity(kbar, kbar);
      s.q_tau[j] = GammaPosterior(0.5 + 2.0 * rng.uniform(),
                                  0.5 + 2.0 * rng.uniform());
      s.q_eta[j] = GammaPosterior(0.5 + 2.0 * rng.uniform(),
                                  0.5 + 2.0 * rng.uniform());
    }
    s.q_gamma =
        GammaPosterior(0.5 + 2.0 * rng.uniform(), 0.5 + 2.0 * rng.uniform());
    RecognitionOutput r;
    r.mu_z = rng.gaussian_matrix(n, k);
    r.var_z = rng.gaussian_matrix(n, k).array().exp().matrix();
    const Matrix y = rng.gaussian_matrix(n, d2);

    const double before = analytic_y_bound(s, r, y).value();
    conjugate_sweep(s, r, y);
    const double after = analytic_y_bound(s, r, y).value();
    worst_drop = std::max(worst_drop, before - after);
  }
  Outcome out;
  out.pass = worst_drop <= 1e-8;
  std::ostringstream os;
  os << "worst decrease " << worst_drop;
  out.detail = os.str();
  return out;
}

// --- criterion 4 -----------------------------------------------------------

Outcome woodbury_identity() {
  RngState rng(2222);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Index kbar = 1 + rng.uniform_index(5);
    const Index d2 = 2 + rng.uniform_index(63);
    const Matrix h = rng.gaussian_matrix(kbar, d2);
    const double gamma = 0.1 + 4.0 * rng.uniform();
    const PrecisionSurrogate t = compute_T(h, gamma);
    const Matrix psi =
        Matrix(h.transpose() * h) + Matrix::Identity(d2, d2) / gamma;
    worst = std::max(worst, (t.dense() * psi - Matrix::Identity(d2, d2))
                                .cwiseAbs()
                                .maxCoeff());
  }
  Outcome out;
  out.pass = worst <= 1e-8;
  std::ostringstream os;
  os << "max identity residual " << worst;
  out.detail = os.str();
  return out;
}

// --- criterion 5 -----------------------------------------------------------

Outcome regularization_limits() {
  RngState rng(3333);
  double worst_bayes = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Index k = 1 + rng.uniform_index(4);
    const Index kbar = 1 + rng.uniform_index(3);
    const Index d2 = 3 + rng.uniform_index(10);
    const Matrix b = rng.gaussian_matrix(k, d2);
    const Matrix h = rng.gaussian_matrix(kbar, d2);
    const double gamma = 0.3 + 2.0 * rng.uniform();
    const Vector y_star = rng.gaussian_vector(d2);
    const Matrix ytr = rng.gaussian_matrix(5, d2);
    const Matrix ztr = rng.gaussian_matrix(5, k);
    const AffinityWeights aff = affinity(y_star, ytr, 3, 1.0);
    const RegularizedLatentPosterior post =
        posterior_latent(y_star, b, compute_T(h, gamma), ztr, aff, 0.0);

    const Matrix psi =
        Matrix(h.transpose() * h) + Matrix::Identity(d2, d2) / gamma;
    const Matrix psi_inv = psi.inverse();
    const Matrix sigma =
        Matrix(Matrix::Identity(k, k) + b * psi_inv * b.transpose())
            .inverse();
    const Vector mu = sigma * (b * psi_inv * y_star);
    worst_bayes =
        std::max(worst_bayes, (post.covariance - sigma).cwiseAbs().maxCoeff());
    worst_bayes =
        std::max(worst_bayes, (post.mean - mu).cwiseAbs().maxCoeff());
  }

  // rho -> 1e6 with a single unit-weight neighbour.
  const Index k = 3, d2 = 6;
  const Matrix b = rng.gaussian_matrix(k, d2);
  const Matrix h = rng.gaussian_matrix(2, d2);
  const Matrix ytr = rng.gaussian_matrix(7, d2);
  const Matrix ztr = rng.gaussian_matrix(7, k);
  const Vector y_star = ytr.row(4).transpose();
  const AffinityWeights aff = affinity(y_star, ytr, 1, 1.0);
  const RegularizedLatentPosterior post =
      posterior_latent(y_star, b, compute_T(h, 1.2), ztr, aff, 1e6);
  const double pull = (post.mean - ztr.row(4).transpose()).norm();

  Outcome out;
  out.pass = worst_bayes <= 1e-8 && pull <= 1e-3;
  std::ostringstream os;
  os << "bayes err " << worst_bayes << ", neighbour distance " << pull;
  out.detail = os.str();
  return out;
}

// --- criterion 6 -----------------------------------------------------------

Outcome synthetic_recovery() {
  const auto t0 = std::chrono::steady_clock::now();

  SyntheticConfig scfg;
  scfg.n_train = 500;
  scfg.n_test = 100;
  scfg.d1 = 64;
  scfg.d2 = 200;
  scfg.k = 4;
  scfg.kbar = 4;
  scfg.image_width = 8;
  scfg.image_height = 8;
  scfg.voxel_noise_precision = 10.0;
  scfg.pixel_noise_precision = 100.0;
  scfg.seed = 1;
  auto [ds, truth] = generate_synthetic(scfg);

  TrainConfig tcfg;
  tcfg.k = 4;
  tcfg.kbar = 4;
  tcfg.recog_hidden = {32};
  tcfg.epochs = 300;
  tcfg.seed = 42;
  tcfg.tol = 0.0;
  const TrainResult res = train(ds, tcfg);

  const Matrix xtr = ds.x_train();
  const RecognitionOutput ro = forward_recognition(res.recog, xtr);
  ReconstructOptions opt;
  opt.knn = 10;
  opt.rho = 0.25;
  opt.mc_samples = 32;
  const Predictor pred(res.gen, res.vb.q_b.mean, res.vb.q_h.mean,
                       res.vb.gamma_mean(), ro.mu_z, ds.y_train(), opt);
  const Matrix recon = pred.reconstruct_all(ds.y_test(), 99);

  const Matrix xte = ds.x_test();
  const Matrix yte = ds.y_test();
  const Vector baseline = xtr.colwise().mean().transpose();

  // Ceiling: exact posterior-mean decoder under the true linear model.
  const Matrix psi = truth.h.transpose() * truth.h +
                     Matrix::Identity(scfg.d2, scfg.d2) /
                         truth.voxel_noise_precision;
  const Matrix psi_inv = psi.inverse();
  const Matrix sigma = Matrix(Matrix::Identity(scfg.k, scfg.k) +
                              truth.b * psi_inv * truth.b.transpose())
                           .inverse();

  double model_pcc = 0, base_pcc = 0, ceiling_pcc = 0;
  double model_mse = 0, base_mse = 0;
  for (Index i = 0; i < xte.rows(); ++i) {
    const Vector t = xte.row(i).transpose();
    model_pcc += safe_pcc(t, recon.row(i).transpose());
    base_pcc += safe_pcc(t, baseline);
    model_mse += mse(t, recon.row(i).transpose());
    base_mse += mse(t, baseline);
    const Vector mu = sigma * (truth.b * (psi_inv * yte.row(i).transpose()));
    ceiling_pcc += safe_pcc(t, Vector(truth.map_w * mu));
  }
  const double n = static_cast<double>(xte.rows());
  model_pcc /= n;
  base_pcc /= n;
  ceiling_pcc /= n;
  model_mse /= n;
  base_mse /= n;
  const double secs = seconds_since(t0);

  Outcome out;
  out.pass = model_pcc >= base_pcc + 0.3 && model_mse < base_mse &&
             model_pcc >= 0.8 * ceiling_pcc && secs < 300.0;
  std::ostringstream os;
  os << "pcc " << model_pcc << " (baseline " << base_pcc << ", ceiling "
     << ceiling_pcc << "), mse " << model_mse << " (baseline " << base_mse
     << "), " << secs << " s";
  out.detail = os.str();
  return out;
}

// --- criterion 7 -----------------------------------------------------------

double ssim_reference(const Matrix& a, const Matrix& b, double range) {
  const int win = 11;
  const double sigma = 1.5;
  double weights[11][11];
  double wsum = 0.0;
  for (int i = 0; i < win; ++i) {
    for (int j = 0; j < win; ++j) {
      const double di = i - 5.0, dj = j - 5.0;
      weights[i][j] = std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
      wsum += weights[i][j];
    }
  }
  const double c1 = std::pow(0.01 * range, 2);
  const double c2 = std::pow(0.03 * range, 2);
  double total = 0.0;
  int count = 0;
  for (int r = 0; r + win <= a.rows(); ++r) {
    for (int c = 0; c + win <= a.cols(); ++c) {
      double m1 = 0, m2 = 0, q1 = 0, q2 = 0, q12 = 0;
      for (int i = 0; i < win; ++i) {
        for (int j = 0; j < win; ++j) {
          const double w = weights[i][j] / wsum;
          m1 += w * a(r + i, c + j);
          m2 += w * b(r + i, c + j);
          q1 += w * a(r + i, c + j) * a(r + i, c + j);
          q2 += w * b(r + i, c + j) * b(r + i, c + j);
          q12 += w * a(r + i, c + j) * b(r + i, c + j);
        }
      }
      total += ((2 * m1 * m2 + c1) * (2 * (q12 - m1 * m2) + c2)) /
               ((m1 * m1 + m2 * m2 + c1) *
                ((q1 - m1 * m1) + (q2 - m2 * m2) + c2));
      ++count;
    }
  }
  return total / count;
}

Outcome metric_sanity() {
  RngState rng(5555);
  bool ok = true;
  std::ostringstream os;

  Vector a(4), bneg(4), b2(4);
  a << 1, 2, 3, 4;
  bneg = -a;
  b2 << 1, 2, 3, 5;
  ok = ok && std::abs(pcc(a, a) - 1.0) < 1e-12;
  ok = ok && std::abs(pcc(a, bneg) + 1.0) < 1e-12;
  ok = ok && std::abs(pcc(a, b2) - 0.9827076298239908) < 1e-9;

  Vector z2(2), o2(2);
  z2 << 0, 0;
  o2 << 1, 1;
  ok = ok && mse(z2, z2) == 0.0 && std::abs(mse(z2, o2) - 1.0) < 1e-15;

  const Matrix img = (rng.gaussian_matrix(16, 16).array() * 0.2 + 0.5).matrix();
  ok = ok && std::abs(ssim(img, img, 1.0) - 1.0) < 1e-12;
  const Matrix shifted = img.array() + 0.3;
  ok = ok && ssim(img, shifted, 1.0) < 1.0;
  Matrix img2 = img;
  img2 += 0.1 * rng.gaussian_matrix(16, 16);
  const double lib = ssim(img, img2, 1.0);
  const double ref = ssim_reference(img, img2, 1.0);
  ok = ok && std::abs(lib - ref) <= 1e-6;
  os << "ssim oracle gap " << std::abs(lib - ref);

  Outcome out;
  out.pass = ok;
  out.detail = os.str();
  return out;
}

// --- criterion 8 -----------------------------------------------------------

Outcome screening_behavior() {
  RngState rng(6666);
  const Matrix x = rng.gaussian_matrix(200, 5);
  Matrix y(200, 1);
  y.col(0) = x * rng.gaussian_vector(5);
  const VoxelScreeningReport lin = screen_voxels(x, y, 10);
  const bool linear_ok =
      lin.r2[0] >= 0.99 && lin.selected == std::vector<Index>{0};

  int excluded = 0;
  for (int seed = 0; seed < 50; ++seed) {
    RngState noise_rng(static_cast<std::uint64_t>(seed) + 100);
    const Matrix xn = noise_rng.gaussian_matrix(60, 5);
    const Matrix yn = noise_rng.gaussian_matrix(60, 1);
    if (screen_voxels(xn, yn, 10).r2[0] <= 0.0) ++excluded;
  }

  Outcome out;
  out.pass = linear_ok && excluded >= 45;
  std::ostringstream os;
  os << "linear R2 " << lin.r2[0] << ", noise excluded " << excluded << "/50";
  out.detail = os.str();
  return out;
}

// --- criterion 9 -----------------------------------------------------------

// Exit code of the CLI invocation (stdout/stderr suppressed).
int run_cli(const std::string& args) {
  const std::string cmd =
      '"' + g_cli_path + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  if (status < 0) return -1;
  return (status >> 8) & 0xff;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Training-log comparison strips the wall-time column (the last one); it is
// the only timing-dependent field in any output.
std::string strip_last_column(const std::string& csv) {
  std::istringstream in(csv);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    const auto comma = line.rfind(',');
    out << (comma == std::string::npos ? line : line.substr(0, comma))
        << '\n';
  }
  return out.str();
}

Outcome determinism() {
  const fs::path dir = g_scratch / "determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);

  std::ofstream(dir / "gen.cfg")
      << "output.dir = " << (dir / "data").string() << "\n"
      << "generate.n_train = 60\ngenerate.n_test = 8\n"
      << "generate.d1 = 16\ngenerate.d2 = 24\n"
      << "generate.k = 2\ngenerate.kbar = 2\n"
      << "generate.image_width = 4\ngenerate.image_height = 4\n"
      << "generate.seed = 11\n";
  std::ofstream(dir / "train.cfg")
      << "dataset.path = " << (dir / "data").string() << "\n"
      << "model.k = 2\nmodel.kbar = 2\nmodel.recog_hidden = 8\n"
      << "train.epochs = 30\ntrain.seed = 21\ntrain.tol = 0\n";
  std::ofstream(dir / "recon.cfg")
      << "dataset.path = " << (dir / "data").string() << "\n"
      << "predict.k = 5\npredict.rho = cv\npredict.mc_samples = 8\n"
      << "predict.cv_folds = 5\ntrain.seed = 21\n";
  std::ofstream(dir / "eval.cfg")
      << "dataset.path = " << (dir / "data").string() << "\n"
      << "reconstruction.path = "
      << (dir / "run1" / "recon" / "reconstructions.csv").string() << "\n";

  Outcome out;
  if (run_cli("generate --config " + (dir / "gen.cfg").string()) != 0) {
    out.detail = "generate failed";
    return out;
  }
  for (const char* run : {"run1", "run2"}) {
    if (run_cli("train --config " + (dir / "train.cfg").string() + " --out " +
                (dir / run).string()) != 0) {
      out.detail = "train failed";
      return out;
    }
    if (run_cli("reconstruct --config " + (dir / "recon.cfg").string() +
                " --model " + (dir / run / "model").string() + " --out " +
                (dir / run / "recon").string()) != 0) {
      out.detail = "reconstruct failed";
      return out;
    }
  }
  // Full pipeline contract: evaluate must also exit cleanly.
  if (run_cli("evaluate --config " + (dir / "eval.cfg").string() + " --out " +
              (dir / "eval").string()) != 0) {
    out.detail = "evaluate failed";
    return out;
  }

  const std::string log1 =
      strip_last_column(read_file(dir / "run1" / "training_log.csv"));
  const std::string log2 =
      strip_last_column(read_file(dir / "run2" / "training_log.csv"));
  const std::string rec1 =
      read_file(dir / "run1" / "recon" / "reconstructions.csv");
  const std::string rec2 =
      read_file(dir / "run2" / "recon" / "reconstructions.csv");

  const bool logs_match = !log1.empty() && log1 == log2;
  const bool recon_match = !rec1.empty() && rec1 == rec2;

  // The cross-validated rho must be recorded in the run snapshot.
  const std::string snap =
      read_file(dir / "run1" / "recon" / "config_snapshot.txt");
  const bool rho_recorded =
      snap.find("predict.rho_chosen") != std::string::npos;

  // Error exit codes: unknown config key -> 2, dimension mismatch -> 3.
  std::ofstream(dir / "bad.cfg") << "trian.epochs = 5\n";
  const bool config_code =
      run_cli("train --config " + (dir / "bad.cfg").string()) == 2;
  std::ofstream(dir / "gen_small.cfg")
      << "output.dir = " << (dir / "data_small").string() << "\n"
      << "generate.n_train = 20\ngenerate.n_test = 4\n"
      << "generate.d1 = 9\ngenerate.d2 = 10\n"
      << "generate.k = 2\ngenerate.kbar = 2\n"
      << "generate.image_width = 3\ngenerate.image_height = 3\n";
  const bool mismatch_code =
      run_cli("generate --config " + (dir / "gen_small.cfg").string()) == 0 &&
      run_cli("reconstruct --config " + (dir / "recon.cfg").string() +
              " --model " + (dir / "run1" / "model").string() +
              " --dataset " + (dir / "data_small").string() + " --out " +
              (dir / "mismatch").string()) == 3;

  out.pass =
      logs_match && recon_match && rho_recorded && config_code && mismatch_code;
  std::ostringstream os;
  os << "logs " << (logs_match ? "identical" : "differ") << ", "
     << "reconstructions " << (recon_match ? "identical" : "differ")
     << ", rho recorded " << (rho_recorded ? "yes" : "no") << ", exit codes "
     << (config_code && mismatch_code ? "ok" : "wrong");
  out.detail = os.str();
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1) g_cli_path = argv[1];
  g_scratch = argc > 2 ? fs::path(argv[2])
                       : fs::temp_directory_path() / "dgmm_acceptance";
  fs::create_directories(g_scratch);

  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"1. gradient correctness", gradient_correctness},
      {"2. conjugacy oracles", conjugacy_oracles},
      {"3. coordinate-ascent monotonicity", sweep_monotonicity},
      {"4. Woodbury T identity", woodbury_identity},
      {"5. posterior-regularization limits", regularization_limits},
      {"6. synthetic end-to-end recovery", synthetic_recovery},
      {"7. metric sanity", metric_sanity},
      {"8. screening behavior", screening_behavior},
      {"9. determinism", determinism},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << c.name << " (" << o.detail
              << ")\n";
  }
  return failures == 0 ? 0 : 1;
}
