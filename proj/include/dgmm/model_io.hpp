#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dgmm/dataset.hpp"
#include "dgmm/mlp.hpp"
#include "dgmm/vb.hpp"

namespace dgmm {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian");

namespace detail {

inline void write_doubles(const std::filesystem::path& path,
                          const std::vector<double>& v) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
  if (!out) throw IoError("write failed: " + path.string());
}

inline std::vector<double> read_doubles(const std::filesystem::path& path,
                                        std::size_t expected) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw MissingFile(path.string());
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes != expected * sizeof(double)) {
    throw IoError(path.string() + ": expected " + std::to_string(expected) +
                  " doubles, file holds " +
                  std::to_string(bytes / sizeof(double)));
  }
  in.seekg(0);
  std::vector<double> v(expected);
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(bytes));
  if (!in) throw IoError("read failed: " + path.string());
  return v;
}

// Row-major wire order regardless of in-memory layout.
inline void write_matrix_bin(const std::filesystem::path& path,
                             const Matrix& m) {
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(m.size()));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) v.push_back(m(i, j));
  }
  write_doubles(path, v);
}

inline Matrix read_matrix_bin(const std::filesystem::path& path, Index rows,
                              Index cols) {
  const std::vector<double> v =
      read_doubles(path, static_cast<std::size_t>(rows * cols));
  Matrix m(rows, cols);
  std::size_t idx = 0;
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = v[idx++];
  }
  return m;
}

inline std::string join_sizes(const std::vector<Index>& sizes) {
  std::string s;
  for (Index v : sizes) {
    if (!s.empty()) s += ',';
    s += std::to_string(v);
  }
  return s;
}

inline std::vector<Index> parse_sizes(const std::string& s) {
  std::vector<Index> out;
  std::size_t start = 0;
  while (start < s.size()) {
    const auto comma = s.find(',', start);
    const auto len = (comma == std::string::npos ? s.size() : comma) - start;
    if (len > 0) out.push_back(std::stoll(s.substr(start, len)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace detail

inline void save_mlp(const MlpParams& p, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    detail::write_matrix_bin(dir / ("w" + std::to_string(l) + ".bin"),
                             p.weights[l]);
    detail::write_matrix_bin(dir / ("b" + std::to_string(l) + ".bin"),
                             p.biases[l]);
  }
  detail::write_matrix_bin(dir / "mu_w.bin", p.mu_weight);
  detail::write_matrix_bin(dir / "mu_b.bin", p.mu_bias);
  detail::write_matrix_bin(dir / "logvar_w.bin", p.logvar_weight);
  detail::write_matrix_bin(dir / "logvar_b.bin", p.logvar_bias);
}

inline MlpParams load_mlp(const std::filesystem::path& dir,
                          const std::vector<Index>& sizes,
                          bool logistic_mean) {
  MlpParams p;
  p.layer_sizes = sizes;
  p.logistic_mean = logistic_mean;
  const std::size_t n_hidden = sizes.size() - 2;
  for (std::size_t l = 0; l < n_hidden; ++l) {
    p.weights.push_back(detail::read_matrix_bin(
        dir / ("w" + std::to_string(l) + ".bin"), sizes[l], sizes[l + 1]));
    p.biases.push_back(Vector(detail::read_matrix_bin(
        dir / ("b" + std::to_string(l) + ".bin"), sizes[l + 1], 1)));
  }
  const Index last = sizes[sizes.size() - 2];
  const Index out = sizes.back();
  p.mu_weight = detail::read_matrix_bin(dir / "mu_w.bin", last, out);
  p.mu_bias = Vector(detail::read_matrix_bin(dir / "mu_b.bin", out, 1));
  p.logvar_weight = detail::read_matrix_bin(dir / "logvar_w.bin", last, out);
  p.logvar_bias =
      Vector(detail::read_matrix_bin(dir / "logvar_b.bin", out, 1));
  return p;
}

struct ModelBundle {
  MlpParams recog;
  MlpParams gen;
  VbState vb;
  Index d1 = 0;
  Index d2 = 0;
  std::uint64_t seed = 0;
  long long steps = 0;
  std::string status;
  // When training screened voxels, the surviving column ids (into the
  // possibly z-scored dataset); empty means all columns.
  std::vector<Index> selected_voxels;
};

inline void save_model(const ModelBundle& m, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  KeyValueMap kv;
  kv["k"] = std::to_string(m.vb.k);
  kv["kbar"] = std::to_string(m.vb.kbar);
  kv["d1"] = std::to_string(m.d1);
  kv["d2"] = std::to_string(m.d2);
  kv["n_train"] = std::to_string(m.vb.n());
  kv["recog_sizes"] = detail::join_sizes(m.recog.layer_sizes);
  kv["gen_sizes"] = detail::join_sizes(m.gen.layer_sizes);
  kv["gen_logistic"] = m.gen.logistic_mean ? "1" : "0";
  kv["activation"] = "tanh";
  kv["seed"] = std::to_string(m.seed);
  kv["steps"] = std::to_string(m.steps);
  kv["status"] = m.status.empty() ? "untrained" : m.status;
  if (!m.selected_voxels.empty()) {
    kv["selected_voxels"] = detail::join_sizes(m.selected_voxels);
  }
  kv["alpha_tau"] = format_double(m.vb.hyper.alpha_tau);
  kv["beta_tau"] = format_double(m.vb.hyper.beta_tau);
  kv["alpha_eta"] = format_double(m.vb.hyper.alpha_eta);
  kv["beta_eta"] = format_double(m.vb.hyper.beta_eta);
  kv["alpha_gamma"] = format_double(m.vb.hyper.alpha_gamma);
  kv["beta_gamma"] = format_double(m.vb.hyper.beta_gamma);
  write_key_value_file(dir / "manifest.txt", kv);

  save_mlp(m.recog, dir / "recog");
  save_mlp(m.gen, dir / "gen");

  const auto vbdir = dir / "vb";
  std::filesystem::create_directories(vbdir);
  detail::write_matrix_bin(vbdir / "b_mean.bin", m.vb.q_b.mean);
  detail::write_matrix_bin(vbdir / "h_mean.bin", m.vb.q_h.mean);
  detail::write_matrix_bin(vbdir / "zbar_mean.bin", m.vb.q_zbar.mean);
  detail::write_matrix_bin(vbdir / "zbar_cov.bin", m.vb.q_zbar.covariance);
  {
    std::vector<double> blocks;
    blocks.reserve(static_cast<std::size_t>(m.vb.d2() * m.vb.k * m.vb.k));
    for (const Matrix& c : m.vb.q_b.covariance) {
      for (Index i = 0; i < c.rows(); ++i) {
        for (Index j = 0; j < c.cols(); ++j) blocks.push_back(c(i, j));
      }
    }
    detail::write_doubles(vbdir / "b_cov.bin", blocks);
    blocks.clear();
    for (const Matrix& c : m.vb.q_h.covariance) {
      for (Index i = 0; i < c.rows(); ++i) {
        for (Index j = 0; j < c.cols(); ++j) blocks.push_back(c(i, j));
      }
    }
    detail::write_doubles(vbdir / "h_cov.bin", blocks);
  }
  std::ofstream gammas(vbdir / "gamma.txt");
  gammas << format_double(m.vb.q_gamma.shape) << ' '
         << format_double(m.vb.q_gamma.rate) << '\n';
  std::ofstream taus(vbdir / "tau.csv");
  std::ofstream etas(vbdir / "eta.csv");
  for (Index j = 0; j < m.vb.d2(); ++j) {
    taus << format_double(m.vb.q_tau[j].shape) << ','
         << format_double(m.vb.q_tau[j].rate) << '\n';
    etas << format_double(m.vb.q_eta[j].shape) << ','
         << format_double(m.vb.q_eta[j].rate) << '\n';
  }
}

inline ModelBundle load_model(const std::filesystem::path& dir) {
  const KeyValueMap kv = read_key_value_file(dir / "manifest.txt");
  const auto need = [&](const char* key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) {
      throw IoError(dir.string() + ": model manifest missing key '" +
                    std::string(key) + "'");
    }
    return it->second;
  };
  ModelBundle m;
  const Index k = std::stoll(need("k"));
  const Index kbar = std::stoll(need("kbar"));
  const Index d2 = std::stoll(need("d2"));
  const Index n_train = std::stoll(need("n_train"));
  m.d1 = std::stoll(need("d1"));
  m.d2 = d2;
  m.seed = std::stoull(need("seed"));
  m.steps = kv.count("steps") ? std::stoll(kv.at("steps")) : 0;
  m.status = kv.count("status") ? kv.at("status") : "";
  if (kv.count("selected_voxels")) {
    m.selected_voxels = detail::parse_sizes(kv.at("selected_voxels"));
  }

  m.recog =
      load_mlp(dir / "recog", detail::parse_sizes(need("recog_sizes")), false);
  m.gen = load_mlp(dir / "gen", detail::parse_sizes(need("gen_sizes")),
                   need("gen_logistic") == "1");

  m.vb.k = k;
  m.vb.kbar = kbar;
  m.vb.hyper.alpha_tau = parse_double(need("alpha_tau"), "model manifest");
  m.vb.hyper.beta_tau = parse_double(need("beta_tau"), "model manifest");
  m.vb.hyper.alpha_eta = parse_double(need("alpha_eta"), "model manifest");
  m.vb.hyper.beta_eta = parse_double(need("beta_eta"), "model manifest");
  m.vb.hyper.alpha_gamma = parse_double(need("alpha_gamma"), "model manifest");
  m.vb.hyper.beta_gamma = parse_double(need("beta_gamma"), "model manifest");

  const auto vbdir = dir / "vb";
  m.vb.q_b.mean = detail::read_matrix_bin(vbdir / "b_mean.bin", k, d2);
  m.vb.q_h.mean = detail::read_matrix_bin(vbdir / "h_mean.bin", kbar, d2);
  m.vb.q_zbar.mean =
      detail::read_matrix_bin(vbdir / "zbar_mean.bin", n_train, kbar);
  m.vb.q_zbar.covariance =
      detail::read_matrix_bin(vbdir / "zbar_cov.bin", kbar, kbar);
  {
    const std::vector<double> blocks = detail::read_doubles(
        vbdir / "b_cov.bin", static_cast<std::size_t>(d2 * k * k));
    std::size_t idx = 0;
    m.vb.q_b.covariance.assign(static_cast<std::size_t>(d2), Matrix(k, k));
    for (Matrix& c : m.vb.q_b.covariance) {
      for (Index i = 0; i < k; ++i) {
        for (Index j = 0; j < k; ++j) c(i, j) = blocks[idx++];
      }
    }
  }
  {
    const std::vector<double> blocks = detail::read_doubles(
        vbdir / "h_cov.bin", static_cast<std::size_t>(d2 * kbar * kbar));
    std::size_t idx = 0;
    m.vb.q_h.covariance.assign(static_cast<std::size_t>(d2),
                               Matrix(kbar, kbar));
    for (Matrix& c : m.vb.q_h.covariance) {
      for (Index i = 0; i < kbar; ++i) {
        for (Index j = 0; j < kbar; ++j) c(i, j) = blocks[idx++];
      }
    }
  }
  {
    std::ifstream in(vbdir / "gamma.txt");
    if (!in) throw MissingFile((vbdir / "gamma.txt").string());
    double shape = 0.0, rate = 0.0;
    in >> shape >> rate;
    m.vb.q_gamma = GammaPosterior(shape, rate);
  }
  const Matrix taus = read_matrix_csv(vbdir / "tau.csv");
  const Matrix etas = read_matrix_csv(vbdir / "eta.csv");
  if (taus.rows() != d2 || etas.rows() != d2) {
    throw IoError("model: tau/eta row count != D2");
  }
  for (Index j = 0; j < d2; ++j) {
    m.vb.q_tau.emplace_back(taus(j, 0), taus(j, 1));
    m.vb.q_eta.emplace_back(etas(j, 0), etas(j, 1));
  }
  return m;
}

}  // namespace dgmm
