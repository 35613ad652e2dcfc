#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "dgmm/csv.hpp"
#include "dgmm/errors.hpp"
#include "dgmm/linalg.hpp"

namespace dgmm {

// Pearson correlation of two vectors. Undefined when either input is
// constant (zero variance in the denominator).
inline double pcc(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw ShapeMismatch("pcc: length mismatch");
  if (a.size() < 2) throw InvalidArgument("pcc: need length >= 2");
  const Vector ca = a.array() - a.mean();
  const Vector cb = b.array() - b.mean();
  const double sa = ca.squaredNorm();
  const double sb = cb.squaredNorm();
  if (sa == 0.0 || sb == 0.0) {
    throw ZeroVariance("pcc: constant input vector");
  }
  return ca.dot(cb) / std::sqrt(sa * sb);
}

// NaN instead of throwing, for pipelines that score many instances.
inline double safe_pcc(const Vector& a, const Vector& b) {
  try {
    return pcc(a, b);
  } catch (const ZeroVariance&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

inline double mse(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw ShapeMismatch("mse: length mismatch");
  if (a.size() < 1) throw InvalidArgument("mse: empty input");
  return (a - b).squaredNorm() / static_cast<double>(a.size());
}

namespace detail {

inline Matrix gaussian_window(Index size, double sigma) {
  Matrix w(size, size);
  const double c = (static_cast<double>(size) - 1.0) / 2.0;
  for (Index i = 0; i < size; ++i) {
    for (Index j = 0; j < size; ++j) {
      const double di = static_cast<double>(i) - c;
      const double dj = static_cast<double>(j) - c;
      w(i, j) = std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
    }
  }
  return w / w.sum();
}

inline double ssim_formula(double mu1, double mu2, double var1, double var2,
                           double cov, double c1, double c2) {
  return ((2.0 * mu1 * mu2 + c1) * (2.0 * cov + c2)) /
         ((mu1 * mu1 + mu2 * mu2 + c1) * (var1 + var2 + c2));
}

}  // namespace detail

// Structural similarity of two equally shaped grayscale images. For images
// at least 11x11 this is the mean local SSIM under an 11x11 Gaussian window
// (sigma 1.5) over all valid positions; smaller images use whole-image
// statistics. K1 = 0.01 and K2 = 0.03 against the given dynamic range.
inline double ssim(const Matrix& a, const Matrix& b, double dynamic_range) {
  require_same_shape(a, b, "ssim");
  if (a.size() == 0) throw InvalidArgument("ssim: empty image");
  if (!(dynamic_range > 0.0)) {
    throw InvalidArgument("ssim: dynamic range must be > 0");
  }
  const double c1 = (0.01 * dynamic_range) * (0.01 * dynamic_range);
  const double c2 = (0.03 * dynamic_range) * (0.03 * dynamic_range);

  const Index win = 11;
  if (a.rows() < win || a.cols() < win) {
    // Global-statistics fallback: uniform weights over the whole image.
    const double n = static_cast<double>(a.size());
    const double mu1 = a.mean(), mu2 = b.mean();
    const double var1 = (a.array() - mu1).square().sum() / n;
    const double var2 = (b.array() - mu2).square().sum() / n;
    const double cov =
        ((a.array() - mu1) * (b.array() - mu2)).sum() / n;
    return detail::ssim_formula(mu1, mu2, var1, var2, cov, c1, c2);
  }

  const Matrix w = detail::gaussian_window(win, 1.5);
  double total = 0.0;
  Index count = 0;
  for (Index r = 0; r + win <= a.rows(); ++r) {
    for (Index c = 0; c + win <= a.cols(); ++c) {
      const auto pa = a.block(r, c, win, win).array();
      const auto pb = b.block(r, c, win, win).array();
      const double mu1 = (w.array() * pa).sum();
      const double mu2 = (w.array() * pb).sum();
      const double var1 = (w.array() * pa.square()).sum() - mu1 * mu1;
      const double var2 = (w.array() * pb.square()).sum() - mu2 * mu2;
      const double cov = (w.array() * pa * pb).sum() - mu1 * mu2;
      total += detail::ssim_formula(mu1, mu2, var1, var2, cov, c1, c2);
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

// Row vector of W*H pixels -> H x W image (row-major pixel order).
inline Matrix vector_to_image(const Vector& v, Index width, Index height) {
  if (v.size() != width * height) {
    throw ShapeMismatch("vector_to_image: length != W*H");
  }
  Matrix img(height, width);
  for (Index r = 0; r < height; ++r) {
    for (Index c = 0; c < width; ++c) img(r, c) = v[r * width + c];
  }
  return img;
}

// Per-instance reconstruction quality; aggregates are recomputed from the
// per-instance vectors on demand. Undefined PCC instances carry NaN and are
// skipped by the aggregates.
struct MetricReport {
  Vector pcc_values;
  Vector mse_values;
  Vector ssim_values;

  static double finite_mean(const Vector& v) {
    double sum = 0.0;
    Index n = 0;
    for (Index i = 0; i < v.size(); ++i) {
      if (std::isfinite(v[i])) {
        sum += v[i];
        ++n;
      }
    }
    return n ? sum / static_cast<double>(n)
             : std::numeric_limits<double>::quiet_NaN();
  }
  static double finite_std(const Vector& v) {
    const double m = finite_mean(v);
    double sum = 0.0;
    Index n = 0;
    for (Index i = 0; i < v.size(); ++i) {
      if (std::isfinite(v[i])) {
        sum += (v[i] - m) * (v[i] - m);
        ++n;
      }
    }
    return n > 1 ? std::sqrt(sum / static_cast<double>(n - 1)) : 0.0;
  }

  std::string summary() const {
    std::ostringstream os;
    os << "metric  mean    std\n";
    os << "pcc     " << finite_mean(pcc_values) << "  " << finite_std(pcc_values)
       << "\n";
    os << "mse     " << finite_mean(mse_values) << "  " << finite_std(mse_values)
       << "\n";
    os << "ssim    " << finite_mean(ssim_values) << "  "
       << finite_std(ssim_values) << "\n";
    return os.str();
  }
};

inline MetricReport evaluate_reconstructions(const Matrix& truth,
                                             const Matrix& recon, Index width,
                                             Index height,
                                             double dynamic_range) {
  require_same_shape(truth, recon, "evaluate_reconstructions");
  MetricReport rep;
  rep.pcc_values.resize(truth.rows());
  rep.mse_values.resize(truth.rows());
  rep.ssim_values.resize(truth.rows());
  for (Index i = 0; i < truth.rows(); ++i) {
    const Vector t = truth.row(i).transpose();
    const Vector r = recon.row(i).transpose();
    rep.pcc_values[i] = safe_pcc(t, r);
    rep.mse_values[i] = mse(t, r);
    rep.ssim_values[i] = ssim(vector_to_image(t, width, height),
                              vector_to_image(r, width, height),
                              dynamic_range);
  }
  return rep;
}

inline void write_metric_report_csv(const std::filesystem::path& path,
                                    const MetricReport& rep) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "instance,pcc,mse,ssim\n";
  for (Index i = 0; i < rep.pcc_values.size(); ++i) {
    out << i << ',' << format_double(rep.pcc_values[i]) << ','
        << format_double(rep.mse_values[i]) << ','
        << format_double(rep.ssim_values[i]) << '\n';
  }
}

}  // namespace dgmm
