#pragma once

#include <filesystem>
#include <fstream>
#include <utility>
#include <vector>

#include "dgmm/csv.hpp"
#include "dgmm/errors.hpp"
#include "dgmm/linalg.hpp"

namespace dgmm {

// Contiguous [begin, end) spans; sizes differ by at most one.
inline std::vector<std::pair<Index, Index>> fold_spans(Index n, int folds) {
  if (folds < 2) throw DegenerateFolds("need at least 2 folds");
  if (n < folds) throw DegenerateFolds("need N >= folds");
  std::vector<std::pair<Index, Index>> spans;
  spans.reserve(static_cast<std::size_t>(folds));
  for (int f = 0; f < folds; ++f) {
    spans.emplace_back(n * f / folds, n * (f + 1) / folds);
  }
  return spans;
}

struct VoxelScreeningReport {
  Vector r2;                    // out-of-fold R^2 per voxel
  std::vector<Index> selected;  // voxels with strictly positive R^2
  int folds = 0;
};

// Out-of-fold R^2 per voxel under a ridge encoder (pixels -> voxel), fit per
// fold with intercept via column centering. SS_tot is taken about the global
// column mean; constant voxels get R^2 = 0 and are excluded.
inline VoxelScreeningReport screen_voxels(const Matrix& x, const Matrix& y,
                                          int folds,
                                          double ridge_penalty = 1.0) {
  if (x.rows() != y.rows()) throw ShapeMismatch("screen_voxels: row mismatch");
  const Index n = x.rows(), d2 = y.cols();
  const auto spans = fold_spans(n, folds);

  Matrix pred(n, d2);
  for (const auto& [lo, hi] : spans) {
    std::vector<Index> fit_rows;
    fit_rows.reserve(static_cast<std::size_t>(n - (hi - lo)));
    for (Index i = 0; i < n; ++i) {
      if (i < lo || i >= hi) fit_rows.push_back(i);
    }
    const Matrix xf = x(fit_rows, Eigen::all);
    const Matrix yf = y(fit_rows, Eigen::all);
    const Eigen::RowVectorXd mx = xf.colwise().mean();
    const Eigen::RowVectorXd my = yf.colwise().mean();
    const Matrix xc = xf.rowwise() - mx;
    Matrix gram = xc.transpose() * xc;
    gram.diagonal().array() += ridge_penalty;
    // One factorization serves every voxel.
    const Matrix w =
        cholesky_solve(gram, xc.transpose() * (yf.rowwise() - my));
    pred.middleRows(lo, hi - lo) =
        ((x.middleRows(lo, hi - lo).rowwise() - mx) * w).rowwise() + my;
  }

  VoxelScreeningReport rep;
  rep.folds = folds;
  rep.r2.resize(d2);
  for (Index j = 0; j < d2; ++j) {
    const double mean = y.col(j).mean();
    const double ss_tot = (y.col(j).array() - mean).square().sum();
    if (ss_tot <= 0.0) {
      rep.r2[j] = 0.0;
      continue;
    }
    const double ss_res = (y.col(j) - pred.col(j)).squaredNorm();
    rep.r2[j] = 1.0 - ss_res / ss_tot;
  }
  for (Index j = 0; j < d2; ++j) {
    if (rep.r2[j] > 0.0) rep.selected.push_back(j);
  }
  return rep;
}

inline void write_screening_report_csv(const std::filesystem::path& path,
                                       const VoxelScreeningReport& rep) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "voxel,r2,selected\n";
  std::vector<char> sel(static_cast<std::size_t>(rep.r2.size()), 0);
  for (Index j : rep.selected) sel[static_cast<std::size_t>(j)] = 1;
  for (Index j = 0; j < rep.r2.size(); ++j) {
    out << j << ',' << format_double(rep.r2[j]) << ','
        << int(sel[static_cast<std::size_t>(j)]) << '\n';
  }
}

}  // namespace dgmm
