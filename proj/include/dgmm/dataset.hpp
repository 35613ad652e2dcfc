#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "dgmm/csv.hpp"
#include "dgmm/errors.hpp"
#include "dgmm/linalg.hpp"

namespace dgmm {

// Flat key = value file. Order of keys is fixed on write so serialized
// manifests are byte-stable.
using KeyValueMap = std::map<std::string, std::string>;

inline KeyValueMap read_key_value_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingFile(path.string());
  KeyValueMap kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto strip = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t");
      return s.substr(b, e - b + 1);
    };
    if (strip(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw IoError(path.string() + ":" + std::to_string(line_no) +
                    ": expected key = value");
    }
    const std::string key = strip(line.substr(0, eq));
    const std::string value = strip(line.substr(eq + 1));
    if (key.empty()) {
      throw IoError(path.string() + ":" + std::to_string(line_no) +
                    ": empty key");
    }
    kv[key] = value;
  }
  return kv;
}

inline void write_key_value_file(const std::filesystem::path& path,
                                 const KeyValueMap& kv) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& [k, v] : kv) out << k << " = " << v << '\n';
}

struct DatasetManifest {
  std::string name = "dataset";
  Index n = 0;
  Index d1 = 0;
  Index d2 = 0;
  Index image_width = 0;
  Index image_height = 0;
  std::string pixel_range = "real";  // "unit" for data bounded in [0,1]
  std::uint64_t seed = 0;
  bool y_standardized = false;
  std::string map_kind;                // synthetic provenance, may be empty
  std::vector<Index> dropped_voxels;   // original column ids removed by zscore
};

// Paired image matrix X (N x D1) and voxel matrix Y (N x D2) with split
// metadata. Pixel rows are vectorized images of manifest width x height.
struct TwoViewDataset {
  Matrix x;
  Matrix y;
  std::vector<Index> train_rows;
  std::vector<Index> test_rows;
  DatasetManifest manifest;

  Index n() const { return x.rows(); }
  Index d1() const { return x.cols(); }
  Index d2() const { return y.cols(); }

  Matrix x_train() const { return x(train_rows, Eigen::all); }
  Matrix y_train() const { return y(train_rows, Eigen::all); }
  Matrix x_test() const { return x(test_rows, Eigen::all); }
  Matrix y_test() const { return y(test_rows, Eigen::all); }

  void validate() const {
    if (x.rows() != y.rows()) {
      throw ShapeMismatch("dataset: X rows != Y rows");
    }
    if (manifest.n != x.rows() || manifest.d1 != x.cols() ||
        manifest.d2 != y.cols()) {
      throw ShapeMismatchWithManifest(
          "dataset dims (" + std::to_string(x.rows()) + ", " +
          std::to_string(x.cols()) + ", " + std::to_string(y.cols()) +
          ") disagree with manifest (" + std::to_string(manifest.n) + ", " +
          std::to_string(manifest.d1) + ", " + std::to_string(manifest.d2) +
          ")");
    }
    if (manifest.image_width * manifest.image_height != manifest.d1) {
      throw ShapeMismatchWithManifest("manifest W*H != D1");
    }
    require_finite(x, "X");
    require_finite(y, "Y");
    std::vector<char> seen(static_cast<std::size_t>(x.rows()), 0);
    for (const auto* split : {&train_rows, &test_rows}) {
      for (Index id : *split) {
        if (id < 0 || id >= x.rows()) {
          throw InvalidArgument("split row " + std::to_string(id) +
                                " out of range");
        }
        if (seen[static_cast<std::size_t>(id)]++) {
          throw InvalidArgument("split lists overlap at row " +
                                std::to_string(id));
        }
      }
    }
  }
};

namespace detail {

inline std::string join_indices(const std::vector<Index>& ids) {
  std::string s;
  for (Index id : ids) {
    if (!s.empty()) s += ',';
    s += std::to_string(id);
  }
  return s;
}

inline std::vector<Index> split_indices(const std::string& s) {
  std::vector<Index> ids;
  std::size_t start = 0;
  while (start < s.size()) {
    const auto comma = s.find(',', start);
    const auto len = (comma == std::string::npos ? s.size() : comma) - start;
    if (len > 0) ids.push_back(std::stoll(s.substr(start, len)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return ids;
}

}  // namespace detail

inline KeyValueMap manifest_to_kv(const DatasetManifest& m) {
  KeyValueMap kv;
  kv["name"] = m.name;
  kv["n"] = std::to_string(m.n);
  kv["d1"] = std::to_string(m.d1);
  kv["d2"] = std::to_string(m.d2);
  kv["image_width"] = std::to_string(m.image_width);
  kv["image_height"] = std::to_string(m.image_height);
  kv["pixel_range"] = m.pixel_range;
  kv["seed"] = std::to_string(m.seed);
  kv["y_standardized"] = m.y_standardized ? "1" : "0";
  if (!m.map_kind.empty()) kv["map_kind"] = m.map_kind;
  if (!m.dropped_voxels.empty()) {
    kv["dropped_voxels"] = detail::join_indices(m.dropped_voxels);
  }
  return kv;
}

inline DatasetManifest manifest_from_kv(const KeyValueMap& kv,
                                        const std::string& where) {
  DatasetManifest m;
  const auto need = [&](const char* key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) {
      throw IoError(where + ": manifest missing key '" + std::string(key) +
                    "'");
    }
    return it->second;
  };
  const auto opt = [&](const char* key, const std::string& fallback) {
    const auto it = kv.find(key);
    return it == kv.end() ? fallback : it->second;
  };
  m.name = opt("name", "dataset");
  m.n = std::stoll(need("n"));
  m.d1 = std::stoll(need("d1"));
  m.d2 = std::stoll(need("d2"));
  m.image_width = std::stoll(need("image_width"));
  m.image_height = std::stoll(need("image_height"));
  m.pixel_range = opt("pixel_range", "real");
  m.seed = std::stoull(opt("seed", "0"));
  m.y_standardized = opt("y_standardized", "0") == "1";
  m.map_kind = opt("map_kind", "");
  m.dropped_voxels = detail::split_indices(opt("dropped_voxels", ""));
  return m;
}

// Directory layout: manifest.txt, X.csv, Y.csv, split_train.txt,
// split_test.txt (+ optional truth/ written by the synthetic generator).
inline void save_dataset(const TwoViewDataset& ds,
                         const std::filesystem::path& dir) {
  ds.validate();
  std::filesystem::create_directories(dir);
  write_key_value_file(dir / "manifest.txt", manifest_to_kv(ds.manifest));
  write_matrix_csv(dir / "X.csv", ds.x);
  write_matrix_csv(dir / "Y.csv", ds.y);
  write_index_list(dir / "split_train.txt", ds.train_rows);
  write_index_list(dir / "split_test.txt", ds.test_rows);
}

inline TwoViewDataset load_dataset(const std::filesystem::path& dir) {
  TwoViewDataset ds;
  ds.manifest = manifest_from_kv(read_key_value_file(dir / "manifest.txt"),
                                 dir.string());
  ds.x = read_matrix_csv(dir / "X.csv");
  ds.y = read_matrix_csv(dir / "Y.csv");
  ds.train_rows = read_index_list(dir / "split_train.txt");
  ds.test_rows = read_index_list(dir / "split_test.txt");
  ds.validate();
  return ds;
}

// Standardizes voxel columns with train-split statistics (mean, unbiased
// variance). Zero-variance train columns cannot be scaled; they are dropped
// and their original ids recorded in the manifest.
inline TwoViewDataset zscore_voxels(const TwoViewDataset& ds) {
  if (ds.train_rows.empty()) {
    throw EmptyTrainingSet("zscore_voxels: empty train split");
  }
  const Matrix ytr = ds.y_train();
  const double n = static_cast<double>(ytr.rows());
  const Eigen::RowVectorXd mean = ytr.colwise().mean();
  Eigen::RowVectorXd var(ytr.cols());
  for (Index j = 0; j < ytr.cols(); ++j) {
    var[j] = (ytr.col(j).array() - mean[j]).square().sum() /
             std::max(1.0, n - 1.0);
  }
  std::vector<Index> keep, dropped;
  for (Index j = 0; j < ytr.cols(); ++j) {
    if (var[j] > 1e-12) {
      keep.push_back(j);
    } else {
      dropped.push_back(j);
    }
  }
  TwoViewDataset out = ds;
  out.y.resize(ds.y.rows(), static_cast<Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) {
    const Index j = keep[c];
    out.y.col(static_cast<Index>(c)) =
        (ds.y.col(j).array() - mean[j]) / std::sqrt(var[j]);
  }
  out.manifest.d2 = out.y.cols();
  out.manifest.y_standardized = true;
  for (Index j : dropped) out.manifest.dropped_voxels.push_back(j);
  return out;
}

}  // namespace dgmm
