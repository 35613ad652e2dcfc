#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "dgmm/errors.hpp"
#include "dgmm/linalg.hpp"

namespace dgmm {

// Binary P5 grayscale dump; values are scaled from [lo, hi] to [0, 255].
// lo == hi falls back to a flat mid-gray image.
inline void write_pgm(const std::filesystem::path& path, const Matrix& image,
                      double lo, double hi) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "P5\n" << image.cols() << ' ' << image.rows() << "\n255\n";
  const double span = hi - lo;
  for (Index r = 0; r < image.rows(); ++r) {
    for (Index c = 0; c < image.cols(); ++c) {
      double v = span > 0.0 ? (image(r, c) - lo) / span : 0.5;
      v = std::clamp(v, 0.0, 1.0);
      const unsigned char byte = static_cast<unsigned char>(
          std::lround(v * 255.0));
      out.put(static_cast<char>(byte));
    }
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace dgmm
