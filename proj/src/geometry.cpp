#include "muie/geometry.hpp"

#include <limits>

namespace muie {

DenseMask rle_decode(const ImageMask& mask) {
  DenseMask dense(mask.height(), mask.width());
  bool* out = dense.data();
  bool value = false;
  std::size_t pos = 0;
  for (const auto run : mask.runs()) {
    std::fill(out + pos, out + pos + run, value);
    pos += run;
    value = !value;
  }
  return dense;
}

ImageMask rle_encode(const DenseMask& dense) {
  if (dense.rows() > std::numeric_limits<int>::max() ||
      dense.cols() > std::numeric_limits<int>::max()) {
    throw InvalidArgument("rle_encode: mask too large");
  }
  std::vector<std::uint32_t> runs;
  const bool* p = dense.data();
  const Eigen::Index n = dense.size();
  bool value = false;
  std::uint32_t count = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (p[i] != value) {
      runs.push_back(count);
      value = !value;
      count = 0;
    }
    ++count;
  }
  runs.push_back(count);
  return ImageMask(static_cast<int>(dense.cols()), static_cast<int>(dense.rows()),
                   std::move(runs));
}

ImageMask canonical(const ImageMask& mask) { return rle_encode(rle_decode(mask)); }

}  // namespace muie
