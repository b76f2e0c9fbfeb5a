// Mask, span and tracklet kernels: RLE codec, IoU, Dice and BCE losses.
#pragma once

#include <Eigen/Core>

#include <cmath>
#include <map>
#include <string>

#include "muie/core.hpp"

namespace muie {

/// Dense binary mask, rows = height, cols = width, row-major storage.
using DenseMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

DenseMask rle_decode(const ImageMask& mask);
/// Canonical RLE: background-first, no zero-length interior runs, at most one
/// leading zero run.
ImageMask rle_encode(const DenseMask& dense);
/// rle_encode(rle_decode(m)).
ImageMask canonical(const ImageMask& mask);

namespace detail {

inline void require_same_shape(const DenseMask& a, const DenseMask& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InvalidArgument(std::string(op) + ": dimension mismatch " + std::to_string(a.cols()) +
                              "x" + std::to_string(a.rows()) + " vs " + std::to_string(b.cols()) +
                              "x" + std::to_string(b.rows()),
                          "DIMENSION_MISMATCH");
  }
}

}  // namespace detail

template <typename Scalar = double>
Scalar mask_iou(const DenseMask& a, const DenseMask& b) {
  detail::require_same_shape(a, b, "mask_iou");
  const auto inter = (a && b).count();
  const auto uni = (a || b).count();
  if (uni == 0) return Scalar(1);
  return Scalar(inter) / Scalar(uni);
}

template <typename Scalar = double>
Scalar dice_coefficient(const DenseMask& a, const DenseMask& b) {
  detail::require_same_shape(a, b, "dice_coefficient");
  const auto total = a.count() + b.count();
  if (total == 0) return Scalar(1);
  return Scalar(2 * (a && b).count()) / Scalar(total);
}

template <typename Scalar = double>
Scalar dice_loss(const DenseMask& a, const DenseMask& b) {
  return Scalar(1) - dice_coefficient<Scalar>(a, b);
}

inline constexpr double kDefaultBceEpsilon = 1e-6;

/// Mean binary cross-entropy of hard predictions clamped to [eps, 1 - eps].
/// Not symmetric: `pred` is clamped, `gold` is the target.
template <typename Scalar = double>
Scalar bce_loss(const DenseMask& pred, const DenseMask& gold,
                Scalar epsilon = Scalar(kDefaultBceEpsilon)) {
  detail::require_same_shape(pred, gold, "bce_loss");
  if (!(epsilon > Scalar(0) && epsilon < Scalar(0.5))) {
    throw InvalidArgument("bce_loss: epsilon must lie in (0, 0.5)");
  }
  const Eigen::Index n = pred.size();
  if (n == 0) return Scalar(0);
  // Hard predictions: every pixel costs either -ln(1-eps) (agree) or -ln(eps).
  const Eigen::Index agree = (pred == gold).count();
  const Scalar agree_cost = -std::log1p(-epsilon);
  const Scalar disagree_cost = -std::log(epsilon);
  return (Scalar(agree) * agree_cost + Scalar(n - agree) * disagree_cost) / Scalar(n);
}

template <typename Scalar = double>
Scalar span_iou_1d(const AudioSegment& a, const AudioSegment& b) {
  const Scalar inter =
      std::max(Scalar(0), Scalar(std::min(a.end(), b.end()) - std::max(a.start(), b.start())));
  const Scalar uni = Scalar(a.length()) + Scalar(b.length()) - inter;
  return inter / uni;
}

template <typename Scalar = double>
struct TrackletProfile {
  std::map<int, Scalar> per_frame;
  Scalar mean = Scalar(0);
};

/// Per-frame IoU over the union of frame indices; a frame present in only one
/// tracklet scores 0.
template <typename Scalar = double>
TrackletProfile<Scalar> tracklet_iou_profile(const Tracklet& a, const Tracklet& b) {
  TrackletProfile<Scalar> out;
  for (const auto& [frame, mask] : a.frames()) {
    auto it = b.frames().find(frame);
    if (it == b.frames().end()) {
      out.per_frame[frame] = Scalar(0);
      continue;
    }
    if (mask.width() != it->second.width() || mask.height() != it->second.height()) {
      throw InvalidArgument("tracklet_iou_profile: frame " + std::to_string(frame) +
                                " dimension mismatch",
                            "DIMENSION_MISMATCH");
    }
    out.per_frame[frame] = mask_iou<Scalar>(rle_decode(mask), rle_decode(it->second));
  }
  for (const auto& [frame, mask] : b.frames()) {
    out.per_frame.try_emplace(frame, Scalar(0));
  }
  Scalar sum = Scalar(0);
  for (const auto& [frame, v] : out.per_frame) sum += v;
  out.mean = sum / Scalar(out.per_frame.size());
  return out;
}

}  // namespace muie
