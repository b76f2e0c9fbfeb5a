// Optimal bipartite matching between gold and predicted grounding sets.
#pragma once

#include <Eigen/Core>

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <type_traits>
#include <vector>

#include "muie/geometry.hpp"

namespace muie {

/// Square cost matrix; rows index gold items, columns index predictions.
template <typename Scalar>
using CostMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// One matched pair; an empty side is a padding slot.
struct MatchPair {
  std::optional<int> gold;
  std::optional<int> pred;
  bool real() const noexcept { return gold.has_value() && pred.has_value(); }
  friend bool operator==(const MatchPair&, const MatchPair&) = default;
};

template <typename Scalar = double>
struct Matching {
  std::vector<MatchPair> pairs;  // sorted by gold index, padded gold last
  Scalar total_cost = Scalar(0);  // real-real pairs only

  std::size_t real_pairs() const {
    std::size_t n = 0;
    for (const auto& p : pairs) n += p.real() ? 1 : 0;
    return n;
  }
};

/// Cost of any pair touching a padding slot. Larger than any real pair cost
/// (BCE at eps = 1e-6 plus Dice is at most about 14.8).
inline constexpr double kNullCost = 1e6;

namespace detail {

template <typename Scalar>
constexpr Scalar unbounded() {
  if constexpr (std::numeric_limits<Scalar>::has_infinity) {
    return std::numeric_limits<Scalar>::infinity();
  } else {
    return std::numeric_limits<Scalar>::max();
  }
}

/// Finds, among all perfect matchings of the equality subgraph `tight`, the
/// one whose column sequence (by row) is lexicographically smallest.
/// `col_of_row` must already hold a perfect matching inside `tight`.
inline void lexicographic_refine(const std::vector<std::vector<char>>& tight,
                                 std::vector<int>& col_of_row) {
  const int n = static_cast<int>(col_of_row.size());
  std::vector<int> row_of_col(n);
  for (int i = 0; i < n; ++i) row_of_col[col_of_row[i]] = i;
  std::vector<char> locked_col(n, 0), seen(n, 0);

  // Alternating path from free row `r` to free column `target`, avoiding
  // locked vertices and column `banned`.
  std::function<bool(int, int, int)> augment = [&](int r, int target, int banned) -> bool {
    for (int c = 0; c < n; ++c) {
      if (!tight[r][c] || locked_col[c] || c == banned || seen[c]) continue;
      seen[c] = 1;
      if (c == target || augment(row_of_col[c], target, banned)) {
        col_of_row[r] = c;
        row_of_col[c] = r;
        return true;
      }
    }
    return false;
  };

  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (!tight[i][j] || locked_col[j]) continue;
      if (col_of_row[i] == j) break;
      const int displaced = row_of_col[j];
      const int freed = col_of_row[i];
      const auto saved_cols = col_of_row;
      const auto saved_rows = row_of_col;
      col_of_row[i] = j;
      row_of_col[j] = i;
      row_of_col[freed] = -1;
      std::fill(seen.begin(), seen.end(), 0);
      if (augment(displaced, freed, j)) break;
      col_of_row = saved_cols;
      row_of_col = saved_rows;
    }
    locked_col[col_of_row[i]] = 1;
  }
}

}  // namespace detail

/// Minimum-cost perfect assignment (Kuhn-Munkres with potentials, O(P^3)).
/// Among equal-cost optima the assignment whose column sequence, read by row
/// index, is lexicographically smallest is returned. Integral scalars are
/// solved exactly.
template <typename Scalar>
Matching<Scalar> hungarian(const CostMatrix<Scalar>& costs) {
  if (costs.rows() != costs.cols()) {
    throw InvalidArgument("hungarian: cost matrix must be square");
  }
  if constexpr (std::is_floating_point_v<Scalar>) {
    if (!costs.allFinite()) throw InvalidArgument("hungarian: non-finite cost entry");
  }
  const int n = static_cast<int>(costs.rows());
  Matching<Scalar> out;
  if (n == 0) return out;

  const Scalar inf = detail::unbounded<Scalar>();
  // 1-based potentials; p[j] is the row matched to column j, way[] the
  // alternating-path back pointers.
  std::vector<Scalar> u(n + 1, Scalar(0)), v(n + 1, Scalar(0));
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<Scalar> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      Scalar delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const Scalar cur = costs(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> col_of_row(n);
  for (int j = 1; j <= n; ++j) col_of_row[p[j] - 1] = j - 1;

  // Every optimal assignment lives on edges with zero reduced cost.
  std::vector<std::vector<char>> tight(n, std::vector<char>(n, 0));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Scalar reduced = costs(i, j) - u[i + 1] - v[j + 1];
      if constexpr (std::is_floating_point_v<Scalar>) {
        using std::abs;
        const Scalar tol = Scalar(1e-12) * (Scalar(1) + abs(costs(i, j)) + abs(u[i + 1]) +
                                            abs(v[j + 1]));
        tight[i][j] = reduced <= tol;
      } else {
        tight[i][j] = reduced == Scalar(0);
      }
    }
    tight[i][col_of_row[i]] = 1;
  }
  detail::lexicographic_refine(tight, col_of_row);

  out.pairs.reserve(n);
  for (int i = 0; i < n; ++i) {
    out.pairs.push_back({i, col_of_row[i]});
    out.total_cost += costs(i, col_of_row[i]);
  }
  return out;
}

/// Pads the G x K real cost block to P x P with kNullCost, solves it, and
/// reports padding slots as empty sides. total_cost sums real pairs only.
Matching<double> match_padded(const CostMatrix<double>& real_costs);

/// Real-real cost bce_loss(pred, gold, eps) + dice_loss(pred, gold).
Matching<double> match_mask_sets(std::span<const DenseMask> gold, std::span<const DenseMask> pred,
                                 double epsilon = kDefaultBceEpsilon);

/// Real-real cost 1 - span_iou_1d.
Matching<double> match_span_sets(std::span<const AudioSegment> gold,
                                 std::span<const AudioSegment> pred);

/// Real-real cost 1 - mean per-frame IoU.
Matching<double> match_tracklet_sets(std::span<const Tracklet> gold,
                                     std::span<const Tracklet> pred);

}  // namespace muie
