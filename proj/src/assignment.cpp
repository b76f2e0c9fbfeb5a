#include "muie/assignment.hpp"

namespace muie {

Matching<double> match_padded(const CostMatrix<double>& real_costs) {
  const Eigen::Index g = real_costs.rows();
  const Eigen::Index k = real_costs.cols();
  const Eigen::Index p = std::max(g, k);
  CostMatrix<double> padded = CostMatrix<double>::Constant(p, p, kNullCost);
  padded.topLeftCorner(g, k) = real_costs;

  const Matching<double> solved = hungarian<double>(padded);
  Matching<double> out;
  out.pairs.reserve(p);
  for (const auto& pair : solved.pairs) {
    MatchPair m;
    if (*pair.gold < g) m.gold = *pair.gold;
    if (*pair.pred < k) m.pred = *pair.pred;
    if (m.real()) out.total_cost += real_costs(*m.gold, *m.pred);
    out.pairs.push_back(m);
  }
  return out;
}

Matching<double> match_mask_sets(std::span<const DenseMask> gold, std::span<const DenseMask> pred,
                                 double epsilon) {
  const DenseMask* first = !gold.empty() ? &gold.front() : (!pred.empty() ? &pred.front() : nullptr);
  for (const auto* set : {&gold, &pred}) {
    for (const auto& m : *set) detail::require_same_shape(*first, m, "match_mask_sets");
  }
  CostMatrix<double> costs(gold.size(), pred.size());
  for (std::size_t i = 0; i < gold.size(); ++i) {
    for (std::size_t j = 0; j < pred.size(); ++j) {
      costs(i, j) = bce_loss<double>(pred[j], gold[i], epsilon) + dice_loss<double>(pred[j], gold[i]);
    }
  }
  return match_padded(costs);
}

Matching<double> match_span_sets(std::span<const AudioSegment> gold,
                                 std::span<const AudioSegment> pred) {
  CostMatrix<double> costs(gold.size(), pred.size());
  for (std::size_t i = 0; i < gold.size(); ++i) {
    for (std::size_t j = 0; j < pred.size(); ++j) {
      costs(i, j) = 1.0 - span_iou_1d<double>(gold[i], pred[j]);
    }
  }
  return match_padded(costs);
}

Matching<double> match_tracklet_sets(std::span<const Tracklet> gold,
                                     std::span<const Tracklet> pred) {
  CostMatrix<double> costs(gold.size(), pred.size());
  for (std::size_t i = 0; i < gold.size(); ++i) {
    for (std::size_t j = 0; j < pred.size(); ++j) {
      costs(i, j) = 1.0 - tracklet_iou_profile<double>(gold[i], pred[j]).mean;
    }
  }
  return match_padded(costs);
}

}  // namespace muie
