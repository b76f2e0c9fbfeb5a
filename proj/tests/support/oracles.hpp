// Independent reference computations used to cross-check the library.
// Nothing here calls into muie's metric or matching code.
#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <set>
#include <string>
#include <tuple>
#include <vector>

namespace muie::oracle {

/// Minimum over all permutations of sum cost[i][perm[i]].
template <typename T>
T brute_force_assignment(const std::vector<std::vector<T>>& cost) {
  const std::size_t n = cost.size();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  T best = std::numeric_limits<T>::max();
  do {
    T s = T(0);
    for (std::size_t i = 0; i < n; ++i) s += cost[i][perm[i]];
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return n == 0 ? T(0) : best;
}

/// Row-major bits; runs alternate starting with background.
inline std::vector<bool> expand_runs(const std::vector<std::uint32_t>& runs) {
  std::vector<bool> bits;
  bool value = false;
  for (auto r : runs) {
    bits.insert(bits.end(), r, value);
    value = !value;
  }
  return bits;
}

inline double pixel_iou(const std::vector<bool>& a, const std::vector<bool>& b) {
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += a[i] && b[i];
    uni += a[i] || b[i];
  }
  return uni == 0 ? 1.0 : double(inter) / double(uni);
}

inline double interval_iou(double s1, double e1, double s2, double e2) {
  const double inter = std::max(0.0, std::min(e1, e2) - std::max(s1, s2));
  return inter / ((e1 - s1) + (e2 - s2) - inter);
}

struct Counts {
  long tp = 0, fp = 0, fn = 0;
};

template <typename Tuple>
Counts set_counts(const std::vector<Tuple>& gold, const std::vector<Tuple>& pred) {
  const std::set<Tuple> g(gold.begin(), gold.end()), p(pred.begin(), pred.end());
  Counts c;
  for (const auto& t : p) (g.count(t) ? c.tp : c.fp)++;
  for (const auto& t : g) c.fn += p.count(t) ? 0 : 1;
  return c;
}

inline double f1_of(const Counts& c) {
  const double p = c.tp + c.fp ? double(c.tp) / double(c.tp + c.fp) : 0.0;
  const double r = c.tp + c.fn ? double(c.tp) / double(c.tp + c.fn) : 0.0;
  return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
}

}  // namespace muie::oracle
