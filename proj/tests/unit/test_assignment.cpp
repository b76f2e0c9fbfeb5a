#include <doctest.h>

#include <random>

#include "../support/oracles.hpp"
#include "muie/assignment.hpp"

using namespace muie;

namespace {

template <typename T>
std::vector<std::vector<T>> rows_of(const CostMatrix<T>& m) {
  std::vector<std::vector<T>> out(m.rows(), std::vector<T>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
  return out;
}

bool is_permutation_matching(const Matching<double>& m, int n) {
  std::vector<int> seen_g(n, 0), seen_p(n, 0);
  for (const auto& p : m.pairs) {
    if (!p.gold || !p.pred) return false;
    seen_g[*p.gold]++;
    seen_p[*p.pred]++;
  }
  return std::all_of(seen_g.begin(), seen_g.end(), [](int c) { return c == 1; }) &&
         std::all_of(seen_p.begin(), seen_p.end(), [](int c) { return c == 1; });
}

}  // namespace

TEST_SUITE("assignment") {
  TEST_CASE("2x2 fixture") {
    CostMatrix<double> c(2, 2);
    c << 1, 2, 3, 1;
    const auto m = hungarian(c);
    REQUIRE(m.pairs.size() == 2);
    CHECK(m.pairs[0] == MatchPair{0, 0});
    CHECK(m.pairs[1] == MatchPair{1, 1});
    CHECK(m.total_cost == 2.0);
  }

  TEST_CASE("empty and invalid matrices") {
    CHECK(hungarian(CostMatrix<double>(0, 0)).pairs.empty());
    CHECK_THROWS_AS(hungarian(CostMatrix<double>(2, 3)), InvalidArgument);
    CostMatrix<double> bad(1, 1);
    bad << std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(hungarian(bad), InvalidArgument);
  }

  TEST_CASE("ties resolve to the lexicographically smallest assignment") {
    CostMatrix<int> c = CostMatrix<int>::Zero(3, 3);
    const auto m = hungarian(c);
    for (int i = 0; i < 3; ++i) CHECK(*m.pairs[i].pred == i);
    CostMatrix<double> d(2, 2);
    d << 1, 1, 1, 1;
    CHECK(*hungarian(d).pairs[0].pred == 0);
  }

  TEST_CASE("random matrices agree with permutation enumeration") {
    std::mt19937 rng(11);
    for (int t = 0; t < 300; ++t) {
      const int n = 1 + rng() % 6;
      CostMatrix<long> ci(n, n);
      CostMatrix<double> cd(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          ci(i, j) = rng() % 20;  // many ties
          cd(i, j) = std::uniform_real_distribution<double>(0, 5)(rng);
        }
      CHECK(hungarian(ci).total_cost == oracle::brute_force_assignment(rows_of(ci)));
      const auto md = hungarian(cd);
      CHECK(std::abs(md.total_cost - oracle::brute_force_assignment(rows_of(cd))) < 1e-9);
      CHECK(is_permutation_matching(md, n));
    }
  }

  TEST_CASE("padding: unmatched gold is paired with an empty slot") {
    DenseMask a = DenseMask::Zero(2, 2), b = DenseMask::Zero(2, 2);
    a(0, 0) = true;
    b(1, 1) = true;
    const std::vector<DenseMask> gold{a, b}, pred{a};
    const auto m = match_mask_sets(gold, pred);
    REQUIRE(m.pairs.size() == 2);
    CHECK(m.pairs[0] == MatchPair{0, 0});
    CHECK(m.pairs[1] == MatchPair{1, std::nullopt});
    CHECK(m.real_pairs() == 1);
  }

  TEST_CASE("span matching fixture") {
    const std::vector<AudioSegment> gold{{0, 2}, {5, 7}}, pred{{5.5, 7}, {0, 1}};
    const auto m = match_span_sets(gold, pred);
    CHECK(m.pairs[0] == MatchPair{0, 1});
    CHECK(m.pairs[1] == MatchPair{1, 0});
  }

  TEST_CASE("tracklet matching: exact copy wins, disjoint goes unmatched") {
    DenseMask x = DenseMask::Zero(2, 2), y = DenseMask::Zero(2, 2);
    x(0, 0) = true;
    y(1, 1) = true;
    const Tracklet g({{0, rle_encode(x)}});
    const Tracklet disjoint({{3, rle_encode(y)}});
    const std::vector<Tracklet> gold{g}, pred{disjoint, g};
    const auto m = match_tracklet_sets(gold, pred);
    CHECK(m.pairs[0] == MatchPair{0, 1});
    CHECK(m.pairs[1] == MatchPair{std::nullopt, 0});
  }

  TEST_CASE("mask sets: cost agrees with enumeration over padded permutations") {
    std::mt19937 rng(5);
    for (int t = 0; t < 100; ++t) {
      const int g = rng() % 4, k = rng() % 4;
      std::vector<DenseMask> gold, pred;
      auto random_mask = [&] {
        DenseMask d(3, 3);
        for (int i = 0; i < 9; ++i) d(i / 3, i % 3) = rng() % 2;
        return d;
      };
      for (int i = 0; i < g; ++i) gold.push_back(random_mask());
      for (int i = 0; i < k; ++i) pred.push_back(random_mask());
      const int p = std::max(g, k);
      std::vector<std::vector<double>> cost(p, std::vector<double>(p, kNullCost));
      for (int i = 0; i < g; ++i)
        for (int j = 0; j < k; ++j) cost[i][j] = bce_loss(pred[j], gold[i]) + dice_loss(pred[j], gold[i]);
      const double best = oracle::brute_force_assignment(cost);
      const auto m = match_mask_sets(gold, pred);
      const double padded = m.total_cost + kNullCost * double(p - m.real_pairs());
      CHECK(std::abs(padded - best) < 1e-6);
      CHECK(m.real_pairs() == static_cast<std::size_t>(std::min(g, k)));
    }
  }
}
