#include <doctest.h>

#include <cmath>
#include <random>

#include "../support/oracles.hpp"
#include "muie/geometry.hpp"

using namespace muie;

namespace {

DenseMask from_bits(int w, int h, std::initializer_list<int> bits) {
  DenseMask d(h, w);
  int i = 0;
  for (int b : bits) d(i / w, i % w) = b != 0, ++i;
  return d;
}

}  // namespace

TEST_SUITE("geometry") {
  TEST_CASE("rle decodes row-major, background first") {
    const DenseMask d = rle_decode(ImageMask(2, 2, {1, 2, 1}));
    CHECK(d(0, 0) == false);
    CHECK(d(0, 1) == true);
    CHECK(d(1, 0) == true);
    CHECK(d(1, 1) == false);
    const auto bits = oracle::expand_runs({1, 2, 1});
    for (int i = 0; i < 4; ++i) CHECK(d(i / 2, i % 2) == bits[i]);
  }

  TEST_CASE("rle encode gives canonical runs") {
    CHECK(rle_encode(from_bits(2, 2, {1, 1, 0, 0})).runs() == std::vector<std::uint32_t>{0, 2, 2});
    CHECK(rle_encode(from_bits(2, 2, {0, 0, 0, 0})).runs() == std::vector<std::uint32_t>{4});
    // zero-length interior runs collapse
    CHECK(canonical(ImageMask(2, 2, {1, 0, 2, 1})).runs() == std::vector<std::uint32_t>{3, 1});
  }

  TEST_CASE("rle round trip on random masks") {
    std::mt19937 rng(7);
    for (int t = 0; t < 200; ++t) {
      const int w = 1 + rng() % 40, h = 1 + rng() % 40;
      DenseMask d(h, w);
      const double p = (rng() % 100) / 100.0;
      std::bernoulli_distribution bit(p);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) d(y, x) = bit(rng);
      const ImageMask m = rle_encode(d);
      CHECK((rle_decode(m) == d).all());
      CHECK(rle_encode(rle_decode(m)).runs() == m.runs());
    }
  }

  TEST_CASE("mask IoU on the 2x2 fixture is 1/3") {
    const DenseMask a = from_bits(2, 2, {1, 1, 0, 0});
    const DenseMask b = from_bits(2, 2, {0, 1, 0, 1});
    CHECK(mask_iou(a, b) == doctest::Approx(1.0 / 3).epsilon(1e-12));
    CHECK(std::abs(mask_iou(a, b) - oracle::pixel_iou({1, 1, 0, 0}, {0, 1, 0, 1})) < 1e-15);
    CHECK(mask_iou(DenseMask(DenseMask::Zero(2, 2)), DenseMask(DenseMask::Zero(2, 2))) == 1.0);
    CHECK(mask_iou<float>(a, b) == doctest::Approx(1.0 / 3));
    CHECK_THROWS_AS(mask_iou(a, from_bits(1, 1, {1})), InvalidArgument);
  }

  TEST_CASE("dice loss on the 2x2 fixture is 0.5") {
    const DenseMask a = from_bits(2, 2, {1, 1, 0, 0});
    const DenseMask b = from_bits(2, 2, {0, 1, 0, 1});
    CHECK(std::abs(dice_loss(a, b) - 0.5) < 1e-12);
    CHECK(dice_loss(a, a) == 0.0);
  }

  TEST_CASE("bce closed forms") {
    const double eps = 1e-6;
    const DenseMask g = from_bits(2, 2, {1, 0, 1, 0});
    const DenseMask c = from_bits(2, 2, {0, 1, 0, 1});
    const DenseMask half = from_bits(2, 2, {1, 1, 0, 0});
    CHECK(std::abs(bce_loss(g, g, eps) - (-std::log(1 - eps))) < 1e-15);
    CHECK(std::abs(bce_loss(c, g, eps) - (-std::log(eps))) < 1e-9);
    CHECK(std::abs(bce_loss(half, g, eps) - (-std::log(1 - eps) - std::log(eps)) / 2) < 1e-9);
    CHECK(bce_loss(g, g, eps) == doctest::Approx(1.0000005e-6).epsilon(1e-6));
    CHECK(bce_loss(c, g, eps) == doctest::Approx(13.8155).epsilon(1e-5));
    CHECK_THROWS_AS(bce_loss(g, g, 0.0), InvalidArgument);
    CHECK_THROWS_AS(bce_loss(g, g, 0.5), InvalidArgument);
  }

  TEST_CASE("1d span IoU") {
    CHECK(std::abs(span_iou_1d(AudioSegment(0, 10), AudioSegment(5, 15)) - 1.0 / 3) < 1e-12);
    CHECK(span_iou_1d(AudioSegment(0, 1), AudioSegment(2, 3)) == 0.0);
    CHECK(span_iou_1d(AudioSegment(0, 1), AudioSegment(0, 1)) == 1.0);
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(0, 10);
    for (int i = 0; i < 500; ++i) {
      double a = u(rng), b = a + 0.01 + u(rng), c = u(rng), d = c + 0.01 + u(rng);
      const double got = span_iou_1d(AudioSegment(a, b), AudioSegment(c, d));
      CHECK(std::abs(got - oracle::interval_iou(a, b, c, d)) < 1e-12);
      CHECK(got == span_iou_1d(AudioSegment(c, d), AudioSegment(a, b)));
    }
  }

  TEST_CASE("tracklet profile averages frames, missing frames score 0") {
    const ImageMask full(2, 1, {0, 2});
    const ImageMask left(2, 1, {0, 1, 1});
    const Tracklet a({{0, full}, {1, full}});
    const Tracklet b({{0, full}, {1, left}});
    const auto prof = tracklet_iou_profile(a, b);
    CHECK(std::abs(prof.mean - 0.75) < 1e-12);
    CHECK(prof.per_frame.at(1) == 0.5);
    const Tracklet c({{0, full}, {5, full}});
    CHECK(tracklet_iou_profile(a, c).mean == doctest::Approx(1.0 / 3));
  }
}
