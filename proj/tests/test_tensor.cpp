#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "coarsecrop/tensor.hpp"
#include "oracles.hpp"

using namespace coarsecrop;

TEST_CASE("channel_sum matches a triple loop") {
  std::mt19937_64 gen(1);
  for (int trial = 0; trial < 20; ++trial) {
    std::uniform_int_distribution<int> dim(1, 12);
    const FeatureMap f = oracle::random_features(gen, dim(gen), dim(gen), dim(gen));
    const RawScoreMap got = channel_sum(f);
    const RawScoreMap want = oracle::triple_loop_channel_sum(f);
    REQUIRE(got.height() == want.height());
    REQUIRE(got.width() == want.width());
    for (std::size_t k = 0; k < got.size(); ++k) CHECK(got.values()[k] == want.values()[k]);
  }
}

TEST_CASE("channel_sum is linear") {
  std::mt19937_64 gen(2);
  const FeatureMap a = oracle::random_features(gen, 16, 7, 9);
  const FeatureMap b = oracle::random_features(gen, 16, 7, 9);
  const float alpha = 0.75f, beta = -1.5f;
  FeatureMap mix(16, 7, 9);
  for (std::size_t k = 0; k < mix.values().size(); ++k)
    mix.values()[k] = alpha * a.values()[k] + beta * b.values()[k];
  const auto sa = channel_sum(a), sb = channel_sum(b), sm = channel_sum(mix);
  for (std::size_t k = 0; k < sm.size(); ++k)
    CHECK(std::abs(sm.values()[k] - (alpha * sa.values()[k] + beta * sb.values()[k])) < 1e-4);
}

TEST_CASE("FeatureMap rejects bad shapes and non-finite values") {
  CHECK_THROWS_AS(FeatureMap(0, 2, 2), std::invalid_argument);
  CHECK_THROWS_AS(FeatureMap(1, 2, 2, std::vector<float>(3)), std::invalid_argument);
  std::vector<float> v(4, 0.0f);
  v[2] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(FeatureMap(1, 2, 2, v), std::invalid_argument);
  v[2] = std::numeric_limits<float>::infinity();
  CHECK_THROWS_AS(FeatureMap(1, 2, 2, v), std::invalid_argument);
}

TEST_CASE("minmax_normalize") {
  SUBCASE("range and endpoints") {
    std::mt19937_64 gen(3);
    const auto raw = oracle::random_plane(gen, 11, 13, -50.0f, 80.0f);
    const auto n = minmax_normalize(raw);
    float lo = 2, hi = -1;
    for (float v : n.values()) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    CHECK(lo == 0.0f);
    CHECK(hi == 1.0f);
  }
  SUBCASE("constant map becomes zeros") {
    const RawScoreMap flat(4, 5, 3.25f);
    const auto n = minmax_normalize(flat);
    for (float v : n.values()) CHECK(v == 0.0f);
  }
  SUBCASE("single pixel") { CHECK(minmax_normalize(RawScoreMap(1, 1, -7.0f))(0, 0) == 0.0f); }
}

TEST_CASE("bilinear_upsample matches the per-pixel formula") {
  std::mt19937_64 gen(4);
  for (int trial = 0; trial < 10; ++trial) {
    std::uniform_int_distribution<int> src(1, 8), factor(1, 40);
    const int h = src(gen), w = src(gen);
    const int H = h + factor(gen), W = w + factor(gen);
    const auto a = oracle::random_plane(gen, h, w);
    const auto up = bilinear_upsample(a, H, W);
    for (int i = 0; i < H; ++i)
      for (int j = 0; j < W; ++j) CHECK(std::abs(up(i, j) - oracle::bilinear_pixel(a, H, W, i, j)) < 1e-6);
  }
}

TEST_CASE("bilinear identity at scale 1") {
  std::mt19937_64 gen(5);
  const auto a = oracle::random_plane(gen, 9, 14);
  const auto same = bilinear_upsample(a, 9, 14);
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(std::abs(same.values()[k] - a.values()[k]) < 1e-6);
}

TEST_CASE("bilinear_upsample refuses to shrink") {
  const RawScoreMap a(4, 4, 0.5f);
  CHECK_THROWS_AS(bilinear_upsample(a, 3, 8), std::invalid_argument);
  CHECK_THROWS_AS(bilinear_upsample(a, 8, 3), std::invalid_argument);
  CHECK_NOTHROW(bilinear_resize(a, 2, 2));
}

TEST_CASE("make_score_map is in [0, 1] at image size") {
  std::mt19937_64 gen(6);
  const auto f = oracle::random_features(gen, 32, 5, 7);
  const ScoreMap m = make_score_map(f, 160, 224);
  CHECK(m.height() == 160);
  CHECK(m.width() == 224);
  for (float v : m.plane().values()) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
}

TEST_CASE("ScoreMap validates its range") {
  CHECK_THROWS_AS(ScoreMap(Plane<float>(2, 2, 1.5f)), std::invalid_argument);
  CHECK_THROWS_AS(ScoreMap(Plane<float>(2, 2, -0.01f)), std::invalid_argument);
  CHECK_NOTHROW(ScoreMap(Plane<float>(2, 2, 1.0f)));
}

TEST_CASE("summed-area table: exhaustive rectangles on small maps") {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 5; ++trial) {
    const auto p = oracle::random_plane(gen, 6 + trial, 9 - trial);
    const auto sat = build_sat(p);
    CHECK(sat.height() == p.height());
    CHECK(sat.width() == p.width());
    for (int y1 = 0; y1 <= p.height(); ++y1)
      for (int y2 = y1; y2 <= p.height(); ++y2)
        for (int x1 = 0; x1 <= p.width(); ++x1)
          for (int x2 = x1; x2 <= p.width(); ++x2) {
            const double want = oracle::pixel_sum(p, x1, y1, x2, y2);
            CHECK(sat.rect_sum({x1, y1, x2, y2}) == doctest::Approx(want).epsilon(1e-9));
          }
  }
}

TEST_CASE("worked examples") {
  SUBCASE("single channel passes through") {
    const FeatureMap f(1, 2, 3, {1, -2, 3, 4.5f, 5, 6});
    const auto s = channel_sum(f);
    for (std::size_t k = 0; k < 6; ++k) CHECK(s.values()[k] == f.values()[k]);
  }
  SUBCASE("two channels add elementwise") {
    const FeatureMap f(2, 2, 2, {1, 2, 3, 4, 10, 20, 30, 40});
    const auto s = channel_sum(f);
    CHECK(s == RawScoreMap(2, 2, {11, 22, 33, 44}));
  }
  SUBCASE("affine normalization") {
    CHECK(minmax_normalize(RawScoreMap(2, 2, {1, 3, 3, 5})) == RawScoreMap(2, 2, {0, 0.5f, 0.5f, 1}));
  }
  SUBCASE("1x1 upsamples to a constant") {
    const auto up = bilinear_upsample(RawScoreMap(1, 1, 0.375f), 17, 9);
    for (float v : up.values()) CHECK(v == 0.375f);
  }
  SUBCASE("2x2 to 4x4") {
    const RawScoreMap a(2, 2, {0, 1, 0, 1});
    const auto up = bilinear_upsample(a, 4, 4);
    const float row[4] = {0.0f, 0.25f, 0.75f, 1.0f};
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        CHECK(up(i, j) == doctest::Approx(row[j]).epsilon(1e-7));
        CHECK(up(i, j) == doctest::Approx(oracle::bilinear_pixel(a, 4, 4, i, j)).epsilon(1e-7));
      }
  }
  SUBCASE("all-ones 3x3 sums") {
    const auto sat = build_sat(Plane<float>(3, 3, 1.0f));
    CHECK(sat.rect_sum({0, 0, 3, 3}) == 9.0);
    CHECK(sat.rect_sum({1, 0, 3, 2}) == 4.0);
  }
}

TEST_CASE("summed-area table on a 17x13 map with random boxes") {
  std::mt19937_64 gen(8);
  const auto p = oracle::random_plane(gen, 17, 13);
  const auto sat = build_sat(p);
  for (int t = 0; t < 100; ++t) {
    const auto b = oracle::random_int_box(gen, 13, 17);
    const double want = oracle::pixel_sum(p, int(b.x1), int(b.y1), int(b.x2), int(b.y2));
    CHECK(std::abs(sat.rect_sum({int(b.x1), int(b.y1), int(b.x2), int(b.y2)}) - want) <= 1e-6 * std::abs(want));
  }
}

TEST_CASE("normalization properties") {
  std::mt19937_64 gen(9);
  for (int t = 0; t < 20; ++t) {
    const auto raw = oracle::random_plane(gen, 6, 7, -3.0f, 9.0f);
    const auto n = minmax_normalize(raw);
    CHECK(minmax_normalize(n) == n);  // idempotent once min = 0 and max = 1
    for (std::size_t a = 0; a < raw.size(); ++a)
      for (std::size_t b = 0; b < raw.size(); ++b)
        if (raw.values()[a] < raw.values()[b]) CHECK(n.values()[a] < n.values()[b]);
  }
}

TEST_CASE("bilinear upsampling never overshoots") {
  std::mt19937_64 gen(10);
  for (int t = 0; t < 20; ++t) {
    const auto a = oracle::random_plane(gen, 5, 4, -2.0f, 3.0f);
    const auto [lo, hi] = std::minmax_element(a.values().begin(), a.values().end());
    const auto up = bilinear_upsample(a, 5 + 7 * t, 4 + 11 * t);
    for (float v : up.values()) {
      CHECK(v >= *lo);
      CHECK(v <= *hi);
    }
  }
}

TEST_CASE("summed-area table: sampled rectangles up to 32x32") {
  std::mt19937_64 gen(11);
  const auto p = oracle::random_plane(gen, 32, 32);
  const auto sat = build_sat(p);
  for (int t = 0; t < 3000; ++t) {
    const auto b = oracle::random_int_box(gen, 32, 32);
    const PixelRect r{int(b.x1), int(b.y1), int(b.x2), int(b.y2)};
    CHECK(sat.rect_sum(r) == doctest::Approx(oracle::pixel_sum(p, r.x1, r.y1, r.x2, r.y2)).epsilon(1e-9));
  }
}
