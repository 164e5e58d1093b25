#include <doctest.h>

#include <random>

#include "coarsecrop/strategies.hpp"
#include "oracles.hpp"

using namespace coarsecrop;

namespace {

// Per-pixel coverage count of a box set over H x W.
std::vector<int> coverage(const std::vector<ScoredBox>& boxes, int H, int W) {
  std::vector<int> c(static_cast<std::size_t>(H) * W, 0);
  for (const auto& b : boxes)
    for (int y = int(b.y1); y < int(b.y2); ++y)
      for (int x = int(b.x1); x < int(b.x2); ++x) ++c[static_cast<std::size_t>(y) * W + x];
  return c;
}

}  // namespace

TEST_CASE("image_crop is the whole frame") {
  const auto set = image_crop(240, 320);
  REQUIRE(set.boxes.size() == 1);
  CHECK(set.boxes[0] == ScoredBox{0, 0, 320, 240, 0});
  CHECK(set.strategy.kind == StrategyKind::Image);
}

TEST_CASE("grid_crop tiles the image with 3 + 2 cells") {
  std::mt19937_64 gen(21);
  std::uniform_int_distribution<int> h(2, 300), w(6, 300);
  for (int t = 0; t < 40; ++t) {
    const int H = h(gen), W = w(gen);
    const auto set = grid_crop(H, W);
    REQUIRE(set.boxes.size() == 5);
    double area = 0;
    for (const auto& b : set.boxes) {
      CHECK(is_valid_box(b, W, H));
      area += b.area();
    }
    CHECK(area == double(H) * W);
    for (int c : coverage(set.boxes, H, W)) CHECK(c == 1);
    for (int k = 0; k < 3; ++k) CHECK(set.boxes[k].y2 == H / 2);
    for (int k = 3; k < 5; ++k) CHECK(set.boxes[k].y1 == H / 2);
  }
}

TEST_CASE("grid_crop remainders go to the last cell") {
  const auto set = grid_crop(101, 100);
  CHECK(set.boxes[0] == ScoredBox{0, 0, 33, 50, 0});
  CHECK(set.boxes[2] == ScoredBox{66, 0, 100, 50, 0});
  CHECK(set.boxes[4] == ScoredBox{50, 50, 100, 101, 0});
  CHECK_THROWS_AS(grid_crop(1, 100), std::invalid_argument);
  CHECK_THROWS_AS(grid_crop(100, 5), std::invalid_argument);
}

TEST_CASE("gt_crop copies annotations and warns when there are none") {
  const std::vector<ScoredBox> gt{{1, 2, 30, 40, 0}, {50, 60, 70, 80, 0}};
  const auto set = gt_crop(gt);
  CHECK(set.boxes == gt);
  CHECK(set.warnings.empty());
  const auto none = gt_crop({});
  CHECK(none.boxes.empty());
  CHECK(none.warnings.size() == 1);
}

TEST_CASE("gtpad_crop pads each side and clips") {
  const std::vector<ScoredBox> gt{{10, 20, 30, 60, 0}, {0, 0, 100, 10, 0}};
  const auto set = gtpad_crop(gt, 0.3, 100, 100);
  REQUIRE(set.boxes.size() == 2);
  CHECK(set.boxes[0].x1 == doctest::Approx(4));
  CHECK(set.boxes[0].y1 == doctest::Approx(8));
  CHECK(set.boxes[0].x2 == doctest::Approx(36));
  CHECK(set.boxes[0].y2 == doctest::Approx(72));
  CHECK(set.boxes[1] == ScoredBox{0, 0, 100, 13, 0});
  CHECK(gtpad_crop(gt, 0.0, 100, 100).boxes == gt);
  CHECK_THROWS_AS(gtpad_crop(gt, -0.1, 100, 100), std::invalid_argument);
}

TEST_CASE("poor_crop returns in-band boxes deterministically") {
  InstanceMask mask(120, 160);
  for (int y = 20; y < 80; ++y)
    for (int x = 30; x < 110; ++x) mask.set(y, x);
  const auto a = poor_crop(mask, 0.15, 0.25, 5, 42);
  const auto b = poor_crop(mask, 0.15, 0.25, 5, 42);
  REQUIRE(a.boxes.size() == 5);
  CHECK(a.boxes == b.boxes);
  CHECK(a.warnings.empty());
  for (const auto& box : a.boxes) {
    const auto r = round_box(box);
    const double o = double(oracle::pixel_count(mask, r.x1, r.y1, r.x2, r.y2)) / r.area();
    CHECK(o >= 0.15);
    CHECK(o <= 0.25);
    CHECK(box.width() >= kPoorMinSide);
    CHECK(box.height() >= kPoorMinSide);
  }
  CHECK(poor_crop(mask, 0.15, 0.25, 5, 43).boxes != a.boxes);
}

TEST_CASE("poor_crop gives a partial set with a warning when the band is unreachable") {
  const InstanceMask empty(64, 64);
  const auto set = poor_crop(empty, 0.15, 0.25, 5, 1);
  CHECK(set.boxes.empty());
  REQUIRE(set.warnings.size() == 1);
  CHECK(set.warnings[0].find("budget") != std::string::npos);
}

TEST_CASE("poor_crop validates its band") {
  const InstanceMask m(64, 64);
  CHECK_THROWS_AS(poor_crop(m, 0.3, 0.2, 5, 1), std::invalid_argument);
  CHECK_THROWS_AS(poor_crop(m, -0.1, 0.2, 5, 1), std::invalid_argument);
  CHECK_THROWS_AS(poor_crop(m, 0.1, 1.2, 5, 1), std::invalid_argument);
}

TEST_CASE("our_crop wraps select_crops") {
  std::mt19937_64 gen(22);
  const auto f = oracle::random_features(gen, 4, 6, 8);
  const ScoreMap m = make_score_map(f, 192, 256);
  const auto set = our_crop(m, AnchorConfig{});
  CHECK(set.strategy.kind == StrategyKind::Our);
  CHECK(set.boxes == select_crops(m, AnchorConfig{}));
  CHECK(set.boxes.size() == 5);
}

TEST_CASE("strategy names round-trip") {
  for (auto k : {StrategyKind::Image, StrategyKind::Grid, StrategyKind::GT, StrategyKind::GTpad, StrategyKind::Poor,
                 StrategyKind::Our})
    CHECK(parse_strategy_kind(to_string(k)) == k);
  CHECK_FALSE(parse_strategy_kind("random").has_value());
}

TEST_CASE("crop worked examples") {
  CHECK(image_crop(480, 640).boxes[0] == ScoredBox{0, 0, 640, 480, 0});
  CHECK(image_crop(1, 1).boxes[0] == ScoredBox{0, 0, 1, 1, 0});

  const auto even = grid_crop(400, 600);
  const std::vector<ScoredBox> want_even{
      {0, 0, 200, 200, 0}, {200, 0, 400, 200, 0}, {400, 0, 600, 200, 0}, {0, 200, 300, 400, 0}, {300, 200, 600, 400, 0}};
  CHECK(even.boxes == want_even);

  const auto odd = grid_crop(401, 601);
  const std::vector<ScoredBox> want_odd{
      {0, 0, 200, 200, 0}, {200, 0, 400, 200, 0}, {400, 0, 601, 200, 0}, {0, 200, 300, 401, 0}, {300, 200, 601, 401, 0}};
  CHECK(odd.boxes == want_odd);

  const std::vector<ScoredBox> gt{{100, 100, 200, 200, 0}};
  CHECK(gtpad_crop(gt, 0.5, 1000, 1000).boxes[0] == ScoredBox{50, 50, 250, 250, 0});
  const std::vector<ScoredBox> corner{{0, 0, 40, 30, 0}};
  const auto clipped = gtpad_crop(corner, 0.5, 50, 50).boxes[0];
  CHECK(clipped == ScoredBox{0, 0, 50, 45, 0});
  CHECK(is_valid_box(clipped, 50, 50));
}

TEST_CASE("poor_crop on a uniform 20% mask accepts nearly every draw") {
  // Every 5th column is object: any box of width >= 32 lands close to 20%.
  InstanceMask mask(200, 200);
  for (int y = 0; y < 200; ++y)
    for (int x = 0; x < 200; x += 5) mask.set(y, x);
  const auto set = poor_crop(mask, 0.15, 0.25, 5, 7);
  CHECK(set.boxes.size() == 5);
  CHECK(set.warnings.empty());
}

TEST_CASE("strategy properties over random inputs") {
  std::mt19937_64 gen(23);
  for (int t = 0; t < 25; ++t) {
    const int W = 64 + int(gen() % 200), H = 64 + int(gen() % 200);
    std::vector<ScoredBox> gt;
    for (int k = 0; k < 3; ++k) gt.push_back(oracle::random_int_box(gen, W, H));
    CHECK(gtpad_crop(gt, 0.0, H, W).boxes == gt_crop(gt).boxes);
    const auto mask = oracle::random_mask(gen, H, W, 0.2);
    const auto poor = poor_crop(mask, 0.15, 0.25, 5, t);
    CHECK(poor.boxes == poor_crop(mask, 0.15, 0.25, 5, t).boxes);
    for (const auto& b : poor.boxes) CHECK(is_valid_box(b, W, H));
    for (const auto& b : gtpad_crop(gt, 0.4, H, W).boxes) CHECK(is_valid_box(b, W, H));
    for (const auto& b : grid_crop(H, W).boxes) CHECK(is_valid_box(b, W, H));
    for (const auto& b : image_crop(H, W).boxes) CHECK(is_valid_box(b, W, H));
  }
}
