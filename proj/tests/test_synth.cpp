#include <doctest.h>

#include <cmath>
#include <numbers>

#include "coarsecrop/synth.hpp"
#include "oracles.hpp"

using namespace coarsecrop;

TEST_CASE("explicit rectangle rasterizes to its pixels") {
  SceneSpec spec;
  spec.width = 64;
  spec.height = 48;
  spec.objects = {{ShapeKind::Rectangle, 10, 5, 20, 30, {255, 0, 0}}};
  const Scene s = generate_scene(spec);
  CHECK(s.mask.count() == 600);
  REQUIRE(s.boxes.size() == 1);
  CHECK(s.boxes[0] == ScoredBox{10, 5, 30, 35, 0});
  CHECK(oracle::pixel_count(s.mask, 10, 5, 30, 35) == 600);
  CHECK(s.image.pixel(10, 5)[0] == 255);
  CHECK(s.image.pixel(10, 5)[1] == 0);
}

TEST_CASE("ellipse area is within 2% of pi a b") {
  for (auto [a, b] : {std::pair{40.0, 25.0}, std::pair{30.5, 30.5}, std::pair{60.0, 12.0}}) {
    SceneSpec spec;
    spec.width = 200;
    spec.height = 160;
    spec.objects = {{ShapeKind::Ellipse, 100, 80, a, b, {0, 255, 0}}};
    const Scene s = generate_scene(spec);
    const double area = std::numbers::pi * a * b;
    CHECK(std::abs(s.mask.count() - area) / area < 0.02);
    CHECK(s.boxes[0].width() <= 2 * a + 1);
    CHECK(s.boxes[0].height() <= 2 * b + 1);
  }
}

TEST_CASE("sampled scenes are deterministic, disjoint and mask-consistent") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SceneSpec spec;
    spec.seed = seed;
    const Scene s = generate_scene(spec);
    CHECK(generate_scene(spec).image == s.image);
    REQUIRE(s.instances.size() == s.boxes.size());
    CHECK(s.instances.size() >= 1);
    CHECK(s.instances.size() <= 3);
    long long total = 0;
    for (std::size_t k = 0; k < s.instances.size(); ++k) {
      const auto& inst = s.instances[k];
      total += inst.count();
      const auto& b = s.boxes[k];
      CHECK(is_valid_box(b, spec.width, spec.height));
      // tight: everything inside, every side touched
      CHECK(oracle::pixel_count(inst, int(b.x1), int(b.y1), int(b.x2), int(b.y2)) == inst.count());
      CHECK(oracle::pixel_count(inst, int(b.x1) + 1, int(b.y1), int(b.x2), int(b.y2)) < inst.count());
      CHECK(oracle::pixel_count(inst, int(b.x1), int(b.y1), int(b.x2) - 1, int(b.y2)) < inst.count());
    }
    CHECK(total == s.mask.count());  // disjoint
  }
  SceneSpec a, b;
  b.seed = 1;
  CHECK_FALSE(generate_scene(a).image == generate_scene(b).image);
}

TEST_CASE("background-only and impossible scenes") {
  SceneSpec bg;
  bg.background_only = true;
  const Scene s = generate_scene(bg);
  CHECK(s.mask.count() == 0);
  CHECK(s.boxes.empty());

  SceneSpec crowded;
  crowded.width = 64;
  crowded.height = 64;
  crowded.min_objects = crowded.max_objects = 3;
  crowded.min_size = crowded.max_size = 60;
  crowded.placement_budget = 50;
  CHECK_THROWS_AS(generate_scene(crowded), std::runtime_error);

  SceneSpec bad;
  bad.rectangles = bad.ellipses = false;
  CHECK_THROWS_AS(generate_scene(bad), std::invalid_argument);
}

TEST_CASE("oracle features hold per-cell object fractions") {
  SceneSpec spec;
  spec.width = 96;
  spec.height = 64;
  spec.objects = {{ShapeKind::Rectangle, 32, 0, 48, 32, {1, 2, 3}}};
  const Scene s = generate_scene(spec);
  const FeatureMap f = oracle_features(s.mask, 32);
  CHECK(f.channels() == 1);
  CHECK(f.height() == 2);
  CHECK(f.width() == 3);
  CHECK(f.at(0, 0, 0) == 0.0f);
  CHECK(f.at(0, 0, 1) == 1.0f);
  CHECK(f.at(0, 0, 2) == 0.5f);
  CHECK(f.at(0, 1, 1) == 0.0f);
  CHECK_THROWS_AS(oracle_features(s.mask, 100), std::invalid_argument);
}
