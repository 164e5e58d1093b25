// Serial reference vs OpenMP kernel timings. --quick shrinks the inputs.

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <optional>
#include <random>
#include <string>

#include "coarsecrop/serial.hpp"

using namespace coarsecrop;

namespace {

template <typename F>
double best_ms(int reps, F&& f) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

bool all_equal = true;

template <typename S, typename P>
void row(const char* name, int reps, S&& serial_fn, P&& parallel_fn) {
  std::optional<decltype(serial_fn())> a, b;
  const double s = best_ms(reps, [&] { a.emplace(serial_fn()); });
  const double p = best_ms(reps, [&] { b.emplace(parallel_fn()); });
  const bool same = *a == *b;
  all_equal &= same;
  std::printf("%-18s %10.3f ms %10.3f ms %7.2fx  %s\n", name, s, p, p > 0 ? s / p : 0.0, same ? "match" : "MISMATCH");
}

Plane<float> random_plane(std::mt19937_64& gen, int h, int w) {
  std::uniform_real_distribution<float> d(0.0f, 1.0f);
  Plane<float> p(h, w);
  for (auto& v : p.values()) v = d(gen);
  return p;
}

FeatureMap random_features(std::mt19937_64& gen, int c, int h, int w) {
  std::normal_distribution<float> n(0.0f, 1.0f);
  FeatureMap f(c, h, w);
  for (auto& v : f.values()) v = n(gen);
  return f;
}

}  // namespace

int main(int argc, char** argv) {
  const bool quick = argc > 1 && std::strcmp(argv[1], "--quick") == 0;
  const int reps = quick ? 1 : 5;
  const int H = quick ? 240 : 1024, W = quick ? 320 : 1280;
  std::mt19937_64 gen(1);

  std::printf("threads %d, image %dx%d\n", omp_get_max_threads(), W, H);
  std::printf("%-18s %13s %13s %8s\n", "kernel", "serial", "openmp", "speedup");

  const auto feats = random_features(gen, quick ? 64 : 2048, H / 32, W / 32);
  row("channel_sum", reps, [&] { return serial::channel_sum(feats); }, [&] { return channel_sum(feats); });

  const auto small = random_plane(gen, H / 32, W / 32);
  row("bilinear_resize", reps, [&] { return serial::bilinear_resize(small, H, W); },
      [&] { return bilinear_resize(small, H, W); });

  const auto map = random_plane(gen, H, W);
  row("build_sat", reps, [&] { return serial::build_sat(map).table(); }, [&] { return build_sat(map).table(); });

  const auto sat = build_sat(map);
  const auto anchors = generate_anchors(H, W, AnchorConfig{});
  row("score_anchors", reps, [&] { return serial::score_anchors(anchors.boxes, sat); },
      [&] { return score_anchors(anchors.boxes, sat); });

  auto sorted = score_anchors(anchors.boxes, sat);
  std::stable_sort(sorted.begin(), sorted.end(), ranks_before);
  row("nms", reps, [&] { return serial::suppress_sorted(sorted, 0.5); }, [&] { return nms(sorted, 0.5); });

  InstanceMask mask(H, W);
  std::bernoulli_distribution coin(0.3);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) mask.set(y, x, coin(gen));
  row("mask_integral", reps, [&] { return serial::build_mask_integral(mask).table(); },
      [&] { return build_mask_integral(mask).table(); });

  const int cin = quick ? 8 : 32, cout = quick ? 16 : 64;
  const auto conv_in = random_features(gen, cin, quick ? 64 : 224, quick ? 64 : 224);
  std::vector<float> weights(static_cast<std::size_t>(cout) * cin * 9);
  std::normal_distribution<float> n(0.0f, 0.2f);
  for (auto& v : weights) v = n(gen);
  row("conv3x3_s2_relu", reps, [&] { return serial::conv3x3_s2_relu(conv_in, weights, cout); },
      [&] { return conv3x3_s2_relu(conv_in, weights, cout); });

  return all_equal ? 0 : 1;
}
