// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "coarsecrop/log.hpp"
#include "coarsecrop/pipeline.hpp"
#include "coarsecrop/strategies.hpp"
#include "oracles.hpp"

using namespace coarsecrop;
namespace fs = std::filesystem;

namespace {

// Tolerances and time limits.
constexpr double kSatRelTol = 1e-6;
constexpr double kLinearityTol = 1e-4;
constexpr double kIdentityTol = 1e-6;
constexpr double kGradRelTol = 1e-6;
constexpr double kClosedFormTol = 1e-12;
constexpr double kAnchorSeconds = 1.0;
constexpr double kSatSeconds = 5.0;
constexpr double kNmsSeconds = 10.0;
constexpr double kLossSeconds = 5.0;
constexpr double kSynthSeconds = 60.0;

constexpr int kSynthScenes = 100;
constexpr std::uint64_t kSynthSeed = 2024;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const std::string& name, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (limit_s > 0 && secs >= limit_s) {
    o.pass = false;
    o.detail += " [over time limit " + std::to_string(limit_s) + " s]";
  }
  if (!o.pass) ++failures;
  std::printf("%s  %-28s %8.3f s  %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), secs, o.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = read_bytes(e.path());
  return files;
}

Outcome anchor_count() {
  std::mt19937_64 gen(101);
  std::uniform_int_distribution<int> stride(4, 64), side(0, 1200);
  int bad = 0;
  for (int t = 0; t < 50; ++t) {
    AnchorConfig cfg;
    cfg.stride = stride(gen);
    const int H = cfg.stride + side(gen), W = cfg.stride + side(gen);
    const auto set = generate_anchors(H, W, cfg);
    if (set.pre_clip_count != 12u * std::size_t(H / cfg.stride) * std::size_t(W / cfg.stride)) ++bad;
    if (set.boxes != oracle::anchor_geometry(H, W, cfg)) ++bad;
  }
  return {bad == 0, "50 configs, " + std::to_string(bad) + " mismatches"};
}

Outcome sat_scoring() {
  std::mt19937_64 gen(102);
  std::uniform_int_distribution<int> side(1, 96);
  double worst = 0;
  for (int t = 0; t < 1000; ++t) {
    const int h = side(gen), w = side(gen);
    const auto map = oracle::random_plane(gen, h, w);
    const ScoredBox box = oracle::random_int_box(gen, w, h);
    const double got = score_anchors(std::vector<ScoredBox>{box}, build_sat(map))[0].score;
    const double want = oracle::naive_mean(map, box);
    worst = std::max(worst, std::abs(got - want) / std::max(std::abs(want), 1e-12));
  }
  return {worst <= kSatRelTol, "1000 pairs, max rel err " + fmt("%.2e", worst)};
}

Outcome nms_oracle() {
  std::mt19937_64 gen(103);
  std::uniform_int_distribution<int> count(1, 200), level(0, 4);
  std::uniform_real_distribution<double> score(0.0, 1.0);
  int bad = 0, sets = 0;
  for (int t = 0; t < 200; ++t) {
    std::vector<ScoredBox> boxes(count(gen));
    for (auto& b : boxes) {
      b = oracle::random_int_box(gen, 120, 90);
      b.score = t % 2 ? score(gen) : level(gen) / 4.0;  // half the sets are tie-heavy
    }
    for (double thr : {0.3, 0.5, 0.7}) {
      ++sets;
      if (nms(boxes, thr) != oracle::selection_nms(boxes, thr)) ++bad;
    }
  }
  return {bad == 0, std::to_string(sets) + " runs, " + std::to_string(bad) + " mismatches"};
}

Outcome score_map_math() {
  std::mt19937_64 gen(104);
  double lin = 0, ident = 0;
  bool in_range = true, constant_ok = true;
  for (int t = 0; t < 20; ++t) {
    const int d = 1 + t, h = 3 + t % 7, w = 2 + t % 5;
    const auto f = oracle::random_features(gen, d, h, w);
    const auto g = oracle::random_features(gen, d, h, w);
    const float a = 1.7f, b = -0.6f;
    FeatureMap mix(d, h, w);
    for (std::size_t k = 0; k < mix.values().size(); ++k) mix.values()[k] = a * f.values()[k] + b * g.values()[k];
    const auto sf = channel_sum(f), sg = channel_sum(g), sm = channel_sum(mix);
    for (std::size_t k = 0; k < sm.size(); ++k) {
      const double want = a * double(sf.values()[k]) + b * double(sg.values()[k]);
      lin = std::max(lin, std::abs(sm.values()[k] - want) / std::max(1.0, std::abs(want)));
    }

    const auto score = make_score_map(f, h * 16, w * 16);
    for (float v : score.plane().values()) in_range &= v >= 0.0f && v <= 1.0f;

    FeatureMap flat(d, h, w);
    for (auto& v : flat.values()) v = 3.25f;
    const auto flat_map = make_score_map(flat, h * 8, w * 8);
    for (float v : flat_map.plane().values()) constant_ok &= v == 0.0f;

    const auto raw = oracle::random_plane(gen, h, w, -5.0f, 5.0f);
    const auto same = bilinear_upsample(raw, h, w);
    for (std::size_t k = 0; k < raw.size(); ++k) ident = std::max(ident, double(std::abs(same.values()[k] - raw.values()[k])));
  }
  const bool pass = lin <= kLinearityTol && in_range && constant_ok && ident <= kIdentityTol;
  return {pass, "linearity " + fmt("%.2e", lin) + ", range " + (in_range ? "ok" : "violated") + ", constant map " +
                    (constant_ok ? "ok" : "violated") + ", identity " + fmt("%.2e", ident)};
}

Outcome loss_math() {
  const auto check = losses::check_gradients(losses::GradientCheckConfig{});
  const std::vector<double> q{1.0, 0.0}, k{0.3, 0.7};
  double closed = std::abs(losses::infonce_loss(q, k, {k}, 1.0).loss - std::numbers::ln2);
  const std::vector<double> v{0.6, -0.8, 2.0}, ortho{3.0, 2.25, 0.0}, anti{-1.2, 1.6, -4.0};
  closed = std::max(closed, std::abs(losses::byol_loss(v, v).loss - 0.0));
  closed = std::max(closed, std::abs(losses::byol_loss(v, ortho).loss - 2.0));
  closed = std::max(closed, std::abs(losses::byol_loss(v, anti).loss - 4.0));
  const bool pass = check.instances == 100 && check.infonce_max_rel_error < kGradRelTol &&
                    check.byol_max_rel_error < kGradRelTol && closed <= kClosedFormTol;
  return {pass, "infonce " + fmt("%.2e", check.infonce_max_rel_error) + ", byol " +
                    fmt("%.2e", check.byol_max_rel_error) + ", closed forms " + fmt("%.1e", closed)};
}

Outcome objectness_oracle() {
  std::mt19937_64 gen(105);
  long long boxes = 0, bad = 0;
  for (double density : {0.0, 0.1, 0.5, 0.9, 1.0}) {
    const auto mask = oracle::random_mask(gen, 16, 16, density);
    const auto integral = build_mask_integral(mask);
    for (int y1 = 0; y1 < 16; ++y1)
      for (int y2 = y1 + 1; y2 <= 16; ++y2)
        for (int x1 = 0; x1 < 16; ++x1)
          for (int x2 = x1 + 1; x2 <= 16; ++x2) {
            const ScoredBox b{double(x1), double(y1), double(x2), double(y2), 0};
            const double want = double(oracle::pixel_count(mask, x1, y1, x2, y2)) / ((x2 - x1) * (y2 - y1));
            ++boxes;
            if (crop_objectness(b, integral) != want) ++bad;
          }
  }
  const auto mask = oracle::random_mask(gen, 64, 64, 0.4);
  const auto integral = build_mask_integral(mask);
  for (int t = 0; t < 5000; ++t) {
    const auto b = oracle::random_int_box(gen, 64, 64);
    const double want = double(oracle::pixel_count(mask, int(b.x1), int(b.y1), int(b.x2), int(b.y2))) / b.area();
    ++boxes;
    if (crop_objectness(b, integral) != want) ++bad;
  }
  return {bad == 0, std::to_string(boxes) + " boxes, " + std::to_string(bad) + " mismatches"};
}

Outcome grid_partition() {
  std::mt19937_64 gen(106);
  std::uniform_int_distribution<int> hs(2, 1500), ws(6, 1500);
  int bad = 0;
  for (int t = 0; t < 200; ++t) {
    const int H = t == 0 ? 2 : hs(gen), W = t == 0 ? 6 : ws(gen);
    const auto set = grid_crop(H, W);
    double area = 0;
    bool ok = set.boxes.size() == 5;
    for (std::size_t a = 0; a < set.boxes.size(); ++a) {
      ok &= is_valid_box(set.boxes[a], W, H);
      area += set.boxes[a].area();
      for (std::size_t b = a + 1; b < set.boxes.size(); ++b) ok &= oracle::box_iou(set.boxes[a], set.boxes[b]) == 0.0;
    }
    ok &= area == double(H) * W;
    if (!ok) ++bad;
  }
  return {bad == 0, "200 sizes, " + std::to_string(bad) + " failures"};
}

const fs::path kRoot = fs::temp_directory_path() / "coarsecrop_acceptance";

GenerateConfig generate_config(const fs::path& corpus, const std::string& strategy, const fs::path& out,
                               int workers) {
  GenerateConfig g;
  g.corpus = corpus;
  g.annotations = corpus / "annotations.json";
  g.features = parse_feature_source("external");
  g.strategy = parse_strategy(strategy);
  g.strategy.seed = 7;
  g.out = out;
  g.workers = workers;
  return g;
}

fs::path synth_corpus() {
  const fs::path dir = kRoot / "corpus";
  fs::remove_all(dir);
  SynthConfig cfg;
  cfg.out = dir;
  cfg.count = kSynthScenes;
  cfg.seed = kSynthSeed;
  cfg.oracle_features = true;
  cfg.workers = 4;
  run_synth(cfg);
  return dir;
}

ObjectnessReport evaluate_strategy(const fs::path& corpus, const std::string& strategy) {
  const fs::path out = kRoot / ("e2e_" + strategy);
  fs::remove_all(out);
  const auto gen = run_generate(generate_config(corpus, strategy, out, 4));
  if (gen.exit_code != kExitOk) throw std::runtime_error(strategy + ": generate exited " + std::to_string(gen.exit_code));
  EvaluateConfig ev;
  ev.manifests = {out / "manifest.json"};
  ev.annotations = corpus / "annotations.json";
  return run_evaluate(ev).reports.at(0).report;
}

Outcome synthetic_reproduction(const fs::path& corpus) {
  const auto grid = evaluate_strategy(corpus, "grid");
  const auto our = evaluate_strategy(corpus, "our");
  const double grid_poor = grid.fraction(CropCategory::Poor), our_poor = our.fraction(CropCategory::Poor);
  const bool pass = our_poor < grid_poor && our.mean > grid.mean;
  return {pass, "poor fraction our " + fmt("%.3f", our_poor) + " vs grid " + fmt("%.3f", grid_poor) +
                    ", mean our " + fmt("%.3f", our.mean) + " vs grid " + fmt("%.3f", grid.mean)};
}

Outcome gt_mean(const fs::path& corpus) {
  const auto gt = evaluate_strategy(corpus, "gt");
  return {gt.mean == 1.0, "mean " + fmt("%.6f", 100.0 * gt.mean) + "% over " + std::to_string(gt.crops.size()) + " crops"};
}

Outcome determinism(const fs::path& corpus) {
  int bad = 0;
  std::size_t files = 0;
  for (const char* s : {"image", "grid", "gt", "gtpad", "poor", "our"}) {
    const fs::path a = kRoot / (std::string("det_a_") + s), b = kRoot / (std::string("det_b_") + s),
                   c = kRoot / (std::string("det_c_") + s);
    for (const auto& p : {a, b, c}) fs::remove_all(p);
    run_generate(generate_config(corpus, s, a, 1));
    run_generate(generate_config(corpus, s, b, 1));
    run_generate(generate_config(corpus, s, c, 4));
    const auto sa = snapshot(a);
    files += sa.size();
    if (sa.size() < 2 || sa != snapshot(b) || sa != snapshot(c)) ++bad;
  }
  return {bad == 0, "6 strategies, " + std::to_string(files) + " files compared, " + std::to_string(bad) + " differ"};
}

}  // namespace

int main() {
  setenv("COARSECROP_LOG", "error", 0);
  log::init_from_env();
  fs::create_directories(kRoot);

  report("anchor count law", kAnchorSeconds, anchor_count);
  report("SAT anchor scoring", kSatSeconds, sat_scoring);
  report("NMS oracle", kNmsSeconds, nms_oracle);
  report("score map and normalization", 0, score_map_math);
  report("loss math", kLossSeconds, loss_math);
  report("objectness oracle", 0, objectness_oracle);

  fs::path corpus;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    corpus = synth_corpus();
  } catch (const std::exception& e) {
    std::printf("synthetic corpus failed: %s\n", e.what());
  }
  const double synth_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report("GT-Crop mean objectness", 0, [&] { return gt_mean(corpus); });
  // Corpus synthesis counts toward the end-to-end budget.
  report("synthetic Our vs Grid", kSynthSeconds - synth_s, [&] { return synthetic_reproduction(corpus); });
  report("determinism", 0, [&] { return determinism(corpus); });
  report("grid partition", 0, grid_partition);

  std::printf("%s: %d failing criteria\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
