// coarsecrop: build pseudo object-centric crop datasets from scene images.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "coarsecrop/log.hpp"
#include "coarsecrop/pipeline.hpp"

namespace cc = coarsecrop;

namespace {

void add_anchor_flags(CLI::App* cmd, cc::AnchorConfig& a) {
  cmd->add_option("--top-n", a.top_n, "Crops kept per image")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--nms-iou", a.nms_iou, "NMS IoU threshold")->capture_default_str();
  cmd->add_option("--stride", a.stride, "Pixels per feature cell")->capture_default_str()->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  cc::log::init_from_env();

  CLI::App app{"coarsecrop - objectness-filtered crop generation and evaluation"};
  app.set_version_flag("--version", std::string(COARSECROP_VERSION));
  app.require_subcommand(1);

  // generate
  cc::GenerateConfig gen;
  std::string gen_features;
  std::string gen_strategy = "our";
  std::string gen_annotations;
  std::uint64_t gen_seed = 0;
  bool gen_seg_masks = false;
  auto* generate = app.add_subcommand("generate", "Compute crops for every corpus image and write a manifest");
  generate->add_option("--corpus", gen.corpus, "Image directory")->required();
  generate->add_option("--annotations", gen_annotations, "Annotation JSON (needed by gt, gtpad, poor)");
  generate->add_option("--features", gen_features, "file:<dir> | rand:<seed> | external");
  generate->add_option("--strategy", gen_strategy, "image|grid|gt|gtpad[:<ratio>]|poor[:<lo>,<hi>]|our")
      ->capture_default_str();
  add_anchor_flags(generate, gen.strategy.anchors);
  generate->add_option("--out", gen.out, "Output directory")->required();
  generate->add_option("--workers", gen.workers, "Parallel workers")->capture_default_str();
  generate->add_option("--seed", gen_seed, "Seed for stochastic strategies")->capture_default_str();
  generate->add_flag("--strict", gen.strict, "Treat any skipped image as fatal: no manifest, exit 2");
  generate->add_flag("--lossy", gen.lossy, "Write JPEG crops instead of PNG");
  generate->add_option("--jpeg-quality", gen.jpeg_quality, "JPEG quality for --lossy")->capture_default_str();
  generate->add_flag("--segmentation-masks", gen_seg_masks, "Poor-Crop objectness from segmentation masks");

  // evaluate
  cc::EvaluateConfig eval;
  std::string eval_csv, eval_json;
  bool eval_seg_masks = false;
  auto* evaluate = app.add_subcommand("evaluate", "Objectness report for one or more manifests");
  evaluate->add_option("--manifest", eval.manifests, "Manifest(s) written by generate")->required();
  evaluate->add_option("--annotations", eval.annotations, "Annotation JSON")->required();
  evaluate->add_option("--report-csv", eval_csv, "Per-crop CSV report");
  evaluate->add_option("--report-json", eval_json, "JSON report");
  evaluate->add_flag("--segmentation-masks", eval_seg_masks, "Measure against segmentation masks instead of GT boxes");

  // visualize
  cc::VisualizeConfig vis;
  std::string vis_features, vis_annotations, vis_manifest;
  auto* visualize = app.add_subcommand("visualize", "Write score-map and box overlays");
  visualize->add_option("--corpus", vis.corpus, "Image directory")->required();
  visualize->add_option("--annotations", vis_annotations, "Annotation JSON (image list)");
  visualize->add_option("--features", vis_features, "file:<dir> | rand:<seed> | external")->required();
  visualize->add_option("--manifest", vis_manifest, "Draw this manifest's boxes instead of computing Our-Crop");
  visualize->add_option("--image-id", vis.image_ids, "Restrict to these image ids");
  add_anchor_flags(visualize, vis.anchors);
  visualize->add_option("--out", vis.out, "Output directory")->required();
  visualize->add_option("--workers", vis.workers, "Parallel workers")->capture_default_str();

  // synth
  cc::SynthConfig syn;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with exact masks");
  synth->add_option("--out", syn.out, "Output directory")->required();
  synth->add_option("--count", syn.count, "Number of scenes")->capture_default_str();
  synth->add_option("--seed", syn.seed, "Corpus seed")->capture_default_str();
  synth->add_option("--width", syn.scene.width, "Scene width")->capture_default_str();
  synth->add_option("--height", syn.scene.height, "Scene height")->capture_default_str();
  synth->add_option("--min-objects", syn.scene.min_objects)->capture_default_str();
  synth->add_option("--max-objects", syn.scene.max_objects)->capture_default_str();
  synth->add_option("--min-size", syn.scene.min_size)->capture_default_str();
  synth->add_option("--max-size", syn.scene.max_size)->capture_default_str();
  synth->add_flag("--oracle-features", syn.oracle_features, "Also write mask-derived CCFT features");
  synth->add_option("--stride", syn.stride, "Stride of the oracle features")->capture_default_str();
  synth->add_option("--workers", syn.workers, "Parallel workers")->capture_default_str();

  // losses-check
  cc::losses::GradientCheckConfig lc;
  auto* losses = app.add_subcommand("losses-check", "Finite-difference check of the InfoNCE and BYOL gradients");
  losses->add_option("--seed", lc.seed, "Seed for random instances")->capture_default_str();
  losses->add_option("--tau", lc.tau, "InfoNCE temperature")->capture_default_str();
  losses->add_option("--instances", lc.instances, "Random instances per loss")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cc::kExitConfigError;
  }

  try {
    if (*generate) {
      gen.features = cc::parse_feature_source(gen_features);
      gen.strategy = cc::parse_strategy(gen_strategy, gen.strategy);
      gen.strategy.seed = gen_seed;
      if (!gen_annotations.empty()) gen.annotations = gen_annotations;
      if (gen_seg_masks) gen.mask_source = cc::MaskSource::Segmentation;
      const auto result = cc::run_generate(gen);
      for (const auto& f : result.failures) std::cerr << "failed: " << f << '\n';
      std::size_t crops = 0;
      for (const auto& e : result.manifest.images) crops += e.crops.size();
      std::cout << "images: " << result.manifest.images.size() << "  crops: " << crops
                << "  failures: " << result.failures.size() << '\n';
      return result.exit_code;
    }
    if (*evaluate) {
      if (!eval_csv.empty()) eval.csv = eval_csv;
      if (!eval_json.empty()) eval.json = eval_json;
      if (eval_seg_masks) eval.mask_source = cc::MaskSource::Segmentation;
      const auto result = cc::run_evaluate(eval);
      std::cout << result.summary;
      return cc::kExitOk;
    }
    if (*visualize) {
      vis.features = cc::parse_feature_source(vis_features);
      if (!vis_annotations.empty()) vis.annotations = vis_annotations;
      if (!vis_manifest.empty()) vis.manifest = vis_manifest;
      return cc::run_visualize(vis);
    }
    if (*synth) {
      cc::run_synth(syn);
      std::cout << "wrote " << syn.count << " scenes to " << syn.out.string() << '\n';
      return cc::kExitOk;
    }
    if (*losses) {
      const auto result = cc::run_losses_check(lc);
      std::cout << result.text;
      return result.passed ? cc::kExitOk : cc::kExitPartialFailure;
    }
  } catch (const cc::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cc::kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cc::kExitPartialFailure;
  }
  return cc::kExitOk;
}
