#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <set>
#include <string>

#include "cadspot/error.hpp"
#include "cadspot/io.hpp"
#include "cadspot/metrics.hpp"
#include "cadspot/predictor.hpp"
#include "cadspot/reconstruct.hpp"
#include "cadspot/sampler.hpp"
#include "cadspot/svg_io.hpp"
#include "cadspot/swa.hpp"
#include "cadspot/synth.hpp"

using nlohmann::json;
using namespace cadspot;

namespace {

const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys{
      // sampling and aggregation
      "interval", "window", "step", "weighted_vote", "mask_threshold", "top_k", "nms_sigma", "nms_kernel",
      "nms_threshold", "class_aware", "scale", "predictor", "baseline_epsilon",
      // reconstruction
      "merge_tol", "raster_res", "area_min", "simplify_px", "collinear_deg", "door_tol", "group_tol",
      "angle_tol_deg", "wall_height", "wall_classes", "window_classes",
      // synthetic scenes
      "seed", "width", "height", "symbols", "clutter", "min_size", "max_size", "straddle_fraction", "tile"};
  return keys;
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  const std::string text = read_file(path);
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ConfigError("config file " + path + " is not a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known_config_keys().count(key)) throw ConfigError("unknown config key \"" + key + "\" in " + path);
  }
  return j;
}

template <typename T>
T config_value(const json& cfg, const char* key, T fallback) {
  if (!cfg.contains(key)) return fallback;
  try {
    return cfg.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key \"") + key + "\" has the wrong type");
  }
}

template <typename T>
void override_with(T& target, const std::optional<T>& flag) {
  if (flag) target = *flag;
}

Drawing load_drawing(const std::string& path, double scale) {
  if (!(scale > 0.0)) throw ConfigError("scale must be positive");
  Drawing drawing = parse_drawing(read_file(path));
  if (scale != 1.0) {
    const Affine2 m = Affine2::scale(scale, scale);
    for (Primitive& p : drawing.primitives) p = transformed(p, m);
    drawing.recompute_bounds();
  }
  return drawing;
}

ClassTable load_classes(const std::string& path, const std::optional<ClassTable>& embedded) {
  if (!path.empty()) return load_class_table(read_file(path));
  if (embedded) return *embedded;
  return ClassTable::standard();
}

std::string pretty(const json& j) { return j.dump(2) + "\n"; }

struct Common {
  std::string config;
  std::optional<int> threads;
  std::optional<double> scale;
};

void add_common(CLI::App* app, Common& common, bool with_scale = true) {
  app->add_option("--config", common.config, "JSON config file; flags win over its values");
  app->add_option("--threads", common.threads, "worker threads (default: CADSPOT_THREADS or all cores)")
      ->check(CLI::PositiveNumber);
  if (with_scale) app->add_option("--scale", common.scale, "uniform pre-scale applied to the drawing");
}

double effective_scale(const Common& common, const json& cfg) {
  double scale = config_value(cfg, "scale", 1.0);
  override_with(scale, common.scale);
  return scale;
}

// ---------------------------------------------------------------------------

struct SampleArgs {
  Common common;
  std::string in, out;
  std::optional<double> interval;
};

void run_sample(const SampleArgs& a) {
  const json cfg = load_config(a.common.config);
  double interval = config_value(cfg, "interval", kDefaultSamplingInterval);
  override_with(interval, a.interval);
  if (!(interval > 0.0)) throw ConfigError("interval must be positive");
  const double scale = effective_scale(a.common, cfg);
  const Drawing drawing = load_drawing(a.in, scale);
  const DensePointCloud cloud = sample_drawing(drawing, interval);
  json points = json::array();
  for (const Point3& p : cloud.points) points.push_back({p.x, p.y});
  json out{{"config", {{"interval", interval}, {"scale", scale}}},
           {"counts", cloud.per_primitive_count},
           {"points", std::move(points)}};
  write_file(a.out, out.dump() + "\n");
}

// ---------------------------------------------------------------------------

struct SpotArgs {
  Common common;
  std::string in, out, report, classes, pred, exemplars, exemplar_labels;
  std::optional<std::string> predictor;
  std::optional<double> interval, window, step, mask_threshold, nms_sigma, nms_threshold, epsilon;
  std::optional<int> top_k;
  std::optional<bool> weighted_vote;
};

void run_spot(const SpotArgs& a) {
  const json cfg = load_config(a.common.config);
  SwaConfig config;
  apply_json(config, cfg);
  override_with(config.interval, a.interval);
  override_with(config.window, a.window);
  override_with(config.step, a.step);
  override_with(config.weighted_vote, a.weighted_vote);
  override_with(config.instances.mask_threshold, a.mask_threshold);
  override_with(config.instances.top_k, a.top_k);
  override_with(config.instances.nms.sigma, a.nms_sigma);
  override_with(config.instances.nms.score_threshold, a.nms_threshold);
  config.threads = resolve_threads(a.common.threads.value_or(0));
  validate(config);
  std::string predictor_name = config_value<std::string>(cfg, "predictor", "replay");
  override_with(predictor_name, a.predictor);
  const double scale = effective_scale(a.common, cfg);

  const Drawing drawing = load_drawing(a.in, scale);
  const ClassTable table = load_classes(a.classes, std::nullopt);
  json echo = to_json(config);
  echo["scale"] = scale;
  echo["predictor"] = predictor_name;

  std::unique_ptr<Predictor> predictor;
  if (predictor_name == "replay") {
    if (a.pred.empty()) throw ArgumentError("the replay predictor needs --pred");
    PredictionFile file = load_predictions(read_file(a.pred), drawing.size());
    predictor = std::make_unique<ReplayPredictor>(std::move(file.windows));
  } else if (predictor_name == "baseline") {
    if (a.exemplars.empty() || a.exemplar_labels.empty()) {
      throw ArgumentError("the baseline predictor needs --exemplars and --exemplar-labels");
    }
    const Drawing bank_drawing = load_drawing(a.exemplars, scale);
    const AnnotationFile ann = load_annotations(read_file(a.exemplar_labels), bank_drawing.size());
    BaselineParams params;
    params.epsilon = config_value(cfg, "baseline_epsilon", 2.0 * config.interval);
    override_with(params.epsilon, a.epsilon);
    params.top_k = config.instances.top_k;
    if (!(params.epsilon > 0.0)) throw ConfigError("baseline_epsilon must be positive");
    echo["baseline_epsilon"] = params.epsilon;
    predictor = std::make_unique<BaselinePredictor>(
        build_exemplar_bank(bank_drawing, ann.labeling, table, config.interval), table, params);
  } else {
    throw ConfigError("predictor must be \"replay\" or \"baseline\"");
  }

  const SwaResult result = run_swa(drawing, *predictor, table, config);
  for (const std::string& w : result.report.warnings) std::cerr << "warning: " << w << "\n";
  write_file(a.out, save_annotations(result.labeling, &table, result.instances, echo));
  if (!a.report.empty()) {
    const SwaReport& r = result.report;
    json report{{"config", echo},
                {"windows", r.windows},
                {"empty_windows", r.empty_windows},
                {"proposals", r.proposals},
                {"stored_pairs", r.stored_pairs},
                {"dense_pairs", r.dense_pairs},
                {"survivors", r.survivors},
                {"untouched", r.untouched},
                {"warnings", r.warnings}};
    write_file(a.report, pretty(report));
  }
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  Common common;
  std::string gt, pred, report, classes, drawing;
  std::optional<double> interval;
};

std::size_t label_count(const std::string& text, const std::string& path) {
  const json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ParseError("invalid JSON in " + path, 0);
  if (!j.is_object() || !j.contains("labels") || !j["labels"].is_array()) {
    throw SchemaError(path + ": missing \"labels\" array");
  }
  return j["labels"].size();
}

void run_evaluate(const EvaluateArgs& a) {
  const json cfg = load_config(a.common.config);
  double interval = config_value(cfg, "interval", kDefaultSamplingInterval);
  override_with(interval, a.interval);
  if (!(interval > 0.0)) throw ConfigError("interval must be positive");
  const double scale = effective_scale(a.common, cfg);

  const std::string gt_text = read_file(a.gt);
  const std::string pred_text = read_file(a.pred);
  std::optional<Drawing> drawing;
  if (!a.drawing.empty()) drawing = load_drawing(a.drawing, scale);
  const std::size_t n = drawing ? drawing->size() : label_count(gt_text, a.gt);
  const AnnotationFile gt = load_annotations(gt_text, n);
  const AnnotationFile pred = load_annotations(pred_text, n);
  const ClassTable table = load_classes(a.classes, gt.classes);

  json echo{{"interval", interval}, {"scale", scale}, {"geometry", drawing.has_value()}};
  json report{{"config", echo}};
  std::vector<double> lengths;
  std::optional<DensePointCloud> cloud;
  if (drawing) {
    for (const Primitive& p : drawing->primitives) lengths.push_back(arc_length(p));
    cloud = sample_drawing(*drawing, interval);
  }
  report["semantic"] = to_json(semantic_f1(gt.labeling.semantic, pred.labeling.semantic, table, lengths), table);
  report["panoptic"] = to_json(panoptic_quality(gt.labeling, pred.labeling, table), table);
  if (drawing) {
    report["panoptic_length_weighted"] =
        to_json(panoptic_quality(gt.labeling, pred.labeling, table, PqOptions{lengths}), table);
    std::vector<std::pair<int, double>> scores;
    for (const InstanceScore& s : pred.instances) scores.emplace_back(s.id, s.score);
    report["instance"] =
        to_json(instance_ap(instances_of(gt.labeling, table), instances_of(pred.labeling, table, scores), *cloud));
  }
  write_file(a.report, pretty(report));
}

// ---------------------------------------------------------------------------

struct ReconstructArgs {
  Common common;
  std::string in, labels, out, mesh, classes;
  std::optional<double> merge_tol, wall_height, door_tol;
  std::optional<int> raster_res;
};

void run_reconstruct(const ReconstructArgs& a) {
  const json cfg = load_config(a.common.config);
  ReconstructConfig config;
  apply_json(config, cfg);
  if (a.merge_tol) config.merge_tol = *a.merge_tol;
  override_with(config.wall_height, a.wall_height);
  override_with(config.door_tol, a.door_tol);
  override_with(config.raster_res, a.raster_res);
  validate(config);
  const double scale = effective_scale(a.common, cfg);

  const Drawing drawing = load_drawing(a.in, scale);
  const AnnotationFile ann = load_annotations(read_file(a.labels), drawing.size());
  const ClassTable table = load_classes(a.classes, ann.classes);
  SceneParameters scene = reconstruct_scene(drawing, ann.labeling, table, config);
  std::string obj;
  if (!a.mesh.empty()) obj = mesh_to_obj(extrude_walls(scene.walls, scene.wall_height, &scene.warnings));
  json out = scene_to_json(scene);
  json echo = to_json(config);
  echo["scale"] = scale;
  out["config"] = echo;
  write_file(a.out, pretty(out));
  if (!a.mesh.empty()) write_file(a.mesh, obj);
}

// ---------------------------------------------------------------------------

struct RenderArgs {
  Common common;
  std::string in, labels, out, classes;
};

void run_render(const RenderArgs& a) {
  const json cfg = load_config(a.common.config);
  const Drawing drawing = load_drawing(a.in, effective_scale(a.common, cfg));
  const AnnotationFile ann = load_annotations(read_file(a.labels), drawing.size());
  const ClassTable table = load_classes(a.classes, ann.classes);
  write_file(a.out, render_labeled_svg(drawing, ann.labeling, table));
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  Common common;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> width, height, straddle, min_size, max_size;
  std::optional<int> symbols, clutter;
};

void run_synth(const SynthArgs& a) {
  const json cfg = load_config(a.common.config);
  SynthConfig sc;
  sc.seed = config_value(cfg, "seed", sc.seed);
  sc.width = config_value(cfg, "width", sc.width);
  sc.height = config_value(cfg, "height", sc.height);
  sc.symbols = config_value(cfg, "symbols", sc.symbols);
  sc.clutter = config_value(cfg, "clutter", sc.clutter);
  sc.min_size = config_value(cfg, "min_size", sc.min_size);
  sc.max_size = config_value(cfg, "max_size", sc.max_size);
  sc.straddle_fraction = config_value(cfg, "straddle_fraction", sc.straddle_fraction);
  sc.tile = config_value(cfg, "tile", sc.tile);
  override_with(sc.seed, a.seed);
  override_with(sc.width, a.width);
  override_with(sc.height, a.height);
  override_with(sc.symbols, a.symbols);
  override_with(sc.clutter, a.clutter);
  override_with(sc.min_size, a.min_size);
  override_with(sc.max_size, a.max_size);
  override_with(sc.straddle_fraction, a.straddle);
  SwaConfig swa;
  apply_json(swa, cfg);
  swa.threads = resolve_threads(a.common.threads.value_or(0));

  const SynthScene scene = generate_scene(sc);
  const ClassTable& table = ClassTable::standard();
  const json echo{{"seed", sc.seed},         {"width", sc.width},       {"height", sc.height},
                  {"symbols", sc.symbols},   {"clutter", sc.clutter},   {"min_size", sc.min_size},
                  {"max_size", sc.max_size}, {"straddle_fraction", sc.straddle_fraction},
                  {"tile", sc.tile}};
  const std::filesystem::path dir(a.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("io", "cannot create directory " + a.out_dir);
  write_file((dir / "drawing.svg").string(), scene.svg);
  write_file((dir / "annotations.json").string(), save_annotations(scene.truth, &table, {}, echo));
  PredictionFile predictions =
      record_predictions(scene.drawing, OraclePredictor(scene.truth, table), swa);
  write_file((dir / "predictions.json").string(), save_predictions(predictions));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Panoptic symbol spotting and reconstruction for vector CAD drawings"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "cadspot 0.1.0");

  SampleArgs sample;
  CLI::App* sample_cmd = app.add_subcommand("sample", "dense equidistant point sampling");
  sample_cmd->add_option("--in", sample.in, "input SVG")->required();
  sample_cmd->add_option("--out", sample.out, "output points JSON")->required();
  sample_cmd->add_option("--interval", sample.interval, "sampling interval d");
  add_common(sample_cmd, sample.common);

  SpotArgs spot;
  CLI::App* spot_cmd = app.add_subcommand("spot", "sliding-window panoptic symbol spotting");
  spot_cmd->add_option("--in", spot.in, "input SVG")->required();
  spot_cmd->add_option("--out", spot.out, "output labeling JSON")->required();
  spot_cmd->add_option("--predictor", spot.predictor, "replay or baseline")
      ->check(CLI::IsMember({"replay", "baseline"}));
  spot_cmd->add_option("--pred", spot.pred, "recorded window predictions (replay)");
  spot_cmd->add_option("--exemplars", spot.exemplars, "annotated exemplar SVG (baseline)");
  spot_cmd->add_option("--exemplar-labels", spot.exemplar_labels, "exemplar annotations (baseline)");
  spot_cmd->add_option("--epsilon", spot.epsilon, "baseline proximity radius");
  spot_cmd->add_option("--classes", spot.classes, "class table JSON");
  spot_cmd->add_option("--report", spot.report, "aggregation statistics JSON");
  spot_cmd->add_option("--interval", spot.interval, "sampling interval d");
  spot_cmd->add_option("--window", spot.window, "window size W");
  spot_cmd->add_option("--step", spot.step, "window step");
  spot_cmd->add_option("--weighted-vote", spot.weighted_vote, "weight votes by observed point fraction");
  spot_cmd->add_option("--mask-threshold", spot.mask_threshold, "instance mask binarization threshold");
  spot_cmd->add_option("--top-k", spot.top_k, "proposals kept per window");
  spot_cmd->add_option("--nms-sigma", spot.nms_sigma, "gaussian decay sigma");
  spot_cmd->add_option("--nms-threshold", spot.nms_threshold, "survivor score threshold");
  add_common(spot_cmd, spot.common);

  EvaluateArgs eval;
  CLI::App* eval_cmd = app.add_subcommand("evaluate", "semantic F1, panoptic quality and instance AP");
  eval_cmd->add_option("--gt", eval.gt, "ground-truth annotations")->required();
  eval_cmd->add_option("--pred", eval.pred, "predicted labeling")->required();
  eval_cmd->add_option("--report", eval.report, "output report JSON")->required();
  eval_cmd->add_option("--drawing", eval.drawing, "drawing SVG (enables length weighting and AP)");
  eval_cmd->add_option("--classes", eval.classes, "class table JSON");
  eval_cmd->add_option("--interval", eval.interval, "sampling interval for instance boxes");
  add_common(eval_cmd, eval.common);

  ReconstructArgs rec;
  CLI::App* rec_cmd = app.add_subcommand("reconstruct", "wall, door and window parameter extraction");
  rec_cmd->add_option("--in", rec.in, "input SVG")->required();
  rec_cmd->add_option("--labels", rec.labels, "panoptic labeling JSON")->required();
  rec_cmd->add_option("--out", rec.out, "output scene JSON")->required();
  rec_cmd->add_option("--mesh", rec.mesh, "output wall mesh OBJ");
  rec_cmd->add_option("--classes", rec.classes, "class table JSON");
  rec_cmd->add_option("--merge-tol", rec.merge_tol, "endpoint merge tolerance");
  rec_cmd->add_option("--raster-res", rec.raster_res, "raster cells along the longer axis");
  rec_cmd->add_option("--wall-height", rec.wall_height, "extrusion height");
  rec_cmd->add_option("--door-tol", rec.door_tol, "door arc/leaf coincidence tolerance");
  add_common(rec_cmd, rec.common);

  RenderArgs render;
  CLI::App* render_cmd = app.add_subcommand("render", "color a drawing by its labels");
  render_cmd->add_option("--in", render.in, "input SVG")->required();
  render_cmd->add_option("--labels", render.labels, "panoptic labeling JSON")->required();
  render_cmd->add_option("--out", render.out, "output SVG")->required();
  render_cmd->add_option("--classes", render.classes, "class table JSON");
  add_common(render_cmd, render.common);

  SynthArgs synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "synthetic labeled floorplan with oracle predictions");
  synth_cmd->add_option("--out-dir", synth.out_dir, "output directory")->required();
  synth_cmd->add_option("--seed", synth.seed, "random seed");
  synth_cmd->add_option("--width", synth.width, "scene width");
  synth_cmd->add_option("--height", synth.height, "scene height");
  synth_cmd->add_option("--symbols", synth.symbols, "number of symbols");
  synth_cmd->add_option("--clutter", synth.clutter, "number of background strokes");
  synth_cmd->add_option("--min-size", synth.min_size, "smallest symbol size");
  synth_cmd->add_option("--max-size", synth.max_size, "largest symbol size");
  synth_cmd->add_option("--straddle", synth.straddle, "share of symbols centered on tile borders");
  add_common(synth_cmd, synth.common, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*sample_cmd) run_sample(sample);
    if (*spot_cmd) run_spot(spot);
    if (*eval_cmd) run_evaluate(eval);
    if (*rec_cmd) run_reconstruct(rec);
    if (*render_cmd) run_render(render);
    if (*synth_cmd) run_synth(synth);
  } catch (const Error& e) {
    std::cerr << json{{"error", e.kind()}, {"message", e.what()}}.dump() << "\n";
    return 1;
  } catch (const json::exception& e) {
    std::cerr << json{{"error", "parse"}, {"message", e.what()}}.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "internal"}, {"message", e.what()}}.dump() << "\n";
    return 1;
  }
  return 0;
}
