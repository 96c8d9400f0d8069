#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cadspot/assignment.hpp"
#include "cadspot/error.hpp"
#include "cadspot/io.hpp"
#include "cadspot/metrics.hpp"
#include "cadspot/reconstruct.hpp"
#include "cadspot/sampler.hpp"
#include "cadspot/svg_io.hpp"
#include "cadspot/swa.hpp"
#include "cadspot/synth.hpp"

namespace py = pybind11;
using namespace cadspot;

namespace {

PanopticLabeling labeling_of(std::vector<int> semantic, std::vector<int> instance) {
  if (semantic.size() != instance.size()) throw ArgumentError("semantic and instance labels differ in length");
  return {std::move(semantic), std::move(instance)};
}

py::tuple sample(const std::string& svg, double interval) {
  const DensePointCloud cloud = sample_drawing(parse_drawing(svg), interval);
  py::array_t<double> points({static_cast<py::ssize_t>(cloud.size()), py::ssize_t{2}});
  auto p = points.mutable_unchecked<2>();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    p(static_cast<py::ssize_t>(i), 0) = cloud.points[i].x;
    p(static_cast<py::ssize_t>(i), 1) = cloud.points[i].y;
  }
  return py::make_tuple(points, py::array_t<int>(static_cast<py::ssize_t>(cloud.owner.size()), cloud.owner.data()));
}

std::string spot(const std::string& svg, const std::string& predictions, double window, double step, int threads) {
  const Drawing drawing = parse_drawing(svg);
  const ClassTable& table = ClassTable::standard();
  SwaConfig config;
  config.window = window;
  config.step = step;
  config.threads = resolve_threads(threads);
  validate(config);
  const ReplayPredictor predictor(load_predictions(predictions, drawing.size()).windows);
  py::gil_scoped_release release;
  const SwaResult result = run_swa(drawing, predictor, table, config);
  return save_annotations(result.labeling, &table, result.instances, to_json(config));
}

std::string panoptic_report(const std::string& svg, const std::string& gt, const std::string& pred) {
  const AnnotationFile g = load_annotations(gt, parse_drawing(svg).size());
  const ClassTable table = g.classes.value_or(ClassTable::standard());
  const AnnotationFile p = load_annotations(pred, g.labeling.size());
  return to_json(panoptic_quality(g.labeling, p.labeling, table), table).dump();
}

std::string reconstruct(const std::string& svg, const std::string& labels) {
  const Drawing drawing = parse_drawing(svg);
  const AnnotationFile ann = load_annotations(labels, drawing.size());
  const ClassTable table = ann.classes.value_or(ClassTable::standard());
  return scene_to_json(reconstruct_scene(drawing, ann.labeling, table, ReconstructConfig{})).dump();
}

py::dict synth(std::uint64_t seed, double width, double height, int symbols, int clutter, double straddle) {
  SynthConfig sc;
  sc.seed = seed;
  sc.width = width;
  sc.height = height;
  sc.symbols = symbols;
  sc.clutter = clutter;
  sc.straddle_fraction = straddle;
  const SynthScene scene = generate_scene(sc);
  const ClassTable& table = ClassTable::standard();
  py::dict out;
  out["svg"] = scene.svg;
  out["annotations"] = save_annotations(scene.truth, &table);
  out["predictions"] = save_predictions(record_predictions(scene.drawing, OraclePredictor(scene.truth, table), SwaConfig{}));
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Panoptic symbol spotting for vector CAD drawings";
  py::register_exception<Error>(m, "CadspotError", PyExc_ValueError);

  m.def("sample", &sample, py::arg("svg"), py::arg("interval") = kDefaultSamplingInterval,
        "Equidistant samples of every primitive: (points[N, 2], owner[N]).");
  m.def("arc_lengths", [](const std::string& svg) {
    std::vector<double> out;
    for (const Primitive& p : parse_drawing(svg).primitives) out.push_back(arc_length(p));
    return out;
  }, py::arg("svg"));
  m.def("hungarian", [](const Eigen::MatrixXd& cost) {
    const Assignment a = hungarian(cost);
    return py::make_tuple(a.pairs, a.cost);
  }, py::arg("cost"), "Minimum-cost assignment: (pairs, total cost).");
  m.def("panoptic_quality", [](std::vector<int> gt_sem, std::vector<int> gt_inst, std::vector<int> pred_sem,
                               std::vector<int> pred_inst) {
    const ClassTable& table = ClassTable::standard();
    const PanopticReport r = panoptic_quality(labeling_of(std::move(gt_sem), std::move(gt_inst)),
                                              labeling_of(std::move(pred_sem), std::move(pred_inst)), table);
    return py::make_tuple(r.all.pq, r.all.sq, r.all.rq);
  }, py::arg("gt_semantic"), py::arg("gt_instance"), py::arg("pred_semantic"), py::arg("pred_instance"));
  m.def("spot_json", &spot, py::arg("svg"), py::arg("predictions"), py::arg("window") = kDefaultWindowSize,
        py::arg("step") = kDefaultWindowSize / 2, py::arg("threads") = 1);
  m.def("panoptic_report_json", &panoptic_report, py::arg("svg"), py::arg("gt"), py::arg("pred"));
  m.def("reconstruct_json", &reconstruct, py::arg("svg"), py::arg("labels"));
  m.def("synth", &synth, py::arg("seed") = 1, py::arg("width") = 700.0, py::arg("height") = 420.0,
        py::arg("symbols") = 24, py::arg("clutter") = 12, py::arg("straddle") = 0.3);
}
