#pragma once

#include <cstdint>
#include <string>

#include "cadspot/io.hpp"
#include "cadspot/predictor.hpp"
#include "cadspot/swa.hpp"

namespace cadspot {

/// Synthetic floorplan: a rectangular wall frame, thing symbols built from
/// door/window/furniture templates, and background clutter strokes.
struct SynthConfig {
  std::uint64_t seed = 1;
  double width = 1400.0;
  double height = 420.0;
  int symbols = 40;
  int clutter = 20;                  // background strokes
  double min_size = 8.0;             // symbol side length range
  double max_size = 40.0;
  double straddle_fraction = 0.0;    // share of symbols centered on a tile border
  double tile = kDefaultWindowSize;  // tile size that straddling refers to
};

struct SynthScene {
  Drawing drawing;  // already round-tripped through SVG text
  std::string svg;
  PanopticLabeling truth;
  int straddling = 0;  // symbols whose points fall into more than one tile
};

/// Deterministic for a given config. Symbol diameters stay below max_size * sqrt(2).
SynthScene generate_scene(const SynthConfig& config);

/// Emits the ground truth as window proposals: every primitive's semantic row
/// puts log 0.9 on its true class, and every true thing instance seen by the
/// window becomes a proposal masking its observed members, with score
/// 0.9 * observed point fraction + 0.1 when fully observed.
class OraclePredictor final : public Predictor {
 public:
  OraclePredictor(PanopticLabeling truth, const ClassTable& table);

  WindowProposals predict(const WindowInput& input) const override;

 private:
  PanopticLabeling truth_;
  ClassTable table_;
  std::vector<std::vector<int>> members_;  // instance id -> primitives
};

/// Runs a predictor over the configured window grid and records the results
/// in a prediction file (the input of a replay run).
PredictionFile record_predictions(const Drawing& drawing, const Predictor& predictor, const SwaConfig& config);

}  // namespace cadspot
