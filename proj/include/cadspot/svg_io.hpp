#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "cadspot/model.hpp"

namespace cadspot {

struct SvgParseResult {
  Drawing drawing;
  std::vector<std::string> warnings;  // skipped text/images/fill regions, ignored attributes
};

/// Parses the CAD subset of SVG: path (M/L/H/V/C/Q/A/Z, absolute and relative),
/// line, rect, circle, ellipse, polyline, polygon, nested <g>/<svg> with
/// transforms flattened into the geometry. Every path piece becomes one
/// primitive; rect becomes four segments. Throws ParseError (with byte offset)
/// on malformed XML or numbers and on unsupported elements.
SvgParseResult parse_svg(std::string_view svg_text);

inline Drawing parse_drawing(std::string_view svg_text) { return parse_svg(svg_text).drawing; }

/// Parses an SVG transform list such as "translate(1 2) rotate(30)".
Affine2 parse_transform(std::string_view text);

/// One element per primitive, stroked with its semantic class color and tagged
/// with data-primitive/data-semantic/data-instance attributes. Deterministic.
/// Throws ArgumentError when a label has no palette entry or sizes disagree.
std::string render_labeled_svg(const Drawing& drawing, const PanopticLabeling& labeling, const ClassTable& palette);

/// Shortest round-trip decimal representation of a double.
std::string format_number(double value);

}  // namespace cadspot
