#include "cadspot/svg_io.hpp"

#include <boost/property_tree/detail/rapidxml.hpp>
#include <charconv>
#include <cmath>
#include <optional>
#include <set>
#include <sstream>

#include "cadspot/error.hpp"

namespace cadspot {
namespace rx = boost::property_tree::detail::rapidxml;

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f'; }

// Cursor over attribute text; `base` is the byte offset of text[0] in the document.
class Scanner {
 public:
  Scanner(std::string_view text, std::size_t base) : text_(text), base_(base) {}

  void skip_separators() {
    while (pos_ < text_.size() && (is_space(text_[pos_]) || text_[pos_] == ',')) ++pos_;
  }
  void skip_spaces() {
    while (pos_ < text_.size() && is_space(text_[pos_])) ++pos_;
  }
  bool at_end() {
    skip_separators();
    return pos_ >= text_.size();
  }
  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }
  void advance() { ++pos_; }
  std::size_t offset() const { return base_ + pos_; }

  bool number_ahead() {
    skip_separators();
    const char c = peek();
    return (c >= '0' && c <= '9') || c == '-' || c == '+' || c == '.';
  }

  double number() {
    skip_separators();
    const std::size_t start = pos_;
    std::size_t i = pos_;
    if (i < text_.size() && (text_[i] == '+' || text_[i] == '-')) ++i;
    const std::size_t digits_start = i;
    bool any = false;
    while (i < text_.size() && std::isdigit(static_cast<unsigned char>(text_[i]))) ++i, any = true;
    if (i < text_.size() && text_[i] == '.') {
      ++i;
      while (i < text_.size() && std::isdigit(static_cast<unsigned char>(text_[i]))) ++i, any = true;
    }
    if (!any) throw ParseError("malformed number", base_ + start);
    if (i < text_.size() && (text_[i] == 'e' || text_[i] == 'E')) {
      std::size_t j = i + 1;
      if (j < text_.size() && (text_[j] == '+' || text_[j] == '-')) ++j;
      if (j < text_.size() && std::isdigit(static_cast<unsigned char>(text_[j]))) {
        while (j < text_.size() && std::isdigit(static_cast<unsigned char>(text_[j]))) ++j;
        i = j;
      } else {
        throw ParseError("malformed number exponent", base_ + i);
      }
    }
    double value = 0.0;
    const char* first = text_.data() + digits_start;
    const char* last = text_.data() + i;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) throw ParseError("malformed number", base_ + start);
    if (text_[start] == '-') value = -value;
    pos_ = i;
    return value;
  }

  bool flag() {
    skip_separators();
    const char c = peek();
    if (c != '0' && c != '1') throw ParseError("expected arc flag 0 or 1", offset());
    ++pos_;
    return c == '1';
  }

 private:
  std::string_view text_;
  std::size_t base_;
  std::size_t pos_ = 0;
};

// Endpoint -> center conversion of an SVG elliptical arc (SVG 1.1 implementation notes F.6.5).
std::optional<Geometry> arc_to_center(Vec2 p0, double rx, double ry, double phi_deg, bool large, bool sweep, Vec2 p1) {
  if (p0 == p1) return std::nullopt;
  rx = std::abs(rx);
  ry = std::abs(ry);
  if (rx == 0.0 || ry == 0.0) return Segment{p0, p1};
  const double phi = phi_deg * kPi / 180.0;
  const double cs = std::cos(phi);
  const double sn = std::sin(phi);
  const Vec2 half = (p0 - p1) * 0.5;
  const Vec2 pr{cs * half.x + sn * half.y, -sn * half.x + cs * half.y};
  const double lambda = (pr.x * pr.x) / (rx * rx) + (pr.y * pr.y) / (ry * ry);
  if (lambda > 1.0) {
    const double s = std::sqrt(lambda);
    rx *= s;
    ry *= s;
  }
  const double num = rx * rx * ry * ry - rx * rx * pr.y * pr.y - ry * ry * pr.x * pr.x;
  const double den = rx * rx * pr.y * pr.y + ry * ry * pr.x * pr.x;
  double coef = std::sqrt(std::max(0.0, num / den));
  if (large == sweep) coef = -coef;
  const Vec2 cpr{coef * rx * pr.y / ry, -coef * ry * pr.x / rx};
  const Vec2 mid = (p0 + p1) * 0.5;
  const Vec2 center{cs * cpr.x - sn * cpr.y + mid.x, sn * cpr.x + cs * cpr.y + mid.y};
  auto angle = [](Vec2 u, Vec2 v) { return std::atan2(cross(u, v), dot(u, v)); };
  const Vec2 u{(pr.x - cpr.x) / rx, (pr.y - cpr.y) / ry};
  const Vec2 v{(-pr.x - cpr.x) / rx, (-pr.y - cpr.y) / ry};
  const double theta1 = angle({1.0, 0.0}, u);
  double dtheta = angle(u, v);
  if (!sweep && dtheta > 0) dtheta -= kTwoPi;
  if (sweep && dtheta < 0) dtheta += kTwoPi;
  const double start = dtheta >= 0 ? theta1 : theta1 + dtheta;
  const double extent = std::abs(dtheta);
  if (std::abs(rx - ry) <= 1e-12 * std::max(rx, ry)) {
    return Arc{center, 0.5 * (rx + ry), wrap_angle(start + phi), extent};
  }
  return Ellipse{center, rx, ry, phi, wrap_angle(start), extent};
}

std::vector<Geometry> parse_path_data(std::string_view d, std::size_t base) {
  std::vector<Geometry> out;
  Scanner sc(d, base);
  Vec2 cur{}, subpath_start{};
  char cmd = 0;
  bool have_point = false;
  while (!sc.at_end()) {
    const char c = sc.peek();
    if (std::isalpha(static_cast<unsigned char>(c))) {
      if (std::string_view("MmLlHhVvCcQqAaZz").find(c) == std::string_view::npos) {
        throw ParseError(std::string("unsupported path command '") + c + "'", sc.offset());
      }
      cmd = c;
      sc.advance();
    } else if (cmd == 0 || cmd == 'Z' || cmd == 'z') {
      throw ParseError("expected path command", sc.offset());
    }
    const bool rel = std::islower(static_cast<unsigned char>(cmd)) != 0;
    const Vec2 origin = rel ? cur : Vec2{};
    if (cmd != 'M' && cmd != 'm' && !have_point) throw ParseError("path must start with a moveto", sc.offset());
    switch (cmd) {
      case 'M':
      case 'm': {
        const double x = sc.number();
        const double y = sc.number();
        cur = origin + Vec2{x, y};
        subpath_start = cur;
        have_point = true;
        cmd = rel ? 'l' : 'L';  // implicit lineto for further pairs
        break;
      }
      case 'L':
      case 'l': {
        const double x = sc.number();
        const double y = sc.number();
        const Vec2 next = origin + Vec2{x, y};
        out.emplace_back(Segment{cur, next});
        cur = next;
        break;
      }
      case 'H':
      case 'h': {
        const double x = sc.number();
        const Vec2 next{rel ? cur.x + x : x, cur.y};
        out.emplace_back(Segment{cur, next});
        cur = next;
        break;
      }
      case 'V':
      case 'v': {
        const double y = sc.number();
        const Vec2 next{cur.x, rel ? cur.y + y : y};
        out.emplace_back(Segment{cur, next});
        cur = next;
        break;
      }
      case 'C':
      case 'c': {
        CubicBezier b;
        b.p[0] = cur;
        for (int k = 1; k <= 3; ++k) {
          const double x = sc.number();
          const double y = sc.number();
          b.p[k] = origin + Vec2{x, y};
        }
        out.emplace_back(b);
        cur = b.p[3];
        break;
      }
      case 'Q':
      case 'q': {
        QuadBezier b;
        b.p[0] = cur;
        for (int k = 1; k <= 2; ++k) {
          const double x = sc.number();
          const double y = sc.number();
          b.p[k] = origin + Vec2{x, y};
        }
        out.emplace_back(b);
        cur = b.p[2];
        break;
      }
      case 'A':
      case 'a': {
        const double rx = sc.number();
        const double ry = sc.number();
        const double rot = sc.number();
        const bool large = sc.flag();
        const bool sweep = sc.flag();
        const double x = sc.number();
        const double y = sc.number();
        const Vec2 next = origin + Vec2{x, y};
        if (auto g = arc_to_center(cur, rx, ry, rot, large, sweep, next)) out.push_back(std::move(*g));
        cur = next;
        break;
      }
      case 'Z':
      case 'z': {
        if (!(cur == subpath_start)) out.emplace_back(Segment{cur, subpath_start});
        cur = subpath_start;
        break;
      }
      default: break;
    }
  }
  return out;
}

struct Attr {
  std::string_view value;
  std::size_t offset = 0;
};

class SvgWalker {
 public:
  explicit SvgWalker(const char* doc_begin) : doc_(doc_begin) {}

  void walk(rx::xml_node<char>* node, const Affine2& parent) {
    for (auto* child = node->first_node(); child; child = child->next_sibling()) {
      if (child->type() != rx::node_element) continue;
      visit(child, parent);
    }
  }

  SvgParseResult result;

  void visit(rx::xml_node<char>* node, const Affine2& parent);

 private:
  std::size_t offset_of(const char* p) const { return static_cast<std::size_t>(p - doc_); }

  std::optional<Attr> attr(rx::xml_node<char>* node, std::string_view name) const {
    for (auto* a = node->first_attribute(); a; a = a->next_attribute()) {
      if (std::string_view(a->name(), a->name_size()) == name) {
        return Attr{std::string_view(a->value(), a->value_size()), offset_of(a->value())};
      }
    }
    return std::nullopt;
  }

  double number_attr(rx::xml_node<char>* node, std::string_view name, double fallback) const {
    auto a = attr(node, name);
    if (!a) return fallback;
    std::string_view v = a->value;
    while (!v.empty() && is_space(v.back())) v.remove_suffix(1);
    if (v.size() >= 2 && v.substr(v.size() - 2) == "px") v.remove_suffix(2);
    Scanner sc(v, a->offset);
    const double value = sc.number();
    if (!sc.at_end()) throw ParseError("malformed numeric attribute '" + std::string(name) + "'", sc.offset());
    return value;
  }

  // Resolves a presentation property from the attribute or the style declaration.
  std::optional<std::string> property(rx::xml_node<char>* node, std::string_view name) const {
    if (auto style = attr(node, "style")) {
      std::string_view s = style->value;
      while (!s.empty()) {
        const auto semi = s.find(';');
        std::string_view decl = s.substr(0, semi);
        s = semi == std::string_view::npos ? std::string_view{} : s.substr(semi + 1);
        const auto colon = decl.find(':');
        if (colon == std::string_view::npos) continue;
        auto trim = [](std::string_view t) {
          while (!t.empty() && is_space(t.front())) t.remove_prefix(1);
          while (!t.empty() && is_space(t.back())) t.remove_suffix(1);
          return t;
        };
        if (trim(decl.substr(0, colon)) == name) return std::string(trim(decl.substr(colon + 1)));
      }
    }
    if (auto a = attr(node, name)) return std::string(a->value);
    return std::nullopt;
  }

  void add(const Geometry& g, const Affine2& m) {
    Primitive local{0, g};
    Primitive p = m.is_identity() ? local : transformed(local, m);
    result.drawing.add(std::move(p.geometry));
  }

  void warn(rx::xml_node<char>* node, const std::string& what) {
    result.warnings.push_back("skipped <" + std::string(node->name(), node->name_size()) + "> at byte " +
                              std::to_string(offset_of(node->name())) + ": " + what);
  }

  std::vector<Vec2> points_attr(rx::xml_node<char>* node) const {
    std::vector<Vec2> pts;
    auto a = attr(node, "points");
    if (!a) return pts;
    Scanner sc(a->value, a->offset);
    while (!sc.at_end()) {
      const double x = sc.number();
      if (sc.at_end()) throw ParseError("odd number of coordinates in points", sc.offset());
      const double y = sc.number();
      pts.push_back({x, y});
    }
    return pts;
  }

  void visit_element(rx::xml_node<char>* node, const Affine2& parent) {
    const std::string_view name(node->name(), node->name_size());
    Affine2 m = parent;
    if (auto t = attr(node, "transform")) {
      try {
        m = parent * parse_transform(t->value);
      } catch (const ParseError& e) {
        throw ParseError("malformed transform", t->offset + e.offset());
      }
    }
    static const std::set<std::string_view> skipped = {"text", "tspan", "image", "title", "desc",
                                                       "metadata", "defs", "style", "font"};
    if (name == "svg" || name == "g") {
      walk(node, m);
      return;
    }
    if (skipped.count(name)) {
      warn(node, "not a graphical primitive");
      return;
    }
    static const std::set<std::string_view> shapes = {"path", "line", "rect", "circle", "ellipse", "polyline", "polygon"};
    if (!shapes.count(name)) {
      throw ParseError("unsupported element <" + std::string(name) + ">", offset_of(node->name()) - 1);
    }
    const auto stroke = property(node, "stroke");
    const auto fill = property(node, "fill");
    if (stroke && *stroke == "none" && !(fill && *fill == "none")) {
      warn(node, "fill region without stroke");
      return;
    }
    if (name == "path") {
      auto d = attr(node, "d");
      if (!d) return;
      for (const auto& g : parse_path_data(d->value, d->offset)) add(g, m);
    } else if (name == "line") {
      add(Segment{{number_attr(node, "x1", 0), number_attr(node, "y1", 0)},
                  {number_attr(node, "x2", 0), number_attr(node, "y2", 0)}},
          m);
    } else if (name == "rect") {
      const double x = number_attr(node, "x", 0);
      const double y = number_attr(node, "y", 0);
      const double w = number_attr(node, "width", 0);
      const double h = number_attr(node, "height", 0);
      if (!(w > 0 && h > 0)) {
        warn(node, "non-positive width or height");
        return;
      }
      if (attr(node, "rx") || attr(node, "ry")) warn(node, "rounded corners ignored");
      const Vec2 a{x, y}, b{x + w, y}, c{x + w, y + h}, d{x, y + h};
      add(Segment{a, b}, m);
      add(Segment{b, c}, m);
      add(Segment{c, d}, m);
      add(Segment{d, a}, m);
    } else if (name == "circle") {
      const double r = number_attr(node, "r", 0);
      if (!(r > 0)) {
        warn(node, "non-positive radius");
        return;
      }
      add(Circle{{number_attr(node, "cx", 0), number_attr(node, "cy", 0)}, r}, m);
    } else if (name == "ellipse") {
      const double rx = number_attr(node, "rx", 0);
      const double ry = number_attr(node, "ry", 0);
      if (!(rx > 0 && ry > 0)) {
        warn(node, "non-positive radius");
        return;
      }
      const Vec2 c{number_attr(node, "cx", 0), number_attr(node, "cy", 0)};
      if (rx == ry) {
        add(Circle{c, rx}, m);
      } else {
        add(Ellipse{c, rx, ry, 0.0, 0.0, kTwoPi}, m);
      }
    } else {  // polyline, polygon
      auto pts = points_attr(node);
      if (pts.size() < 2) {
        throw ParseError("<" + std::string(name) + "> needs at least 2 points", offset_of(node->name()) - 1);
      }
      add(Polyline{std::move(pts), name == "polygon"}, m);
    }
  }

  const char* doc_;
};

void SvgWalker::visit(rx::xml_node<char>* node, const Affine2& parent) { visit_element(node, parent); }

}  // namespace

Affine2 parse_transform(std::string_view text) {
  Affine2 m;
  std::size_t pos = 0;
  auto skip = [&] {
    while (pos < text.size() && (is_space(text[pos]) || text[pos] == ',')) ++pos;
  };
  skip();
  while (pos < text.size()) {
    const std::size_t name_start = pos;
    while (pos < text.size() && std::isalpha(static_cast<unsigned char>(text[pos]))) ++pos;
    const std::string_view name = text.substr(name_start, pos - name_start);
    while (pos < text.size() && is_space(text[pos])) ++pos;
    if (pos >= text.size() || text[pos] != '(') throw ParseError("expected '(' in transform", pos);
    const std::size_t close = text.find(')', pos);
    if (close == std::string_view::npos) throw ParseError("unterminated transform", pos);
    Scanner sc(text.substr(pos + 1, close - pos - 1), pos + 1);
    std::vector<double> args;
    while (!sc.at_end()) args.push_back(sc.number());
    auto need = [&](std::size_t lo, std::size_t hi) {
      if (args.size() < lo || args.size() > hi) throw ParseError("wrong argument count for " + std::string(name), name_start);
    };
    const double deg = kPi / 180.0;
    Affine2 t;
    if (name == "matrix") {
      need(6, 6);
      t = {args[0], args[1], args[2], args[3], args[4], args[5]};
    } else if (name == "translate") {
      need(1, 2);
      t = Affine2::translate(args[0], args.size() > 1 ? args[1] : 0.0);
    } else if (name == "scale") {
      need(1, 2);
      t = Affine2::scale(args[0], args.size() > 1 ? args[1] : args[0]);
    } else if (name == "rotate") {
      if (args.size() != 1 && args.size() != 3) need(1, 1);
      t = Affine2::rotate(args[0] * deg);
      if (args.size() == 3) {
        t = Affine2::translate(args[1], args[2]) * t * Affine2::translate(-args[1], -args[2]);
      }
    } else if (name == "skewX") {
      need(1, 1);
      t = Affine2::skew_x(args[0] * deg);
    } else if (name == "skewY") {
      need(1, 1);
      t = Affine2::skew_y(args[0] * deg);
    } else {
      throw ParseError("unsupported transform '" + std::string(name) + "'", name_start);
    }
    m = m * t;
    pos = close + 1;
    skip();
  }
  return m;
}

SvgParseResult parse_svg(std::string_view svg_text) {
  std::vector<char> buffer(svg_text.begin(), svg_text.end());
  buffer.push_back('\0');
  rx::xml_document<char> doc;
  try {
    doc.parse<rx::parse_non_destructive>(buffer.data());
  } catch (const rx::parse_error& e) {
    throw ParseError(std::string("malformed XML: ") + e.what(),
                     static_cast<std::size_t>(e.where<char>() - buffer.data()));
  }
  auto* root = doc.first_node();
  while (root && root->type() != rx::node_element) root = root->next_sibling();
  if (!root || std::string_view(root->name(), root->name_size()) != "svg") {
    throw ParseError("document root is not <svg>", root ? static_cast<std::size_t>(root->name() - buffer.data()) : 0);
  }
  SvgWalker walker(buffer.data());
  walker.visit(root, Affine2{});
  return std::move(walker.result);
}

std::string format_number(double value) {
  if (value == 0.0) return "0";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string pt(Vec2 p) { return format_number(p.x) + " " + format_number(p.y); }

std::string element_for(const Primitive& p) {
  return std::visit(
      Overloaded{
          [](const Segment& s) { return "path d=\"M" + pt(s.a) + " L" + pt(s.b) + "\""; },
          [&](const Arc& a) {
            if (a.sweep >= kTwoPi) {
              return "circle cx=\"" + format_number(a.center.x) + "\" cy=\"" + format_number(a.center.y) +
                     "\" r=\"" + format_number(a.radius) + "\"";
            }
            return "path d=\"M" + pt(p.start_point()) + " A" + format_number(a.radius) + " " +
                   format_number(a.radius) + " 0 " + (a.sweep > kPi ? "1" : "0") + " 1 " + pt(p.end_point()) + "\"";
          },
          [](const Circle& c) {
            return "circle cx=\"" + format_number(c.center.x) + "\" cy=\"" + format_number(c.center.y) + "\" r=\"" +
                   format_number(c.radius) + "\"";
          },
          [&](const Ellipse& e) {
            const double deg = e.rotation * 180.0 / kPi;
            if (e.closed()) {
              std::string s = "ellipse cx=\"" + format_number(e.center.x) + "\" cy=\"" + format_number(e.center.y) +
                              "\" rx=\"" + format_number(e.rx) + "\" ry=\"" + format_number(e.ry) + "\"";
              if (deg != 0.0) {
                s += " transform=\"rotate(" + format_number(deg) + " " + pt(e.center) + ")\"";
              }
              return s;
            }
            return "path d=\"M" + pt(p.start_point()) + " A" + format_number(e.rx) + " " + format_number(e.ry) + " " +
                   format_number(deg) + " " + (e.sweep > kPi ? "1" : "0") + " 1 " + pt(p.end_point()) + "\"";
          },
          [](const CubicBezier& b) {
            return "path d=\"M" + pt(b.p[0]) + " C" + pt(b.p[1]) + " " + pt(b.p[2]) + " " + pt(b.p[3]) + "\"";
          },
          [](const QuadBezier& b) { return "path d=\"M" + pt(b.p[0]) + " Q" + pt(b.p[1]) + " " + pt(b.p[2]) + "\""; },
          [](const Polyline& pl) {
            std::string s = std::string(pl.closed ? "polygon" : "polyline") + " points=\"";
            for (std::size_t i = 0; i < pl.vertices.size(); ++i) s += (i ? " " : "") + pt(pl.vertices[i]);
            return s + "\"";
          }},
      p.geometry);
}

}  // namespace

std::string render_labeled_svg(const Drawing& drawing, const PanopticLabeling& labeling, const ClassTable& palette) {
  if (labeling.semantic.size() != drawing.size() || labeling.instance.size() != drawing.size()) {
    throw ArgumentError("render: labeling covers " + std::to_string(labeling.semantic.size()) + " primitives, drawing has " +
                        std::to_string(drawing.size()));
  }
  std::ostringstream out;
  const BBox& b = drawing.bounds;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\"";
  if (!b.empty()) {
    out << " viewBox=\"" << format_number(b.min.x) << " " << format_number(b.min.y) << " " << format_number(b.width())
        << " " << format_number(b.height()) << "\"";
  }
  out << ">\n";
  for (const auto& p : drawing.primitives) {
    const int sem = labeling.semantic[p.id];
    const std::string& color = palette.color(sem);
    out << "  <" << element_for(p) << " fill=\"none\" stroke=\"" << color << "\" data-primitive=\"" << p.id
        << "\" data-semantic=\"" << sem << "\" data-instance=\"" << labeling.instance[p.id] << "\"/>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace cadspot
