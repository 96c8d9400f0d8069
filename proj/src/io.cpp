#include "cadspot/io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "cadspot/error.hpp"

namespace cadspot {

using nlohmann::json;

namespace {

json parse_json(std::string_view text, const char* what) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string(what) + ": invalid JSON (" + e.what() + ")", e.byte);
  }
}

void check_keys(const json& obj, const std::set<std::string>& allowed, SchemaMode mode, const std::string& where) {
  if (!obj.is_object()) throw SchemaError(where + ": expected an object");
  if (mode == SchemaMode::Lenient) return;
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) throw SchemaError(where + ": unknown field \"" + key + "\"");
  }
}

template <class T>
T get_as(const json& j, const std::string& where) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    throw SchemaError(where + ": " + e.what());
  }
}

const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(where + ": missing field \"" + key + "\"");
  return *it;
}

std::string id_list(const std::vector<int>& ids) {
  std::string s = "{";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i == 32) {
      s += ", ... (" + std::to_string(ids.size()) + " total)";
      break;
    }
    s += (i ? ", " : "") + std::to_string(ids[i]);
  }
  return s + "}";
}

}  // namespace

json class_table_to_json(const ClassTable& table) {
  json classes = json::array();
  for (const auto& c : table.classes()) {
    classes.push_back({{"id", c.id},
                       {"name", c.name},
                       {"kind", c.kind == ClassKind::Thing ? "thing" : "stuff"},
                       {"color", c.color}});
  }
  return classes;
}

ClassTable class_table_from_json(const json& j) {
  const json* list = &j;
  std::string background = "#c8c8c8";
  if (j.is_object()) {
    list = &require(j, "classes", "class table");
    if (j.contains("background_color")) background = get_as<std::string>(j["background_color"], "class table");
  }
  if (!list->is_array()) throw SchemaError("class table: \"classes\" must be an array");
  std::vector<ClassInfo> classes;
  for (std::size_t i = 0; i < list->size(); ++i) {
    const json& c = (*list)[i];
    const std::string where = "class table entry " + std::to_string(i);
    check_keys(c, {"id", "name", "kind", "color"}, SchemaMode::Strict, where);
    ClassInfo info;
    info.id = get_as<int>(require(c, "id", where), where);
    info.name = get_as<std::string>(require(c, "name", where), where);
    const auto kind = get_as<std::string>(require(c, "kind", where), where);
    if (kind != "thing" && kind != "stuff") throw SchemaError(where + ": kind must be \"thing\" or \"stuff\"");
    info.kind = kind == "thing" ? ClassKind::Thing : ClassKind::Stuff;
    info.color = c.contains("color") ? get_as<std::string>(c["color"], where) : "#000000";
    classes.push_back(std::move(info));
  }
  return ClassTable(std::move(classes), background);
}

ClassTable load_class_table(std::string_view text) { return class_table_from_json(parse_json(text, "class table")); }

AnnotationFile load_annotations(std::string_view text, std::size_t num_primitives, SchemaMode mode) {
  const json j = parse_json(text, "annotations");
  check_keys(j, {"classes", "background_color", "labels", "instances", "config"}, mode, "annotations");
  AnnotationFile out;
  if (j.contains("classes")) {
    json table = {{"classes", j["classes"]}};
    if (j.contains("background_color")) table["background_color"] = j["background_color"];
    out.classes = class_table_from_json(table);
  }
  const json& labels = require(j, "labels", "annotations");
  if (!labels.is_array()) throw SchemaError("annotations: \"labels\" must be an array");
  out.labeling.semantic.assign(num_primitives, 0);
  out.labeling.instance.assign(num_primitives, 0);
  std::vector<char> seen(num_primitives, 0);
  std::vector<int> duplicates, out_of_range;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    const std::string where = "annotations: label row " + std::to_string(r);
    const auto row = get_as<std::vector<int>>(labels[r], where);
    if (row.size() != 3) throw SchemaError(where + ": expected [primitive, semantic, instance]");
    const int pid = row[0];
    if (pid < 0 || static_cast<std::size_t>(pid) >= num_primitives) {
      out_of_range.push_back(pid);
      continue;
    }
    if (seen[pid]) {
      duplicates.push_back(pid);
      continue;
    }
    seen[pid] = 1;
    out.labeling.semantic[pid] = row[1];
    out.labeling.instance[pid] = row[2];
  }
  if (!out_of_range.empty()) throw SchemaError("annotations: primitive ids out of range " + id_list(out_of_range));
  if (!duplicates.empty()) throw SchemaError("annotations: primitives labeled more than once " + id_list(duplicates));
  std::vector<int> missing;
  for (std::size_t i = 0; i < num_primitives; ++i) {
    if (!seen[i]) missing.push_back(static_cast<int>(i));
  }
  if (!missing.empty()) throw SchemaError("annotations: primitives without label " + id_list(missing));
  if (j.contains("instances")) {
    for (const auto& inst : j["instances"]) {
      check_keys(inst, {"id", "semantic", "score"}, mode, "annotations: instance");
      out.instances.push_back({get_as<int>(require(inst, "id", "instance"), "instance"),
                               get_as<int>(require(inst, "semantic", "instance"), "instance"),
                               get_as<double>(require(inst, "score", "instance"), "instance")});
    }
  }
  out.config = j.contains("config") ? j["config"] : json(nullptr);
  return out;
}

std::string save_annotations(const PanopticLabeling& labeling, const ClassTable* classes,
                             const std::vector<InstanceScore>& instances, const json& config) {
  json j = json::object();
  if (!config.is_null()) j["config"] = config;
  if (classes) {
    j["classes"] = class_table_to_json(*classes);
    j["background_color"] = classes->background_color();
  }
  json rows = json::array();
  for (std::size_t i = 0; i < labeling.size(); ++i) {
    rows.push_back({static_cast<int>(i), labeling.semantic[i], labeling.instance[i]});
  }
  j["labels"] = std::move(rows);
  if (!instances.empty()) {
    json list = json::array();
    for (const auto& s : instances) list.push_back({{"id", s.id}, {"semantic", s.semantic}, {"score", s.score}});
    j["instances"] = std::move(list);
  }
  return j.dump() + "\n";
}

PredictionFile load_predictions(std::string_view text, std::optional<std::size_t> num_primitives, SchemaMode mode) {
  const json j = parse_json(text, "predictions");
  check_keys(j, {"windows", "config"}, mode, "predictions");
  PredictionFile out;
  const json& windows = require(j, "windows", "predictions");
  if (!windows.is_array()) throw SchemaError("predictions: \"windows\" must be an array");
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const json& win = windows[w];
    const std::string where = "predictions: window " + std::to_string(w);
    check_keys(win, {"rect", "primitives", "semantic", "instances", "features"}, mode, where);
    WindowProposals wp;
    const auto rect = get_as<std::vector<double>>(require(win, "rect", where), where);
    if (rect.size() != 4) throw SchemaError(where + ": rect must be [x0, y0, x1, y1]");
    wp.window = BBox{{rect[0], rect[1]}, {rect[2], rect[3]}};
    if (win.contains("primitives")) wp.primitives = get_as<std::vector<int>>(win["primitives"], where);
    if (win.contains("semantic")) wp.semantic = get_as<std::vector<std::vector<double>>>(win["semantic"], where);
    if (!wp.primitives.empty() && wp.semantic.size() != wp.primitives.size()) {
      throw SchemaError(where + ": " + std::to_string(wp.semantic.size()) + " semantic rows for " +
                        std::to_string(wp.primitives.size()) + " primitives");
    }
    for (std::size_t k = 1; k < wp.primitives.size(); ++k) {
      if (wp.primitives[k] <= wp.primitives[k - 1]) throw SchemaError(where + ": primitives must be strictly ascending");
    }
    std::vector<int> bad;
    for (int pid : wp.primitives) {
      if (pid < 0 || (num_primitives && static_cast<std::size_t>(pid) >= *num_primitives)) bad.push_back(pid);
    }
    if (!bad.empty()) throw SchemaError(where + ": unknown primitive ids " + id_list(bad));
    if (win.contains("instances")) {
      for (std::size_t k = 0; k < win["instances"].size(); ++k) {
        const json& inst = win["instances"][k];
        const std::string iw = where + " instance " + std::to_string(k);
        check_keys(inst, {"mask", "class_scores", "score"}, mode, iw);
        InstanceProposal p;
        p.mask = get_as<std::vector<double>>(require(inst, "mask", iw), iw);
        p.class_scores = get_as<std::vector<double>>(require(inst, "class_scores", iw), iw);
        p.score = get_as<double>(require(inst, "score", iw), iw);
        if (p.mask.size() != wp.semantic.size()) {
          throw SchemaError(iw + ": mask length " + std::to_string(p.mask.size()) + " does not match " +
                            std::to_string(wp.semantic.size()) + " window primitives");
        }
        wp.instances.push_back(std::move(p));
      }
    }
    out.windows.push_back(std::move(wp));
  }
  out.config = j.contains("config") ? j["config"] : json(nullptr);
  return out;
}

std::string save_predictions(const PredictionFile& file) {
  json j = json::object();
  if (!file.config.is_null()) j["config"] = file.config;
  json windows = json::array();
  for (const auto& w : file.windows) {
    json win = {{"rect", {w.window.min.x, w.window.min.y, w.window.max.x, w.window.max.y}},
                {"primitives", w.primitives},
                {"semantic", w.semantic}};
    json instances = json::array();
    for (const auto& p : w.instances) {
      instances.push_back({{"mask", p.mask}, {"class_scores", p.class_scores}, {"score", p.score}});
    }
    win["instances"] = std::move(instances);
    windows.push_back(std::move(win));
  }
  j["windows"] = std::move(windows);
  return j.dump() + "\n";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", "cannot write " + path);
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error("io", "failed writing " + path);
}

}  // namespace cadspot
