#pragma once

#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cadspot/model.hpp"

namespace cadspot {

enum class SchemaMode { Strict, Lenient };

/// Confidence attached to an output instance (present in spot output, absent in ground truth).
struct InstanceScore {
  int id = 0;
  int semantic = 0;
  double score = 1.0;

  bool operator==(const InstanceScore&) const = default;
};

/// annotations.json / labeling.json:
/// {"classes": [...], "labels": [[primitive, semantic, instance], ...], "instances": [...], "config": {...}}
struct AnnotationFile {
  std::optional<ClassTable> classes;
  PanopticLabeling labeling;
  std::vector<InstanceScore> instances;
  nlohmann::json config;  // provenance; null when absent
};

nlohmann::json class_table_to_json(const ClassTable& table);
ClassTable class_table_from_json(const nlohmann::json& j);
ClassTable load_class_table(std::string_view text);

/// Parses and validates an annotation file for a drawing with `num_primitives`
/// primitives. Every primitive must be labeled exactly once; gaps are reported
/// with their ids in a SchemaError.
AnnotationFile load_annotations(std::string_view text, std::size_t num_primitives,
                                SchemaMode mode = SchemaMode::Strict);

std::string save_annotations(const PanopticLabeling& labeling, const ClassTable* classes = nullptr,
                             const std::vector<InstanceScore>& instances = {},
                             const nlohmann::json& config = nullptr);

struct PredictionFile {
  std::vector<WindowProposals> windows;
  nlohmann::json config;
};

/// predictions.json: {"windows": [{"rect": [x0,y0,x1,y1], "primitives": [...],
/// "semantic": [[...K_sem]...], "instances": [{"mask": [...], "class_scores": [...], "score": s}]}]}.
/// `num_primitives`, when given, bounds the referenced primitive ids.
PredictionFile load_predictions(std::string_view text, std::optional<std::size_t> num_primitives = std::nullopt,
                                SchemaMode mode = SchemaMode::Strict);
std::string save_predictions(const PredictionFile& file);

/// Reads a whole file; throws Error("io", ...) naming the path on failure.
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace cadspot
