#pragma once

#include <fstream>
#include <optional>
#include <string>

#include "json.hpp"
#include "teesplit/architectures.hpp"
#include "teesplit/error.hpp"
#include "teesplit/model_graph.hpp"

namespace teesplit {

inline nlohmann::json to_json(const ModelGraph& g) {
  nlohmann::json j;
  j["name"] = g.name();
  j["input_shape"] = g.input_shape();
  j["layers"] = nlohmann::json::array();
  for (const auto& l : g.layers()) {
    nlohmann::json r{{"name", l.name}, {"kind", std::string(to_string(l.kind))},
                     {"unit", l.unit},  {"unit_id", l.unit_id}};
    switch (l.kind) {
      case LayerKind::kConv2d:
        r["out_channels"] = l.out_channels;
        [[fallthrough]];
      case LayerKind::kDepthwiseConv2d:
      case LayerKind::kMaxPool:
      case LayerKind::kAvgPool:
        r["kernel"] = l.kernel;
        r["stride"] = l.stride;
        r["padding"] = l.padding;
        break;
      case LayerKind::kFullyConnected:
        r["units"] = l.units;
        break;
      case LayerKind::kAdd:
      case LayerKind::kChannelScale:
        r["skip_source"] = l.source;
        break;
      default:
        break;
    }
    r["output_shape"] = l.output_shape;
    j["layers"].push_back(std::move(r));
  }
  j["partition_points"] = nlohmann::json::array();
  for (const auto& p : g.partition_points())
    j["partition_points"].push_back({{"label", p.label}, {"boundary", p.boundary}});
  return j;
}

/// Parses a model document. `unit`/`unit_id` default to one unit per layer;
/// `output_shape` entries are recomputed and ignored.
inline ModelGraph model_from_json(const nlohmann::json& j) {
  try {
    std::vector<LayerSpec> layers;
    int index = 0;
    for (const auto& r : j.at("layers")) {
      LayerSpec l;
      l.name = r.value("name", "layer" + std::to_string(index));
      l.kind = layer_kind_from_string(r.at("kind").get<std::string>());
      l.unit = r.value("unit", std::string(to_string(l.kind)));
      l.unit_id = r.value("unit_id", index);
      l.out_channels = r.value("out_channels", std::size_t{0});
      l.kernel = r.value("kernel", std::size_t{0});
      l.stride = r.value("stride", std::size_t{1});
      l.padding = r.value("padding", std::size_t{0});
      l.units = r.value("units", std::size_t{0});
      if (has_source(l.kind)) l.source = r.at("skip_source").get<int>();
      layers.push_back(std::move(l));
      ++index;
    }
    std::vector<PartitionPoint> points;
    for (const auto& p : j.at("partition_points"))
      points.push_back({p.at("label").get<std::string>(), p.at("boundary").get<std::size_t>()});
    return ModelGraph(j.at("name").get<std::string>(), j.at("input_shape").get<Shape>(),
                      std::move(layers), std::move(points));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed model document: ") + e.what());
  }
}

/// Built-in architecture name (optionally with an input override) or a path
/// to a JSON model document.
inline ModelGraph resolve_model(const std::string& name_or_path, const std::optional<Shape>& input = {}) {
  for (const auto& arch : builtin_architectures())
    if (arch == name_or_path)
      return build_architecture(arch, input.value_or(default_input_shape(arch)));
  std::ifstream in(name_or_path);
  if (!in) throw LookupError("unknown architecture or model file '" + name_or_path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("model file " + name_or_path + " is not valid JSON: " + e.what());
  }
  return model_from_json(j);
}

}  // namespace teesplit
