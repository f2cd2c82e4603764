#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "teesplit/error.hpp"
#include "teesplit/layer.hpp"
#include "teesplit/tensor.hpp"

namespace teesplit {

/// A legal split location: the first `boundary` layers run in the enclave.
struct PartitionPoint {
  std::string label;
  std::size_t boundary = 0;

  friend bool operator==(const PartitionPoint&, const PartitionPoint&) = default;
};

/// Half-open layer index range.
struct LayerRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  friend bool operator==(const LayerRange&, const LayerRange&) = default;
};

/// A run of consecutive units of one type, e.g. {"MBConv", 8}.
struct UnitRun {
  std::string unit;
  std::size_t count = 0;

  friend bool operator==(const UnitRun&, const UnitRun&) = default;
};

/// "1 conv + 8 MBConv"; empty list renders as "-".
inline std::string format_units(const std::vector<UnitRun>& runs) {
  if (runs.empty()) return "-";
  std::string out;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (i) out += " + ";
    out += std::to_string(runs[i].count) + " " + runs[i].unit;
  }
  return out;
}

struct PartitionAssignment {
  std::string boundary_label;
  std::size_t boundary = 0;
  LayerRange enclave_layers;
  LayerRange accelerator_layers;
  Shape exposed_tensor_shape;
  std::uint64_t exposed_tensor_bytes = 0;
  std::vector<UnitRun> enclave_units;
  std::vector<UnitRun> accelerator_units;

  friend bool operator==(const PartitionAssignment&,
                         const PartitionAssignment&) = default;
};

/// Immutable, validated linear chain of layers with named partition points.
class ModelGraph {
 public:
  ModelGraph(std::string name, Shape input_shape, std::vector<LayerSpec> layers,
             std::vector<PartitionPoint> partition_points)
      : name_(std::move(name)),
        input_shape_(std::move(input_shape)),
        layers_(std::move(layers)),
        points_(std::move(partition_points)) {
    validate();
  }

  const std::string& name() const { return name_; }
  const Shape& input_shape() const { return input_shape_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  const std::vector<PartitionPoint>& partition_points() const { return points_; }

  const Shape& output_shape() const { return activation_shape(layers_.size()); }

  /// Shape of the activation after the first `boundary` layers.
  const Shape& activation_shape(std::size_t boundary) const {
    if (boundary > layers_.size())
      throw InvalidArgument("boundary " + std::to_string(boundary) +
                            " past end of " + name_);
    return boundary == 0 ? input_shape_ : layers_[boundary - 1].output_shape;
  }

  const PartitionPoint& point(const std::string& label) const {
    for (const auto& p : points_)
      if (p.label == label) return p;
    throw LookupError("model " + name_ + " has no partition point '" + label + "'");
  }

  /// Unit census of layers [begin, end).
  std::vector<UnitRun> unit_runs(LayerRange range) const {
    std::vector<UnitRun> runs;
    for (std::size_t i = range.begin; i < range.end; ++i) {
      const bool new_unit = i == range.begin || layers_[i].unit_id != layers_[i - 1].unit_id;
      if (!new_unit) continue;
      if (!runs.empty() && runs.back().unit == layers_[i].unit) {
        ++runs.back().count;
      } else {
        runs.push_back({layers_[i].unit, 1});
      }
    }
    return runs;
  }

  /// True if cutting after `boundary` layers splits no unit and no skip edge.
  bool is_legal_cut(std::size_t boundary) const {
    if (boundary == 0 || boundary > layers_.size()) return false;
    if (boundary == layers_.size()) return true;
    if (layers_[boundary - 1].unit_id == layers_[boundary].unit_id) return false;
    for (std::size_t j = boundary; j < layers_.size(); ++j)
      if (has_source(layers_[j].kind) &&
          layers_[j].source < static_cast<int>(boundary) - 1)
        return false;
    return true;
  }

  /// Layers [begin, end) as a standalone graph. Source references are
  /// re-based; partition points strictly inside the range are kept.
  ModelGraph slice(std::size_t begin, std::size_t end, std::string name) const {
    if (begin > end || end > layers_.size())
      throw InvalidArgument("bad slice of " + name_);
    std::vector<LayerSpec> layers(layers_.begin() + static_cast<std::ptrdiff_t>(begin),
                                  layers_.begin() + static_cast<std::ptrdiff_t>(end));
    for (auto& l : layers) {
      if (!has_source(l.kind)) continue;
      l.source -= static_cast<int>(begin);
      if (l.source < -1)
        throw InvalidArgument("slice of " + name_ + " cuts a skip connection at '" +
                              l.name + "'");
    }
    std::vector<PartitionPoint> points;
    for (const auto& p : points_)
      if (p.boundary > begin && p.boundary <= end)
        points.push_back({p.label, p.boundary - begin});
    return ModelGraph(std::move(name), activation_shape(begin), std::move(layers),
                      std::move(points));
  }

 private:
  void validate() {
    if (input_shape_.empty())
      throw ShapeError("model " + name_ + ": empty input shape");
    for (std::size_t e : input_shape_)
      if (e == 0) throw ShapeError("model " + name_ + ": input extents must be positive");

    std::set<std::string> names;
    Shape current = input_shape_;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      LayerSpec& l = layers_[i];
      if (!names.insert(l.name).second)
        throw InvalidArgument("model " + name_ + ": duplicate layer name '" + l.name + "'");
      if (i > 0 && l.unit_id < layers_[i - 1].unit_id)
        throw InvalidArgument("model " + name_ + ": unit ids must be nondecreasing at '" +
                              l.name + "'");
      const Shape* src = nullptr;
      if (has_source(l.kind)) {
        if (l.source < -1 || l.source >= static_cast<int>(i))
          throw InvalidArgument("layer '" + l.name + "': source must refer to an earlier layer");
        src = l.source == -1 ? &input_shape_ : &layers_[static_cast<std::size_t>(l.source)].output_shape;
      }
      l.input_shape = current;
      l.output_shape = infer_output_shape(l, current, src);
      current = l.output_shape;
    }

    std::set<std::string> labels;
    std::size_t prev = 0;
    for (const auto& p : points_) {
      if (!labels.insert(p.label).second)
        throw InvalidArgument("model " + name_ + ": duplicate partition label '" + p.label + "'");
      if (p.boundary <= prev)
        throw InvalidArgument("model " + name_ + ": partition boundaries must be strictly increasing");
      if (!is_legal_cut(p.boundary))
        throw InvalidArgument("model " + name_ + ": partition '" + p.label +
                              "' cuts inside a unit or skip connection");
      prev = p.boundary;
    }
  }

  std::string name_;
  Shape input_shape_;
  std::vector<LayerSpec> layers_;
  std::vector<PartitionPoint> points_;
};

inline PartitionAssignment make_assignment(const ModelGraph& model,
                                           const PartitionPoint& p) {
  PartitionAssignment a;
  a.boundary_label = p.label;
  a.boundary = p.boundary;
  a.enclave_layers = {0, p.boundary};
  a.accelerator_layers = {p.boundary, model.layers().size()};
  a.exposed_tensor_shape = model.activation_shape(p.boundary);
  a.exposed_tensor_bytes = shape_elements(a.exposed_tensor_shape) * kElementBytes;
  a.enclave_units = model.unit_runs(a.enclave_layers);
  a.accelerator_units = model.unit_runs(a.accelerator_layers);
  return a;
}

/// One assignment per partition point, in boundary order.
inline std::vector<PartitionAssignment> enumerate_partitions(const ModelGraph& model) {
  std::vector<PartitionAssignment> out;
  out.reserve(model.partition_points().size());
  for (const auto& p : model.partition_points()) out.push_back(make_assignment(model, p));
  return out;
}

inline PartitionAssignment assignment_for(const ModelGraph& model,
                                          const std::string& label) {
  return make_assignment(model, model.point(label));
}

/// Enclave (critical) and accelerator (non-critical) halves.
inline std::pair<ModelGraph, ModelGraph> split(const ModelGraph& model,
                                               const std::string& boundary_label) {
  const std::size_t b = model.point(boundary_label).boundary;
  return {model.slice(0, b, model.name() + "/enclave"),
          model.slice(b, model.layers().size(), model.name() + "/accelerator")};
}

}  // namespace teesplit
